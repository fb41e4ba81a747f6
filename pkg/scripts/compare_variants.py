#!/usr/bin/env python3
"""Train all six learner variants over several seeds and print the table."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from strokesim.ablation import ablation_report, format_report
from strokesim.config import RunConfig
from strokesim.persist import dump_json


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--out", default="runs/ablation.json")
    args = parser.parse_args()

    seeds = [int(s) for s in args.seeds.split(",")]
    report = ablation_report(RunConfig(), seeds, workers=args.workers, verbose=True)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    dump_json(args.out, report)
    print(format_report(report))
    print(f"written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
