#!/usr/bin/env python3
"""Train the default stroke policy and report the final evaluation.

Equivalent to `strokesim train`, kept as a script for quick hacking on
configs in code rather than YAML.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from strokesim.agent import train
from strokesim.config import RunConfig, build_envs, save_config
from strokesim.evaluation import evaluate
from strokesim.persist import dump_json, save_weights


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--episodes", type=int, default=None, help="override the training length")
    parser.add_argument("--out", default="runs/default")
    args = parser.parse_args()

    cfg = RunConfig()
    if args.episodes is not None:
        from dataclasses import replace

        cfg = replace(cfg, agent=replace(cfg.agent, episodes=args.episodes))

    train_env, eval_env = build_envs(cfg)
    result = train(train_env, eval_env, cfg.agent, args.seed, eval_seed=cfg.evaluation.seed, verbose=True)
    metrics = evaluate(result.actor, eval_env, cfg.evaluation.episodes, seed=cfg.evaluation.seed)

    os.makedirs(args.out, exist_ok=True)
    save_weights(os.path.join(args.out, "weights.json"), result.actor, result.critics, cfg.agent)
    dump_json(os.path.join(args.out, "training_log.json"), result.log)
    dump_json(os.path.join(args.out, "metrics.json"), metrics.as_dict())
    save_config(os.path.join(args.out, "config.yaml"), cfg)
    print(
        f"seed {args.seed}: success {metrics.success_rate * 100:.1f}%, "
        f"distance error {metrics.distance_error * 100:.1f} cm, "
        f"height error {metrics.height_error * 100:.1f} cm "
        f"({result.wall_time:.0f}s)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
