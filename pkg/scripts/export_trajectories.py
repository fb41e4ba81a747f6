#!/usr/bin/env python3
"""Export a few full episode trajectories (serve, impact, return) as CSV,
one per spin regime, for plotting."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from strokesim.cli import main as cli_main
from strokesim.config import RunConfig, config_to_dict, save_config

import yaml

SPINS = {"flat": 0.0, "topspin": 200.0, "backspin": -200.0}


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "runs/trajectories"
    os.makedirs(out_dir, exist_ok=True)
    for name, wy in SPINS.items():
        data = config_to_dict(RunConfig())
        for dim in ("p_y", "v_y", "w_x", "w_z"):
            data["ranges"]["train"][dim] = [0.0, 0.0]
        data["ranges"]["train"]["p_z"] = [0.30, 0.30]
        data["ranges"]["train"]["v_x"] = [-4.5, -4.5]
        data["ranges"]["train"]["v_z"] = [-1.5, -1.5]
        data["ranges"]["train"]["w_y"] = [wy, wy]
        data["noise"] = {"sigma_p": 0.0, "sigma_v": 0.0, "sigma_w": 0.0}
        cfg_path = os.path.join(out_dir, f"{name}.yaml")
        with open(cfg_path, "w") as f:
            yaml.safe_dump(data, f)
        csv_path = os.path.join(out_dir, f"{name}.csv")
        rc = cli_main(["rollout", "--config", cfg_path, "--seed", "0", "--out", csv_path])
        if rc != 0:
            return rc
        print(f"{name}: {csv_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
