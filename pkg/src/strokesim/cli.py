"""Command-line entry point.

Subcommands:
  train      train a policy and write weights, log and metrics
  eval       score a weights file on the evaluation suite
  rollout    export one full episode trajectory as CSV
  calibrate  turn drop/tilt measurements into contact coefficients
  ablate     train and compare the six learner variants

All randomness is seeded through flags; rerunning a command with the
same config and seed writes byte-identical artifacts (timestamps go to
a separate run_meta.json).  Angles are degrees on the command line and
in config files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .ablation import ablation_report, format_report
from .agent import train
from .config import ConfigError, RunConfig, build_envs, config_to_dict, load_config, save_config
from .contact import estimate_friction, estimate_restitution, racket_impact
from .env import BACKWARD, MISS, HitState, StrokeEnv, synthesize_serve
from .evaluation import evaluate
from .persist import WeightsError, dump_json, load_weights, save_weights
from .physics import BallState, _refine_crossing, _rk4_scalar


class CommandError(Exception):
    """Fatal, user-facing command failure."""


def _load_config_arg(path: str | None) -> RunConfig:
    if path is not None and not os.path.exists(path):
        raise CommandError(f"config file not found: {path}")
    try:
        return load_config(path)
    except ConfigError as exc:
        raise CommandError(f"invalid config {path}: {exc}") from exc
    except Exception as exc:  # yaml parse errors etc.
        raise CommandError(f"cannot load config {path}: {exc}") from exc


def _write_meta(out_dir: str, args_desc: dict) -> None:
    meta = {"written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"), **args_desc}
    with open(os.path.join(out_dir, "run_meta.json"), "w") as f:
        json.dump(meta, f, sort_keys=True, indent=2)
        f.write("\n")


def _print_metrics(m) -> None:
    eps_d = "inf" if math.isinf(m.distance_error) else f"{m.distance_error * 100.0:.1f}"
    eps_h = "inf" if math.isinf(m.height_error) else f"{m.height_error * 100.0:.1f}"
    print(f"episodes:       {m.episodes}")
    print(f"distance error: {eps_d} cm")
    print(f"height error:   {eps_h} cm")
    print(f"success rate:   {m.success_rate * 100.0:.1f}%")


def cmd_train(args) -> int:
    cfg = _load_config_arg(args.config)
    os.makedirs(args.out, exist_ok=True)
    train_env, eval_env = build_envs(cfg)
    result = train(
        train_env, eval_env, cfg.agent, args.seed, eval_seed=cfg.evaluation.seed, verbose=not args.quiet
    )
    metrics = evaluate(result.actor, eval_env, cfg.evaluation.episodes, seed=cfg.evaluation.seed)

    save_weights(os.path.join(args.out, "weights.json"), result.actor, result.critics, cfg.agent)
    dump_json(os.path.join(args.out, "training_log.json"), result.log)
    dump_json(os.path.join(args.out, "metrics.json"), metrics.as_dict())
    save_config(os.path.join(args.out, "config.yaml"), cfg)
    _write_meta(args.out, {"command": "train", "seed": args.seed, "train_wall_s": result.wall_time})
    print(f"trained {cfg.agent.episodes} episodes in {result.wall_time:.0f}s; artifacts in {args.out}")
    _print_metrics(metrics)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config_arg(args.config)
    try:
        actor, critics, meta = load_weights(args.weights)
    except WeightsError as exc:
        raise CommandError(str(exc)) from exc
    _, eval_env = build_envs(cfg)
    expected_actor = (eval_env.obs_dim, *cfg.agent.hidden_sizes, eval_env.action_dim)
    if tuple(actor.sizes) != expected_actor:
        raise CommandError(
            f"weights/config mismatch: actor sizes {tuple(actor.sizes)} != configured {expected_actor}"
        )
    if meta.get("q_dim") != cfg.agent.q_dim or bool(meta.get("use_twin_critics")) != cfg.agent.use_twin_critics:
        raise CommandError(
            f"weights/config mismatch: weights trained with q_dim={meta.get('q_dim')}, "
            f"use_twin_critics={meta.get('use_twin_critics')}; config says "
            f"q_dim={cfg.agent.q_dim}, use_twin_critics={cfg.agent.use_twin_critics}"
        )
    episodes = args.episodes if args.episodes is not None else cfg.evaluation.episodes
    seed = args.seed if args.seed is not None else cfg.evaluation.seed
    metrics = evaluate(actor, eval_env, episodes, seed=seed)
    _print_metrics(metrics)
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.weights)), "eval_metrics.json")
    dump_json(out, {"weights": os.path.basename(args.weights), "seed": seed, **metrics.as_dict()})
    print(f"metrics written to {out}")
    return 0


def _sample_serveable_hit(env: StrokeEnv, cfg: RunConfig, seed: int) -> tuple[HitState, BallState]:
    """First seeded hitting state whose pre-hit segment stays airborne."""
    for attempt in range(1000):
        rng = np.random.default_rng((seed, 4, attempt))
        hit = env.sample_hit_state(rng)
        try:
            serve = synthesize_serve(hit, cfg.ball, T=cfg.serve_time, dt=cfg.dt)
        except ValueError:
            continue
        return hit, serve
    raise CommandError("could not find a serveable hitting state (serve_time too long?)")


def cmd_rollout(args) -> int:
    cfg = _load_config_arg(args.config)
    env, _ = build_envs(cfg)
    hit, serve = _sample_serveable_hit(env, cfg, args.seed)

    stroke = np.array([cfg.rollout_stroke.speed, cfg.rollout_stroke.beta, cfg.rollout_stroke.gamma])
    racket = env.racket_from_action(stroke, hit.p)

    dt = cfg.dt
    kd, km, g = cfg.ball.accel_coeffs()
    rows: list[tuple] = []

    def add_row(k: int, p, v, w) -> None:
        rows.append((f"{k * dt:.6f}", *p, *v, *w))

    # serve segment: forward from the synthesized start up to the hit
    n_serve = round(cfg.serve_time / dt)
    cur = (*serve.p, *serve.v)
    w = tuple(serve.w)
    for k in range(n_serve):
        add_row(k, cur[:3], cur[3:], w)
        cur = _rk4_scalar(*cur, *w, kd, km, g, dt)

    # impact at the hitting instant; the racket strikes wherever the serve
    # segment actually arrives (within integration tolerance of the plane)
    ball_at_hit = BallState(0.0, np.array(cur[:3]), np.array(cur[3:]), np.array(w))
    struck, was_hit = racket_impact(ball_at_hit, racket, cfg.racket_surface, cfg.ball)
    if not was_hit:
        raise CommandError("configured stroke misses the ball; adjust rollout.stroke")
    cur = (*struck.p, *struck.v)
    w = tuple(struck.w)

    # return segment until the ball reaches the table surface
    k = n_serve
    max_steps = n_serve + int(cfg.flight_timeout / dt)
    while k <= max_steps:
        add_row(k, cur[:3], cur[3:], w)
        nxt = _rk4_scalar(*cur, *w, kd, km, g, dt)
        if cur[2] > 0.0 and nxt[2] <= 0.0:
            break
        cur = nxt
        k += 1

    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    try:
        with open(args.out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "px", "py", "pz", "vx", "vy", "vz", "wx", "wy", "wz"])
            for row in rows:
                writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
    except OSError as exc:
        raise CommandError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_calibrate(args) -> int:
    try:
        kappa = estimate_restitution(args.h1, args.h2)
    except ValueError as exc:
        raise CommandError(str(exc)) from exc
    print(f"restitution: {kappa:.6g}")
    if args.theta is not None:
        try:
            mu = estimate_friction(math.radians(args.theta))
        except ValueError as exc:
            raise CommandError(str(exc)) from exc
        print(f"friction:    {mu:.6g}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config_arg(args.config)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise CommandError(f"bad --seeds list {args.seeds!r}: {exc}") from exc
    if not seeds:
        raise CommandError("need at least one seed")
    os.makedirs(args.out, exist_ok=True)
    report = ablation_report(cfg, seeds, workers=args.workers, verbose=not args.quiet)
    dump_json(os.path.join(args.out, "ablation.json"), report)
    save_config(os.path.join(args.out, "config.yaml"), cfg)
    _write_meta(args.out, {"command": "ablate", "seeds": seeds})
    print(format_report(report))
    print(f"report written to {os.path.join(args.out, 'ablation.json')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strokesim", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"strokesim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a stroke policy")
    p.add_argument("--config", default=None, help="YAML config (defaults used when omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a weights file")
    p.add_argument("--weights", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="metrics JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout", help="export one episode trajectory as CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("calibrate", help="contact coefficients from measurements")
    p.add_argument("--h1", type=float, required=True, help="release height (m)")
    p.add_argument("--h2", type=float, required=True, help="rebound height (m)")
    p.add_argument("--theta", type=float, default=None, help="slide tilt angle (deg)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("ablate", help="train and compare the learner variants")
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", required=True, help="comma-separated seed list")
    p.add_argument("--out", default="ablation", help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
