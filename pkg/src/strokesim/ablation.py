"""Train-and-compare harness for the six learner variants.

Each (variant, seed) pair is an independent deterministic training run;
all runs are scored on the same seeded evaluation suite so the
comparison is paired.  Runs can fan out over worker processes — results
do not depend on the worker count.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .agent import AgentConfig, train
from .config import ABLATION_ORDER, RunConfig, ablation_variants, build_envs
from .evaluation import Metrics, evaluate

__all__ = ["ablation_report", "train_and_score"]


def train_and_score(cfg: RunConfig, agent_cfg: AgentConfig, seed: int, verbose: bool = False) -> dict:
    """Train one variant with one seed and evaluate it on the shared suite."""
    run_cfg = replace(cfg, agent=agent_cfg)
    train_env, eval_env = build_envs(run_cfg)
    result = train(train_env, eval_env, agent_cfg, seed, eval_seed=cfg.evaluation.seed, verbose=verbose)
    metrics = evaluate(result.actor, eval_env, cfg.evaluation.episodes, seed=cfg.evaluation.seed)
    return {
        "seed": seed,
        "success_rate": metrics.success_rate,
        "distance_error_m": metrics.distance_error,
        "height_error_m": metrics.height_error,
        "mean_reward": list(metrics.mean_reward),
        "train_wall_s": result.wall_time,
    }


def _job(args: tuple) -> tuple[str, dict]:
    cfg, name, agent_cfg, seed = args
    return name, train_and_score(cfg, agent_cfg, seed)


def ablation_report(
    cfg: RunConfig,
    seeds: list[int],
    names: tuple[str, ...] = ABLATION_ORDER,
    workers: int = 1,
    verbose: bool = False,
) -> dict:
    """Comparison table over learner variants and seeds.

    Returns {"seeds": [...], "rows": [{name, per_seed, median/mean
    aggregates}, ...]} with rows in the canonical variant order.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    variants = ablation_variants(cfg.agent)
    unknown = [n for n in names if n not in variants]
    if unknown:
        raise ValueError(f"unknown variant names: {unknown}")
    jobs = [(cfg, name, variants[name], seed) for name in names for seed in seeds]

    results: dict[str, list[dict]] = {name: [] for name in names}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for name, scored in pool.map(_job, jobs):
                results[name].append(scored)
                if verbose:
                    print(f"done: {name} seed {scored['seed']} -> success {scored['success_rate']:.3f}", flush=True)
    else:
        for job in jobs:
            name, scored = _job(job)
            results[name].append(scored)
            if verbose:
                print(f"done: {name} seed {scored['seed']} -> success {scored['success_rate']:.3f}", flush=True)

    rows = []
    for name in names:
        per_seed = sorted(results[name], key=lambda r: r["seed"])
        agg = {}
        for key in ("success_rate", "distance_error_m", "height_error_m"):
            vals = [r[key] for r in per_seed]
            agg[key] = {
                "per_seed": vals,
                "median": statistics.median(vals),
                "mean": sum(vals) / len(vals),
            }
        rows.append({"name": name, "per_seed": per_seed, **agg})
    return {"seeds": list(seeds), "rows": rows}


def format_report(report: dict) -> str:
    """Human-readable table, errors in centimetres."""
    lines = [f"{'variant':<18} {'eps_d (cm)':>12} {'eps_h (cm)':>12} {'success':>9}"]
    for row in report["rows"]:
        d = row["distance_error_m"]["median"] * 100.0
        h = row["height_error_m"]["median"] * 100.0
        s = row["success_rate"]["median"] * 100.0
        lines.append(f"{row['name']:<18} {d:>12.1f} {h:>12.1f} {s:>8.1f}%")
    return "\n".join(lines)
