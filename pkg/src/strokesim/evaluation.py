"""Fixed-seed evaluation suites and the aggregate error metrics.

The headline numbers are negative-log aggregates of exponential rewards:
a suite where every return lands d metres from the target scores a
distance error of exactly d, and failed returns drag the aggregate up
by contributing zero reward.  The same construction applies to the
net-crossing height.  Everything is in metres here; presentation layers
convert to centimetres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import EpisodeOutcome, EpisodeResult
from .nets import MLP, forward

__all__ = [
    "Metrics",
    "SuiteResult",
    "distance_error",
    "evaluate",
    "height_error",
    "metrics_from_results",
    "run_suite",
]


@dataclass(frozen=True)
class Metrics:
    episodes: int
    success_rate: float
    distance_error: float  # m; +inf when every episode failed
    height_error: float  # m; +inf when every episode failed
    mean_reward: tuple[float, float, float]

    def as_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "distance_error_m": self.distance_error,
            "height_error_m": self.height_error,
            "mean_reward": list(self.mean_reward),
        }


def _neg_log_mean(values: list[float]) -> float:
    mean = sum(values) / len(values)
    return -math.log(mean) if mean > 0.0 else math.inf


def distance_error(outcomes: list[EpisodeOutcome], target: np.ndarray) -> float:
    """-ln of the mean exponential landing reward; failures contribute 0."""
    if not outcomes:
        raise ValueError("need at least one episode")
    target = np.asarray(target, dtype=float)
    vals = [
        math.exp(-math.hypot(o.landing[0] - target[0], o.landing[1] - target[1])) if o.success else 0.0
        for o in outcomes
    ]
    return _neg_log_mean(vals)


def height_error(outcomes: list[EpisodeOutcome]) -> float:
    """-ln of the mean exponential net-clearance reward; failures contribute 0."""
    if not outcomes:
        raise ValueError("need at least one episode")
    vals = [math.exp(-abs(o.net_clearance - 0.173)) if o.success else 0.0 for o in outcomes]
    return _neg_log_mean(vals)


def metrics_from_results(results: list[EpisodeResult]) -> Metrics:
    n = len(results)
    if n == 0:
        raise ValueError("need at least one episode")
    successes = sum(1 for r in results if r.success)
    eps_d = _neg_log_mean([r.distance_reward for r in results])
    eps_h = _neg_log_mean([float(r.reward_vec[2]) for r in results])
    mean_r = tuple(float(np.mean([r.reward_vec[i] for r in results])) for i in range(3))
    return Metrics(
        episodes=n,
        success_rate=successes / n,
        distance_error=eps_d,
        height_error=eps_h,
        mean_reward=mean_r,  # type: ignore[arg-type]
    )


@dataclass
class SuiteResult:
    obs: np.ndarray
    actions: np.ndarray
    results: list[EpisodeResult]


def run_suite(actor: MLP, env, episodes: int, seed: int) -> SuiteResult:
    """Play a fixed suite of episodes with the deterministic policy.

    Episode i draws its state (and measurement noise) from a generator
    keyed on (seed, i), so the suite is identical across repeated calls
    and across different policies, giving paired comparisons.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    ctxs = [env.sample_episode(np.random.default_rng((seed, 0, i))) for i in range(episodes)]
    obs = np.stack([c.obs for c in ctxs])
    actions, _ = forward(actor, obs)
    actions = np.clip(actions, -1.0, 1.0)
    results = env.play_many(ctxs, actions)
    return SuiteResult(obs=obs, actions=actions, results=results)


def evaluate(actor: MLP, env, episodes: int = 1000, seed: int = 0) -> Metrics:
    """Metrics of the deterministic policy over the seeded suite."""
    return metrics_from_results(run_suite(actor, env, episodes, seed).results)
