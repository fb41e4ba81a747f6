"""Run configuration: defaults, YAML round-trip, environment assembly.

Every physical constant, range and hyperparameter lives in one frozen
RunConfig tree whose defaults reproduce the reference setup.  A config
file only needs the keys it wants to override.  Angles cross the file
boundary in degrees and live as radians in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import yaml

from .agent import AgentConfig
from .contact import RACKET_SURFACE, TABLE_SURFACE, SurfaceParams
from .env import (
    EVAL_RANGES,
    NO_NOISE,
    TRAIN_RANGES,
    ActionBounds,
    NoiseConfig,
    StateRanges,
    StrokeEnv,
    TableGeometry,
)
from .physics import BallParams

__all__ = [
    "EvalConfig",
    "RolloutStroke",
    "RunConfig",
    "ablation_variants",
    "build_envs",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "save_config",
    "ABLATION_ORDER",
]


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 1000
    seed: int = 1_000_003
    observation_noise: bool = True

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ValueError("evaluation episodes must be >= 1")


@dataclass(frozen=True)
class RolloutStroke:
    """Fixed stroke used by the trajectory-export command (no policy)."""

    speed: float = 0.5
    beta: float = math.radians(-20.0)
    gamma: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    ball: BallParams = BallParams()
    table: TableGeometry = TableGeometry()
    table_surface: SurfaceParams = TABLE_SURFACE
    racket_surface: SurfaceParams = RACKET_SURFACE
    racket_radius: float = 0.08
    tilt_gain: float = math.radians(25.0)
    bounds: ActionBounds = ActionBounds()
    noise: NoiseConfig = NoiseConfig()
    train_ranges: StateRanges = TRAIN_RANGES
    eval_ranges: StateRanges = EVAL_RANGES
    hitting_x: float = 0.675
    target: tuple[float, float] = (2.55, 0.0)
    dt: float = 1e-3
    flight_timeout: float = 3.0
    agent: AgentConfig = AgentConfig()
    evaluation: EvalConfig = EvalConfig()
    serve_time: float = 0.25
    rollout_stroke: RolloutStroke = RolloutStroke()


def build_envs(cfg: RunConfig) -> tuple[StrokeEnv, StrokeEnv]:
    """(training env, evaluation env) sharing physics; the evaluation env
    samples from the evaluation ranges and can run noise-free."""
    common = dict(
        ball=cfg.ball,
        table=cfg.table,
        table_surface=cfg.table_surface,
        racket_surface=cfg.racket_surface,
        racket_radius=cfg.racket_radius,
        tilt_gain=cfg.tilt_gain,
        bounds=cfg.bounds,
        train_ranges=cfg.train_ranges,
        hitting_x=cfg.hitting_x,
        target=cfg.target,
        reward_k=cfg.agent.reward_k,
        dt=cfg.dt,
        flight_timeout=cfg.flight_timeout,
    )
    train_env = StrokeEnv(noise=cfg.noise, sample_ranges=cfg.train_ranges, **common)
    eval_noise = cfg.noise if cfg.evaluation.observation_noise else NO_NOISE
    eval_env = StrokeEnv(noise=eval_noise, sample_ranges=cfg.eval_ranges, **common)
    return train_env, eval_env


#: ablation variants in report order
ABLATION_ORDER = ("ddpg", "ddpg+argmax", "ddpg+argmax+3dq", "td3", "td3+argmax", "td3+argmax+3dq")


def ablation_variants(base: AgentConfig) -> dict[str, AgentConfig]:
    """The six deterministic-policy learner variants.

    DDPG rows drop the twin critics and the actor-update delay; the
    +argmax rows add candidate-search exploration; the +3dq rows switch
    to the vector-valued critic.
    """
    ddpg = replace(base, use_twin_critics=False, policy_delay=1)
    td3 = replace(base, use_twin_critics=True, policy_delay=base.policy_delay)
    return {
        "ddpg": replace(ddpg, use_argmax_exploration=False, q_dim=1),
        "ddpg+argmax": replace(ddpg, use_argmax_exploration=True, q_dim=1),
        "ddpg+argmax+3dq": replace(ddpg, use_argmax_exploration=True, q_dim=3),
        "td3": replace(td3, use_argmax_exploration=False, q_dim=1),
        "td3+argmax": replace(td3, use_argmax_exploration=True, q_dim=1),
        "td3+argmax+3dq": replace(td3, use_argmax_exploration=True, q_dim=3),
    }


# -- dict / YAML mapping -----------------------------------------------------


class ConfigError(ValueError):
    pass


def _section(d: dict, name: str, allowed: set[str]) -> dict:
    sec = d.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    return sec


def _pair(value, name: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a [lo, hi] pair")
    return (float(value[0]), float(value[1]))


def _ranges_from_dict(sec: dict, defaults: StateRanges, where: str) -> StateRanges:
    fields = {f for f, _ in defaults.items()}
    unknown = set(sec) - fields
    if unknown:
        raise ConfigError(f"unknown keys in section {where!r}: {sorted(unknown)}")
    kwargs = {name: _pair(sec[name], f"{where}.{name}") if name in sec else rng for name, rng in defaults.items()}
    return StateRanges(**kwargs)


_TOP_LEVEL = {
    "physics",
    "table",
    "contact",
    "racket",
    "action_bounds",
    "noise",
    "ranges",
    "env",
    "agent",
    "evaluation",
    "rollout",
}


def config_from_dict(data: dict) -> RunConfig:
    """Build a RunConfig from a (possibly partial) plain dict; unknown
    keys are rejected so typos fail loudly."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - _TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    base = RunConfig()

    p = _section(data, "physics", {"mass", "radius", "cavity_radius", "gravity", "drag_coeff", "lift_coeff", "air_density"})
    ball = BallParams(
        m=float(p.get("mass", base.ball.m)),
        r1=float(p.get("radius", base.ball.r1)),
        r2=float(p.get("cavity_radius", base.ball.r2)),
        g=float(p.get("gravity", base.ball.g)),
        drag_coeff=float(p.get("drag_coeff", base.ball.drag_coeff)),
        lift_coeff=float(p.get("lift_coeff", base.ball.lift_coeff)),
        air_density=float(p.get("air_density", base.ball.air_density)),
    )

    t = _section(data, "table", {"near_edge_x", "length", "width", "net_height"})
    table = TableGeometry(
        near_edge_x=float(t.get("near_edge_x", base.table.near_edge_x)),
        length=float(t.get("length", base.table.length)),
        width=float(t.get("width", base.table.width)),
        net_height=float(t.get("net_height", base.table.net_height)),
    )

    c = _section(data, "contact", {"table", "racket"})

    def _surface(sub: dict | None, dflt: SurfaceParams, where: str) -> SurfaceParams:
        if sub is None:
            return dflt
        unknown = set(sub) - {"restitution", "friction"}
        if unknown:
            raise ConfigError(f"unknown keys in section {where!r}: {sorted(unknown)}")
        return SurfaceParams(
            restitution=float(sub.get("restitution", dflt.restitution)),
            friction=float(sub.get("friction", dflt.friction)),
        )

    table_surface = _surface(c.get("table"), base.table_surface, "contact.table")
    racket_surface = _surface(c.get("racket"), base.racket_surface, "contact.racket")

    rk = _section(data, "racket", {"radius", "tilt_gain_deg"})
    racket_radius = float(rk.get("radius", base.racket_radius))
    tilt_gain = math.radians(float(rk["tilt_gain_deg"])) if "tilt_gain_deg" in rk else base.tilt_gain

    ab = _section(data, "action_bounds", {"v_min", "v_max", "angle_max_deg"})
    bounds = ActionBounds(
        v_min=float(ab.get("v_min", base.bounds.v_min)),
        v_max=float(ab.get("v_max", base.bounds.v_max)),
        angle_max=math.radians(float(ab["angle_max_deg"])) if "angle_max_deg" in ab else base.bounds.angle_max,
    )

    nz = _section(data, "noise", {"sigma_p", "sigma_v", "sigma_w"})
    noise = NoiseConfig(
        sigma_p=float(nz.get("sigma_p", base.noise.sigma_p)),
        sigma_v=float(nz.get("sigma_v", base.noise.sigma_v)),
        sigma_w=float(nz.get("sigma_w", base.noise.sigma_w)),
    )

    rg = _section(data, "ranges", {"train", "eval"})
    train_ranges = _ranges_from_dict(rg.get("train") or {}, base.train_ranges, "ranges.train")
    eval_ranges = _ranges_from_dict(rg.get("eval") or {}, base.eval_ranges, "ranges.eval")

    e = _section(data, "env", {"hitting_x", "target", "dt", "flight_timeout"})
    hitting_x = float(e.get("hitting_x", base.hitting_x))
    target = _pair(e["target"], "env.target") if "target" in e else base.target
    dt = float(e.get("dt", base.dt))
    flight_timeout = float(e.get("flight_timeout", base.flight_timeout))

    ag = _section(
        data,
        "agent",
        {
            "use_twin_critics",
            "use_argmax_exploration",
            "q_dim",
            "exploration_sigma",
            "candidates",
            "replay_capacity",
            "batch_size",
            "learning_rate",
            "episodes",
            "episodes_per_epoch",
            "policy_delay",
            "warmup_episodes",
            "updates_per_episode",
            "mirror_augmentation",
            "reward_k",
            "hidden_sizes",
            "epoch_eval_episodes",
        },
    )
    dflt = base.agent
    agent = AgentConfig(
        use_twin_critics=bool(ag.get("use_twin_critics", dflt.use_twin_critics)),
        use_argmax_exploration=bool(ag.get("use_argmax_exploration", dflt.use_argmax_exploration)),
        q_dim=int(ag.get("q_dim", dflt.q_dim)),
        exploration_sigma=float(ag.get("exploration_sigma", dflt.exploration_sigma)),
        candidates=int(ag.get("candidates", dflt.candidates)),
        replay_capacity=int(ag.get("replay_capacity", dflt.replay_capacity)),
        batch_size=int(ag.get("batch_size", dflt.batch_size)),
        learning_rate=float(ag.get("learning_rate", dflt.learning_rate)),
        episodes=int(ag.get("episodes", dflt.episodes)),
        episodes_per_epoch=int(ag.get("episodes_per_epoch", dflt.episodes_per_epoch)),
        policy_delay=int(ag.get("policy_delay", dflt.policy_delay)),
        warmup_episodes=int(ag.get("warmup_episodes", dflt.warmup_episodes)),
        updates_per_episode=int(ag.get("updates_per_episode", dflt.updates_per_episode)),
        mirror_augmentation=bool(ag.get("mirror_augmentation", dflt.mirror_augmentation)),
        reward_k=float(ag.get("reward_k", dflt.reward_k)),
        hidden_sizes=tuple(int(w) for w in ag.get("hidden_sizes", dflt.hidden_sizes)),
        epoch_eval_episodes=int(ag.get("epoch_eval_episodes", dflt.epoch_eval_episodes)),
    )

    ev = _section(data, "evaluation", {"episodes", "seed", "observation_noise"})
    evaluation = EvalConfig(
        episodes=int(ev.get("episodes", base.evaluation.episodes)),
        seed=int(ev.get("seed", base.evaluation.seed)),
        observation_noise=bool(ev.get("observation_noise", base.evaluation.observation_noise)),
    )

    ro = _section(data, "rollout", {"serve_time", "stroke"})
    serve_time = float(ro.get("serve_time", base.serve_time))
    stroke = base.rollout_stroke
    if "stroke" in ro and ro["stroke"] is not None:
        sub = ro["stroke"]
        unknown = set(sub) - {"speed", "beta_deg", "gamma_deg"}
        if unknown:
            raise ConfigError(f"unknown keys in section 'rollout.stroke': {sorted(unknown)}")
        stroke = RolloutStroke(
            speed=float(sub.get("speed", stroke.speed)),
            beta=math.radians(float(sub["beta_deg"])) if "beta_deg" in sub else stroke.beta,
            gamma=math.radians(float(sub["gamma_deg"])) if "gamma_deg" in sub else stroke.gamma,
        )

    return RunConfig(
        ball=ball,
        table=table,
        table_surface=table_surface,
        racket_surface=racket_surface,
        racket_radius=racket_radius,
        tilt_gain=tilt_gain,
        bounds=bounds,
        noise=noise,
        train_ranges=train_ranges,
        eval_ranges=eval_ranges,
        hitting_x=hitting_x,
        target=target,
        dt=dt,
        flight_timeout=flight_timeout,
        agent=agent,
        evaluation=evaluation,
        serve_time=serve_time,
        rollout_stroke=stroke,
    )


def config_to_dict(cfg: RunConfig) -> dict:
    """Full effective configuration as a plain dict (YAML-ready)."""
    ranges = lambda r: {name: [lo, hi] for name, (lo, hi) in r.items()}
    return {
        "physics": {
            "mass": cfg.ball.m,
            "radius": cfg.ball.r1,
            "cavity_radius": cfg.ball.r2,
            "gravity": cfg.ball.g,
            "drag_coeff": cfg.ball.drag_coeff,
            "lift_coeff": cfg.ball.lift_coeff,
            "air_density": cfg.ball.air_density,
        },
        "table": {
            "near_edge_x": cfg.table.near_edge_x,
            "length": cfg.table.length,
            "width": cfg.table.width,
            "net_height": cfg.table.net_height,
        },
        "contact": {
            "table": {"restitution": cfg.table_surface.restitution, "friction": cfg.table_surface.friction},
            "racket": {"restitution": cfg.racket_surface.restitution, "friction": cfg.racket_surface.friction},
        },
        "racket": {"radius": cfg.racket_radius, "tilt_gain_deg": math.degrees(cfg.tilt_gain)},
        "action_bounds": {
            "v_min": cfg.bounds.v_min,
            "v_max": cfg.bounds.v_max,
            "angle_max_deg": math.degrees(cfg.bounds.angle_max),
        },
        "noise": {"sigma_p": cfg.noise.sigma_p, "sigma_v": cfg.noise.sigma_v, "sigma_w": cfg.noise.sigma_w},
        "ranges": {"train": ranges(cfg.train_ranges), "eval": ranges(cfg.eval_ranges)},
        "env": {
            "hitting_x": cfg.hitting_x,
            "target": list(cfg.target),
            "dt": cfg.dt,
            "flight_timeout": cfg.flight_timeout,
        },
        "agent": {
            "use_twin_critics": cfg.agent.use_twin_critics,
            "use_argmax_exploration": cfg.agent.use_argmax_exploration,
            "q_dim": cfg.agent.q_dim,
            "exploration_sigma": cfg.agent.exploration_sigma,
            "candidates": cfg.agent.candidates,
            "replay_capacity": cfg.agent.replay_capacity,
            "batch_size": cfg.agent.batch_size,
            "learning_rate": cfg.agent.learning_rate,
            "episodes": cfg.agent.episodes,
            "episodes_per_epoch": cfg.agent.episodes_per_epoch,
            "policy_delay": cfg.agent.policy_delay,
            "warmup_episodes": cfg.agent.warmup_episodes,
            "updates_per_episode": cfg.agent.updates_per_episode,
            "mirror_augmentation": cfg.agent.mirror_augmentation,
            "reward_k": cfg.agent.reward_k,
            "hidden_sizes": list(cfg.agent.hidden_sizes),
            "epoch_eval_episodes": cfg.agent.epoch_eval_episodes,
        },
        "evaluation": {
            "episodes": cfg.evaluation.episodes,
            "seed": cfg.evaluation.seed,
            "observation_noise": cfg.evaluation.observation_noise,
        },
        "rollout": {
            "serve_time": cfg.serve_time,
            "stroke": {
                "speed": cfg.rollout_stroke.speed,
                "beta_deg": math.degrees(cfg.rollout_stroke.beta),
                "gamma_deg": math.degrees(cfg.rollout_stroke.gamma),
            },
        },
    }


def load_config(path: str | None) -> RunConfig:
    """RunConfig from a YAML file, or pure defaults when path is None."""
    if path is None:
        return RunConfig()
    with open(path, "r") as f:
        data = yaml.safe_load(f)
    return config_from_dict(data)


def save_config(path: str, cfg: RunConfig) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=True)
