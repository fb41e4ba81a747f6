"""Single-step stroke environment.

One episode: a serve arrives at the fixed hitting plane, the agent picks
a racket stroke (forward speed plus two face angles), the impact and the
return flight are simulated, and the landing decides the outcome.  The
agent observes the hitting state through Gaussian measurement noise; the
racket is centred on the noisy position, so bad measurements can cause
clean misses.

The reward for a successful return has three components in [0, 1]:
closeness of the landing point to the target in x and in y, and
closeness of the net-crossing height to the net top.  Any failure earns
the zero vector.  A scalar variant folds landing distance and clearance
into a single exponential for learners with one-dimensional critics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .contact import RACKET_SURFACE, TABLE_SURFACE, RacketState, SurfaceParams, racket_impact
from .physics import (
    BallParams,
    BallState,
    _refine_crossing,
    _rk4_batch,
    _rk4_scalar,
    back_integrate,
)

__all__ = [
    "ActionBounds",
    "EpisodeOutcome",
    "EpisodeResult",
    "EVAL_RANGES",
    "HitState",
    "NoiseConfig",
    "StateRanges",
    "StrokeContext",
    "StrokeEnv",
    "TableGeometry",
    "TRAIN_RANGES",
    "reward",
    "reward_1d",
    "scale_action",
    "synthesize_serve",
    "unscale_action",
]

# failure reasons
MISS = "miss"
INTO_NET = "into_net"
OWN_SIDE = "own_side"
OFF_TABLE = "off_table"
BACKWARD = "backward"
TIMEOUT = "timeout"
FAILURE_REASONS = frozenset({MISS, INTO_NET, OWN_SIDE, OFF_TABLE, BACKWARD, TIMEOUT})

_EDGE_TOL = 1e-9  # landing exactly on an edge counts as on the table


@dataclass(frozen=True)
class TableGeometry:
    """Standard table in the world frame: surface at z = 0, near edge at
    near_edge_x, extending towards +x, centred on y = 0."""

    near_edge_x: float = 0.80
    length: float = 2.74
    width: float = 1.525
    net_height: float = 0.173

    @property
    def net_x(self) -> float:
        return self.near_edge_x + 0.5 * self.length

    @property
    def far_edge_x(self) -> float:
        return self.near_edge_x + self.length


@dataclass(frozen=True)
class NoiseConfig:
    """Std deviations of the Gaussian measurement noise per state group."""

    sigma_p: float = 0.005
    sigma_v: float = 0.1
    sigma_w: float = 5.0

    def __post_init__(self) -> None:
        if min(self.sigma_p, self.sigma_v, self.sigma_w) < 0.0:
            raise ValueError("noise std deviations must be non-negative")


NO_NOISE = NoiseConfig(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class StateRanges:
    """Per-dimension (lo, hi) sampling bounds of the hitting state."""

    p_y: tuple[float, float]
    p_z: tuple[float, float]
    v_x: tuple[float, float]
    v_y: tuple[float, float]
    v_z: tuple[float, float]
    w_x: tuple[float, float]
    w_y: tuple[float, float]
    w_z: tuple[float, float]

    def __post_init__(self) -> None:
        for name, (lo, hi) in self.items():
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"range {name} must be finite")
            if lo > hi:
                raise ValueError(f"inverted range {name}: ({lo}, {hi})")

    def items(self) -> list[tuple[str, tuple[float, float]]]:
        return [(f.name, getattr(self, f.name)) for f in self.__dataclass_fields__.values()]


TRAIN_RANGES = StateRanges(
    p_y=(-0.60, 0.63),
    p_z=(-0.01, 0.34),
    v_x=(-6.00, -1.35),
    v_y=(-1.95, 2.16),
    v_z=(-3.47, 3.15),
    w_x=(-127.67, 110.88),
    w_y=(-299.99, 299.81),
    w_z=(-193.81, 189.65),
)

EVAL_RANGES = StateRanges(
    p_y=(-0.68, 0.68),
    p_z=(-0.01, 0.34),
    v_x=(-5.94, -2.52),
    v_y=(-1.29, 2.02),
    v_z=(-3.40, 2.60),
    w_x=(-95.08, 111.53),
    w_y=(-299.62, 299.73),
    w_z=(-189.05, 189.47),
)


@dataclass(frozen=True)
class ActionBounds:
    """Physical stroke limits: forward blade speed and the two face angles."""

    v_min: float = 0.0
    v_max: float = 2.0
    angle_max: float = math.radians(50.0)


def scale_action(a: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    """Map a normalised action in [-1, 1]^3 to (speed, beta, gamma)."""
    a = np.asarray(a, dtype=float)
    v = bounds.v_min + (a[0] + 1.0) * 0.5 * (bounds.v_max - bounds.v_min)
    return np.array([v, a[1] * bounds.angle_max, a[2] * bounds.angle_max])


def unscale_action(phys: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    """Inverse of scale_action."""
    phys = np.asarray(phys, dtype=float)
    a0 = 2.0 * (phys[0] - bounds.v_min) / (bounds.v_max - bounds.v_min) - 1.0
    return np.array([a0, phys[1] / bounds.angle_max, phys[2] / bounds.angle_max])


@dataclass
class HitState:
    """True ball state at the hitting plane plus the landing target."""

    p: np.ndarray
    v: np.ndarray
    w: np.ndarray
    target: np.ndarray

    def __post_init__(self) -> None:
        self.p = np.array(self.p, dtype=float)
        self.v = np.array(self.v, dtype=float)
        self.w = np.array(self.w, dtype=float)
        self.target = np.array(self.target, dtype=float)


@dataclass(eq=False)
class EpisodeOutcome:
    """Result of one stroke.  landing and net_clearance are set exactly
    when the return succeeded; otherwise failure_reason says why not."""

    success: bool
    landing: np.ndarray | None = None
    net_clearance: float | None = None
    failure_reason: str | None = None

    def __post_init__(self) -> None:
        if self.success:
            if self.failure_reason is not None or self.landing is None or self.net_clearance is None:
                raise ValueError("successful outcome must carry landing and clearance only")
            self.landing = np.array(self.landing, dtype=float)
        else:
            if self.failure_reason not in FAILURE_REASONS:
                raise ValueError(f"unknown failure reason: {self.failure_reason!r}")
            if self.landing is not None or self.net_clearance is not None:
                raise ValueError("failed outcome must not carry landing or clearance")

    @staticmethod
    def fail(reason: str) -> "EpisodeOutcome":
        return EpisodeOutcome(success=False, failure_reason=reason)

    @staticmethod
    def returned(x: float, y: float, clearance: float) -> "EpisodeOutcome":
        return EpisodeOutcome(success=True, landing=np.array([x, y]), net_clearance=clearance)


def reward(outcome: EpisodeOutcome, target: np.ndarray) -> np.ndarray:
    """Three-component shaped reward, each in [0, 1]; zeros on failure."""
    if not outcome.success:
        return np.zeros(3)
    dx = abs(outcome.landing[0] - target[0])
    dy = abs(outcome.landing[1] - target[1])
    dh = abs(outcome.net_clearance - 0.173)
    return np.array([math.exp(-dx), math.exp(-dy), math.exp(-dh)])


def reward_1d(outcome: EpisodeOutcome, target: np.ndarray, k: float = 0.5) -> float:
    """Scalar reward exp(-k * (landing distance - |clearance error|)); 0 on failure.

    The clearance error is subtracted, not added: a return that only just
    grazes the net top scores slightly higher than a high lob at equal
    landing distance.
    """
    if k <= 0.0:
        raise ValueError("k must be positive")
    if not outcome.success:
        return 0.0
    dist = math.hypot(outcome.landing[0] - target[0], outcome.landing[1] - target[1])
    return math.exp(-k * (dist - abs(outcome.net_clearance - 0.173)))


@dataclass
class StrokeContext:
    """Everything one episode needs: the true hit, the noisy measurement
    (used both for the observation and to place the racket), and the
    normalised observation."""

    hit: HitState
    measured: HitState
    obs: np.ndarray

    @property
    def measured_p(self) -> np.ndarray:
        return self.measured.p


@dataclass
class EpisodeResult:
    success: bool
    reward_vec: np.ndarray
    reward_1d: float
    distance_reward: float  # exp(-|landing - target|_2), 0 on failure
    outcome: EpisodeOutcome | None  # None for envs without a physical outcome


class StrokeEnv:
    """Stroke environment over a fixed physical setup.

    `sample_ranges` picks the hitting-state distribution (training or
    evaluation); normalisation always uses the training ranges so both
    phases share one observation scale.  Instances are immutable after
    construction and episode playout is pure, so one env can serve any
    number of concurrent rollouts.
    """

    obs_dim = 11
    action_dim = 3

    def __init__(
        self,
        ball: BallParams = BallParams(),
        table: TableGeometry = TableGeometry(),
        table_surface: SurfaceParams = TABLE_SURFACE,
        racket_surface: SurfaceParams = RACKET_SURFACE,
        racket_radius: float = 0.08,
        tilt_gain: float = math.radians(25.0),
        bounds: ActionBounds = ActionBounds(),
        noise: NoiseConfig = NoiseConfig(),
        train_ranges: StateRanges = TRAIN_RANGES,
        sample_ranges: StateRanges | None = None,
        hitting_x: float = 0.675,
        target: tuple[float, float] = (2.55, 0.0),
        reward_k: float = 0.5,
        dt: float = 1e-3,
        flight_timeout: float = 3.0,
    ):
        if dt <= 0.0 or flight_timeout <= 0.0:
            raise ValueError("dt and flight_timeout must be positive")
        self.ball = ball
        self.table = table
        self.table_surface = table_surface
        self.racket_surface = racket_surface
        self.racket_radius = float(racket_radius)
        self.tilt_gain = float(tilt_gain)
        self.bounds = bounds
        self.noise = noise
        self.train_ranges = train_ranges
        self.sample_ranges = sample_ranges if sample_ranges is not None else train_ranges
        self.hitting_x = float(hitting_x)
        self.target = np.array(target, dtype=float)
        self.reward_k = float(reward_k)
        self.dt = float(dt)
        self.flight_timeout = float(flight_timeout)
        self._norm_lo, self._norm_hi = self._normalization_bounds()

    def with_ranges(self, ranges: StateRanges) -> "StrokeEnv":
        """Copy of this env sampling from different ranges (same physics)."""
        return StrokeEnv(
            ball=self.ball,
            table=self.table,
            table_surface=self.table_surface,
            racket_surface=self.racket_surface,
            racket_radius=self.racket_radius,
            tilt_gain=self.tilt_gain,
            bounds=self.bounds,
            noise=self.noise,
            train_ranges=self.train_ranges,
            sample_ranges=ranges,
            hitting_x=self.hitting_x,
            target=tuple(self.target),
            reward_k=self.reward_k,
            dt=self.dt,
            flight_timeout=self.flight_timeout,
        )

    # -- observation ---------------------------------------------------------

    def _normalization_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.train_ranges
        rows = [
            (self.target[0], self.target[0]),
            (self.target[1], self.target[1]),
            (self.hitting_x, self.hitting_x),
            r.p_y,
            r.p_z,
            r.v_x,
            r.v_y,
            r.v_z,
            r.w_x,
            r.w_y,
            r.w_z,
        ]
        lo = np.array([a for a, _ in rows])
        hi = np.array([b for _, b in rows])
        return lo, hi

    def sample_hit_state(self, rng: np.random.Generator, ranges: StateRanges | None = None) -> HitState:
        """Draw a hitting state uniformly per dimension on the hitting plane."""
        r = ranges if ranges is not None else self.sample_ranges
        draws = [rng.uniform(lo, hi) for _, (lo, hi) in r.items()]
        p_y, p_z, v_x, v_y, v_z, w_x, w_y, w_z = draws
        return HitState(
            p=np.array([self.hitting_x, p_y, p_z]),
            v=np.array([v_x, v_y, v_z]),
            w=np.array([w_x, w_y, w_z]),
            target=self.target.copy(),
        )

    def perturb(self, hit: HitState, rng: np.random.Generator) -> HitState:
        """Hitting state as the measurement pipeline would report it."""
        return HitState(
            p=hit.p + rng.normal(0.0, self.noise.sigma_p, 3),
            v=hit.v + rng.normal(0.0, self.noise.sigma_v, 3),
            w=hit.w + rng.normal(0.0, self.noise.sigma_w, 3),
            target=hit.target.copy(),
        )

    def normalize(self, hit: HitState) -> np.ndarray:
        """11-D observation in [-1, 1]: (target, position, velocity, spin),
        affinely rescaled per dimension and clamped.  Dimensions whose
        training range is a single point map to 0."""
        raw = np.concatenate([hit.target, hit.p, hit.v, hit.w])
        span = self._norm_hi - self._norm_lo
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = 2.0 * (raw - self._norm_lo) / span - 1.0
        scaled = np.where(span > 0.0, scaled, 0.0)
        return np.clip(scaled, -1.0, 1.0)

    def observe(self, hit: HitState, rng: np.random.Generator) -> np.ndarray:
        return self.normalize(self.perturb(hit, rng))

    # -- stroke --------------------------------------------------------------

    def racket_from_action(self, action_phys: np.ndarray, predicted_p: np.ndarray) -> RacketState:
        """Racket pose for a physical action, centred on the predicted hit.

        The roll angle alpha is not learned; it tracks the lateral hitting
        position so strokes near the table edges angle inwards.
        """
        v, beta, gamma = (float(x) for x in action_phys)
        alpha = self.tilt_gain * (float(predicted_p[1]) / (0.5 * self.table.width))
        return RacketState(
            center=np.array(predicted_p, dtype=float),
            angles=(alpha, beta, gamma),
            vel=np.array([v, 0.0, 0.0]),
            radius=self.racket_radius,
        )

    def rollout(self, hit: HitState, racket: RacketState) -> EpisodeOutcome:
        """Simulate one stroke: impact (or miss) then the full return flight."""
        state = BallState(0.0, hit.p, hit.v, hit.w)
        struck, was_hit = racket_impact(state, racket, self.racket_surface, self.ball)
        if not was_hit:
            return EpisodeOutcome.fail(MISS)
        if struck.v[0] <= 0.0:
            return EpisodeOutcome.fail(BACKWARD)
        return self._fly_return(struck)

    def _classify_landing(self, x: float, y: float, clearance: float | None) -> EpisodeOutcome:
        table = self.table
        if clearance is None or x < table.net_x - _EDGE_TOL:
            return EpisodeOutcome.fail(OWN_SIDE)
        if x <= table.far_edge_x + _EDGE_TOL and abs(y) <= 0.5 * table.width + _EDGE_TOL:
            return EpisodeOutcome.returned(x, y, clearance)
        return EpisodeOutcome.fail(OFF_TABLE)

    def _fly_return(self, state: BallState) -> EpisodeOutcome:
        """Integrate the return flight, watching two events: the height at
        the first net-plane crossing, and the first downward z=0 crossing
        (the landing).  Both are refined on the bracketing step."""
        coeffs = self.ball.accel_coeffs()
        kd, km, g = coeffs
        w = state.w
        wx, wy, wz = w
        net_x = self.table.net_x
        dt = self.dt
        timeout = self.flight_timeout
        clearance: float | None = None
        cur = (*state.p, *state.v)
        t = 0.0
        while t < timeout:
            h = min(dt, timeout - t)
            nxt = _rk4_scalar(*cur, wx, wy, wz, kd, km, g, h)
            landed = cur[2] > 0.0 and nxt[2] <= 0.0
            crossing_net = clearance is None and cur[0] < net_x and nxt[0] >= net_x
            if landed or crossing_net:
                tau_land = math.inf
                if landed:
                    tau_land, st_land = _refine_crossing(cur, w, 2, 0.0, h, coeffs)
                if crossing_net:
                    tau_net, st_net = _refine_crossing(cur, w, 0, net_x, h, coeffs)
                    if tau_net <= tau_land:
                        clearance = st_net[2]
                        if clearance < self.table.net_height:
                            return EpisodeOutcome.fail(INTO_NET)
                if landed:
                    return self._classify_landing(st_land[0], st_land[1], clearance)
            cur = nxt
            t += h
        return EpisodeOutcome.fail(TIMEOUT)

    # -- protocol used by the learner -----------------------------------------

    def sample_episode(self, rng: np.random.Generator) -> StrokeContext:
        hit = self.sample_hit_state(rng)
        measured = self.perturb(hit, rng)
        return StrokeContext(hit=hit, measured=measured, obs=self.normalize(measured))

    def mirror_transition(self, ctx: StrokeContext, a01: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
        """The lateral mirror image of a played transition.

        The setup is symmetric across the y = 0 plane when the target sits
        on it: mirroring the measured state (y-position, y-velocity, and
        the axial spin components flip) and negating the yaw action yields
        an equally likely episode that earns the identical reward.  Returns
        (mirrored_obs, mirrored_action), or None when the target breaks
        the symmetry.
        """
        if ctx.hit.target[1] != 0.0:
            return None
        m = ctx.measured
        mirrored = HitState(
            p=np.array([m.p[0], -m.p[1], m.p[2]]),
            v=np.array([m.v[0], -m.v[1], m.v[2]]),
            w=np.array([-m.w[0], m.w[1], -m.w[2]]),
            target=m.target.copy(),
        )
        a01 = np.asarray(a01, dtype=float)
        return self.normalize(mirrored), np.array([a01[0], a01[1], -a01[2]])

    def play(self, ctx: StrokeContext, a01: np.ndarray) -> EpisodeResult:
        a01 = np.clip(np.asarray(a01, dtype=float), -1.0, 1.0)
        racket = self.racket_from_action(scale_action(a01, self.bounds), ctx.measured_p)
        outcome = self.rollout(ctx.hit, racket)
        return self._result_from_outcome(outcome, ctx.hit.target)

    def _result_from_outcome(self, outcome: EpisodeOutcome, target: np.ndarray) -> EpisodeResult:
        r_vec = reward(outcome, target)
        r_1d = reward_1d(outcome, target, self.reward_k)
        if outcome.success:
            dist = math.hypot(outcome.landing[0] - target[0], outcome.landing[1] - target[1])
            r_d = math.exp(-dist)
        else:
            r_d = 0.0
        return EpisodeResult(outcome.success, r_vec, r_1d, r_d, outcome)

    def play_many(self, ctxs: list[StrokeContext], A01: np.ndarray) -> list[EpisodeResult]:
        """Vectorised playout of many independent episodes (same dynamics as
        play(), batched over trajectories)."""
        n = len(ctxs)
        A01 = np.clip(np.asarray(A01, dtype=float), -1.0, 1.0)
        if A01.shape != (n, 3):
            raise ValueError(f"expected actions of shape ({n}, 3), got {A01.shape}")
        p = np.stack([c.hit.p for c in ctxs])
        v = np.stack([c.hit.v for c in ctxs])
        w = np.stack([c.hit.w for c in ctxs])
        centers = np.stack([c.measured.p for c in ctxs])
        speed = self.bounds.v_min + (A01[:, 0] + 1.0) * 0.5 * (self.bounds.v_max - self.bounds.v_min)
        beta = A01[:, 1] * self.bounds.angle_max
        gamma = A01[:, 2] * self.bounds.angle_max
        outcomes = self._rollout_batch(p, v, w, centers, speed, beta, gamma)
        return [self._result_from_outcome(o, c.hit.target) for o, c in zip(outcomes, ctxs)]

    def _rollout_batch(self, p, v, w, centers, speed, beta, gamma) -> list[EpisodeOutcome]:
        n = p.shape[0]
        ball = self.ball
        surf = self.racket_surface

        # racket face normals; the roll angle drops out of the face normal
        cb, sb = np.cos(beta), np.sin(beta)
        cg, sg = np.cos(gamma), np.sin(gamma)
        normals = np.stack([-cb * cg, -cb * sg, sb], axis=1)

        d = p - centers
        d_t = d - (d * normals).sum(axis=1, keepdims=True) * normals
        offset = np.sqrt((d_t * d_t).sum(axis=1))
        vels = np.zeros((n, 3))
        vels[:, 0] = speed

        v_rel = v - vels
        vn = (v_rel * normals).sum(axis=1)
        flip = vn > 0.0
        normals[flip] = -normals[flip]
        vn = np.where(flip, -vn, vn)
        missed = (offset > self.racket_radius) | (vn == 0.0)

        kappa = surf.restitution
        m, r1, inertia = ball.m, ball.r1, ball.inertia
        jn = m * (1.0 + kappa) * (-vn)
        v_out = v - ((1.0 + kappa) * vn)[:, None] * normals
        u = (v_rel - vn[:, None] * normals) + np.cross(w, -r1 * normals)
        u -= (u * normals).sum(axis=1, keepdims=True) * normals
        slip = np.sqrt((u * u).sum(axis=1))
        w_out = w.copy()
        sliding = slip > 0.0
        if sliding.any():
            m_eff = 1.0 / (1.0 / m + r1 * r1 / inertia)
            jt = np.minimum(surf.friction * jn[sliding], m_eff * slip[sliding])
            u_hat = u[sliding] / slip[sliding][:, None]
            v_out[sliding] -= (jt / m)[:, None] * u_hat
            w_out[sliding] += (r1 * jt / inertia)[:, None] * np.cross(normals[sliding], u_hat)

        outcomes: list[EpisodeOutcome | None] = [None] * n
        for i in np.flatnonzero(missed):
            outcomes[i] = EpisodeOutcome.fail(MISS)
        backward = (~missed) & (v_out[:, 0] <= 0.0)
        for i in np.flatnonzero(backward):
            outcomes[i] = EpisodeOutcome.fail(BACKWARD)

        flying = ~(missed | backward)
        self._fly_return_batch(p, v_out, w_out, flying, outcomes)
        return outcomes  # type: ignore[return-value]

    def _fly_return_batch(self, p, v, w, flying, outcomes) -> None:
        coeffs = self.ball.accel_coeffs()
        kd, km, g = coeffs
        net_x = self.table.net_x
        net_height = self.table.net_height
        dt = self.dt
        timeout = self.flight_timeout

        idx = np.flatnonzero(flying)
        p_a = p[idx].copy()
        v_a = v[idx].copy()
        w_a = w[idx].copy()
        clearance = [None] * len(outcomes)
        t = 0.0
        while idx.size > 0 and t < timeout:
            h = min(dt, timeout - t)
            p_n, v_n = _rk4_batch(p_a, v_a, w_a, kd, km, g, h)
            landed = (p_a[:, 2] > 0.0) & (p_n[:, 2] <= 0.0)
            crossing = (p_a[:, 0] < net_x) & (p_n[:, 0] >= net_x)
            done_rows = np.zeros(idx.size, dtype=bool)
            if landed.any() or crossing.any():
                for row in np.flatnonzero(landed | crossing):
                    k = idx[row]
                    cur = (*p_a[row], *v_a[row])
                    w_row = w_a[row]
                    tau_land = math.inf
                    if landed[row]:
                        tau_land, st_land = _refine_crossing(cur, w_row, 2, 0.0, h, coeffs)
                    if crossing[row] and clearance[k] is None:
                        tau_net, st_net = _refine_crossing(cur, w_row, 0, net_x, h, coeffs)
                        if tau_net <= tau_land:
                            clearance[k] = st_net[2]
                            if clearance[k] < net_height:
                                outcomes[k] = EpisodeOutcome.fail(INTO_NET)
                                done_rows[row] = True
                    if landed[row] and not done_rows[row]:
                        outcomes[k] = self._classify_landing(st_land[0], st_land[1], clearance[k])
                        done_rows[row] = True
            if done_rows.any():
                keep = ~done_rows
                idx = idx[keep]
                p_a = p_n[keep]
                v_a = v_n[keep]
                w_a = w_a[keep]
            else:
                p_a, v_a = p_n, v_n
            t += h
        for k in idx:
            outcomes[k] = EpisodeOutcome.fail(TIMEOUT)


def synthesize_serve(hit: HitState, ball: BallParams, T: float = 0.25, dt: float = 1e-3) -> BallState:
    """In-flight serve state T seconds before the hit, by backwards
    integration.  Rejects hits whose pre-history would dip below the
    table surface (those would involve a bounce)."""
    state = BallState(0.0, hit.p, hit.v, hit.w)
    return back_integrate(state, ball, T, dt)
