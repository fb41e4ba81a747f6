"""Free flight of a spinning table-tennis ball.

The ball is a thin spherical shell flying under gravity, quadratic air
drag and the Magnus (lift) force:

    F_g = (0, 0, -m*g)
    F_d = -1/2 * C_D * rho_a * A * |v| * v
    F_m =  1/2 * C_M * rho_a * A * r1 * (w x v)

Spin is constant during flight (no aerodynamic torque is modelled).
Trajectories are integrated with a fixed-step classical RK4 scheme;
plane crossings are refined by bisection on the bracketing step.

All quantities are SI, angles in radians.  Every function here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BallParams",
    "BallState",
    "aero_accel",
    "back_integrate",
    "ball_inertia",
    "integrate_to_plane",
    "kinetic_energy",
    "step",
]

PLANE_TOLERANCE = 1e-6  # m, crossing refinement target
_MAX_BISECT = 40


def ball_inertia(m: float, r1: float, r2: float) -> float:
    """Moment of inertia of a spherical shell (outer radius r1, cavity r2).

    I = (2/5) * m * (r1^5 - r2^5) / (r1^3 - r2^3).  r2 = 0 gives the
    solid-sphere value (2/5) m r1^2.
    """
    if m < 0.0:
        raise ValueError(f"mass must be non-negative, got {m}")
    if r1 <= 0.0 or r2 < 0.0 or r2 >= r1:
        raise ValueError(f"need 0 <= r2 < r1, got r1={r1}, r2={r2}")
    return 0.4 * m * (r1**5 - r2**5) / (r1**3 - r2**3)


@dataclass(frozen=True)
class BallParams:
    """Physical constants of the ball and the air.

    Defaults are for a standard 40 mm celluloid ball: 2.7 g shell with a
    19.6 mm cavity, C_D = 0.4, C_M = 0.6, air density 1.29 kg/m^3.
    """

    m: float = 2.7e-3
    r1: float = 0.02
    r2: float = 0.0196
    g: float = 9.81
    drag_coeff: float = 0.4
    lift_coeff: float = 0.6
    air_density: float = 1.29

    def __post_init__(self) -> None:
        if self.m <= 0.0:
            raise ValueError("ball mass must be positive")
        if not 0.0 < self.r2 < self.r1:
            raise ValueError("need 0 < r2 < r1")
        if self.g < 0.0 or self.drag_coeff < 0.0 or self.lift_coeff < 0.0:
            raise ValueError("g and aerodynamic coefficients must be non-negative")
        if self.air_density < 0.0:
            raise ValueError("air density must be non-negative")

    @property
    def area(self) -> float:
        """Cross-section pi*r1^2."""
        return math.pi * self.r1 * self.r1

    @property
    def inertia(self) -> float:
        return ball_inertia(self.m, self.r1, self.r2)

    def accel_coeffs(self) -> tuple[float, float, float]:
        """(drag, magnus, gravity) acceleration coefficients.

        accel = -kd*|v|*v + km*(w x v) - g*ez  with the returned (kd, km, g).
        """
        kd = 0.5 * self.drag_coeff * self.air_density * self.area / self.m
        km = 0.5 * self.lift_coeff * self.air_density * self.area * self.r1 / self.m
        return kd, km, self.g


@dataclass
class BallState:
    """Ball kinematics at one instant: time, position, velocity, spin."""

    t: float
    p: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        self.p = np.array(self.p, dtype=float)
        self.v = np.array(self.v, dtype=float)
        self.w = np.array(self.w, dtype=float)
        for name, vec in (("p", self.p), ("v", self.v), ("w", self.w)):
            if vec.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector, got shape {vec.shape}")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} has non-finite components: {vec}")

    def copy(self) -> "BallState":
        return BallState(self.t, self.p.copy(), self.v.copy(), self.w.copy())


def kinetic_energy(state: BallState, params: BallParams) -> float:
    """Translational plus rotational kinetic energy."""
    v2 = float(state.v @ state.v)
    w2 = float(state.w @ state.w)
    return 0.5 * params.m * v2 + 0.5 * params.inertia * w2


# -- scalar core -------------------------------------------------------------
#
# The single-trajectory integrator runs on plain floats: episode rollouts
# call it thousands of times per flight and numpy overhead on 3-vectors
# dominates otherwise.  _rk4_batch mirrors the exact same operations on
# (..., 3) arrays for vectorised evaluation; keep the two in lockstep.


def _accel_scalar(vx, vy, vz, wx, wy, wz, kd, km, g):
    s = math.sqrt((vx * vx + vy * vy) + vz * vz)
    ax = km * (wy * vz - wz * vy) - kd * s * vx
    ay = km * (wz * vx - wx * vz) - kd * s * vy
    az = (km * (wx * vy - wy * vx) - kd * s * vz) - g
    return ax, ay, az


def _rk4_scalar(px, py, pz, vx, vy, vz, wx, wy, wz, kd, km, g, dt):
    h = dt * 0.5
    a1x, a1y, a1z = _accel_scalar(vx, vy, vz, wx, wy, wz, kd, km, g)
    v2x = vx + h * a1x
    v2y = vy + h * a1y
    v2z = vz + h * a1z
    a2x, a2y, a2z = _accel_scalar(v2x, v2y, v2z, wx, wy, wz, kd, km, g)
    v3x = vx + h * a2x
    v3y = vy + h * a2y
    v3z = vz + h * a2z
    a3x, a3y, a3z = _accel_scalar(v3x, v3y, v3z, wx, wy, wz, kd, km, g)
    v4x = vx + dt * a3x
    v4y = vy + dt * a3y
    v4z = vz + dt * a3z
    a4x, a4y, a4z = _accel_scalar(v4x, v4y, v4z, wx, wy, wz, kd, km, g)
    s = dt / 6.0
    return (
        px + s * (vx + 2.0 * (v2x + v3x) + v4x),
        py + s * (vy + 2.0 * (v2y + v3y) + v4y),
        pz + s * (vz + 2.0 * (v2z + v3z) + v4z),
        vx + s * (a1x + 2.0 * (a2x + a3x) + a4x),
        vy + s * (a1y + 2.0 * (a2y + a3y) + a4y),
        vz + s * (a1z + 2.0 * (a2z + a3z) + a4z),
    )


def _accel_batch(v, w, kd, km, g):
    s = np.sqrt((v[..., 0] * v[..., 0] + v[..., 1] * v[..., 1]) + v[..., 2] * v[..., 2])
    a = np.empty_like(v)
    a[..., 0] = km * (w[..., 1] * v[..., 2] - w[..., 2] * v[..., 1]) - kd * s * v[..., 0]
    a[..., 1] = km * (w[..., 2] * v[..., 0] - w[..., 0] * v[..., 2]) - kd * s * v[..., 1]
    a[..., 2] = (km * (w[..., 0] * v[..., 1] - w[..., 1] * v[..., 0]) - kd * s * v[..., 2]) - g
    return a


def _rk4_batch(p, v, w, kd, km, g, dt):
    h = dt * 0.5
    a1 = _accel_batch(v, w, kd, km, g)
    v2 = v + h * a1
    a2 = _accel_batch(v2, w, kd, km, g)
    v3 = v + h * a2
    a3 = _accel_batch(v3, w, kd, km, g)
    v4 = v + dt * a3
    a4 = _accel_batch(v4, w, kd, km, g)
    s = dt / 6.0
    p_new = p + s * (v + 2.0 * (v2 + v3) + v4)
    v_new = v + s * (a1 + 2.0 * (a2 + a3) + a4)
    return p_new, v_new


# -- public operations -------------------------------------------------------


def aero_accel(state: BallState, params: BallParams) -> np.ndarray:
    """Total acceleration (gravity + drag + Magnus) at the given state."""
    kd, km, g = params.accel_coeffs()
    ax, ay, az = _accel_scalar(*state.v, *state.w, kd, km, g)
    return np.array([ax, ay, az])


def step(state: BallState, dt: float, params: BallParams) -> BallState:
    """One RK4 step of size dt > 0.  Spin is carried over unchanged."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    kd, km, g = params.accel_coeffs()
    out = _rk4_scalar(*state.p, *state.v, *state.w, kd, km, g, dt)
    return BallState(state.t + dt, np.array(out[:3]), np.array(out[3:]), state.w.copy())


_AXES = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


def _refine_crossing(scal, w, axis, value, h, coeffs):
    """Bisect the substep length tau in (0, h] so that the RK4 step of size
    tau from `scal` lands within PLANE_TOLERANCE of the plane.

    `scal` is the pre-crossing (px..vz) tuple; the step of size h is known
    to reach or cross the plane.  Returns (tau, state_tuple).
    """
    kd, km, g = coeffs
    wx, wy, wz = w
    side0 = scal[axis] - value > 0.0
    hi = h
    hi_state = _rk4_scalar(*scal, wx, wy, wz, kd, km, g, h)
    lo = 0.0
    for _ in range(_MAX_BISECT):
        if abs(hi_state[axis] - value) < PLANE_TOLERANCE:
            break
        mid = 0.5 * (lo + hi)
        mid_state = _rk4_scalar(*scal, wx, wy, wz, kd, km, g, mid)
        d = mid_state[axis] - value
        if d == 0.0 or (d > 0.0) != side0:
            hi = mid
            hi_state = mid_state
        else:
            lo = mid
    return hi, hi_state


def integrate_to_plane(
    state: BallState,
    params: BallParams,
    axis,
    value: float,
    dt: float = 1e-3,
    t_max: float = 3.0,
) -> tuple[BallState, bool]:
    """Integrate until the given coordinate crosses `value`.

    Returns (state_at_crossing, True) with the crossing refined to
    |coordinate - value| < 1e-6 m, or (state_at_t_max, False) if the
    plane is not crossed within t_max seconds of flight.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t_max <= 0.0:
        raise ValueError("t_max must be positive")
    idx = _AXES[axis]
    if state.p[idx] == value:
        return state.copy(), True
    coeffs = params.accel_coeffs()
    kd, km, g = coeffs
    wx, wy, wz = state.w
    side0 = state.p[idx] - value > 0.0
    cur = (*state.p, *state.v)
    t = 0.0
    while t < t_max:
        h = min(dt, t_max - t)
        nxt = _rk4_scalar(*cur, wx, wy, wz, kd, km, g, h)
        d = nxt[idx] - value
        if d == 0.0 or (d > 0.0) != side0:
            tau, refined = _refine_crossing(cur, state.w, idx, value, h, coeffs)
            return (
                BallState(state.t + t + tau, np.array(refined[:3]), np.array(refined[3:]), state.w.copy()),
                True,
            )
        cur = nxt
        t += h
    return BallState(state.t + t, np.array(cur[:3]), np.array(cur[3:]), state.w.copy()), False


def back_integrate(state: BallState, params: BallParams, T: float, dt: float = 1e-3) -> BallState:
    """Integrate the same dynamics backwards for duration T.

    Used to synthesise the in-flight segment that precedes a known state.
    Raises if the backwards segment dips to or below the table surface
    z = 0, where a bounce would have happened instead of free flight.
    """
    if T < 0.0:
        raise ValueError("T must be non-negative")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if T == 0.0:
        return state.copy()
    kd, km, g = params.accel_coeffs()
    wx, wy, wz = state.w
    cur = (*state.p, *state.v)
    remaining = T
    while remaining > 0.0:
        h = min(dt, remaining)
        cur = _rk4_scalar(*cur, wx, wy, wz, kd, km, g, -h)
        remaining -= h
        if cur[2] <= 0.0:
            raise ValueError(
                f"backwards segment reaches z={cur[2]:.4f} <= 0 at T-{remaining:.4f}s; "
                "a bounce would precede this state"
            )
    return BallState(state.t - T, np.array(cur[:3]), np.array(cur[3:]), state.w.copy())
