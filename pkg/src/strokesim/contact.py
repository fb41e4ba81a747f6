"""Instantaneous impacts between the ball and a flat surface.

Both table bounces and racket strokes use the same single-point impulse
model: a restitution impulse along the surface normal and an isotropic
Coulomb friction impulse opposing the contact-point slip, capped so that
the contact can stick but never reverses slip.  The surface (table or
racket rubber) is characterised by just a restitution coefficient and a
friction coefficient, both measurable with the estimators below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .physics import BallParams, BallState

__all__ = [
    "RacketState",
    "SurfaceParams",
    "bounce",
    "estimate_friction",
    "estimate_restitution",
    "racket_impact",
    "racket_normal",
    "rotation_matrix",
]


@dataclass(frozen=True)
class SurfaceParams:
    """Impact coefficients of one surface: restitution in (0, 1], friction >= 0."""

    restitution: float
    friction: float

    def __post_init__(self) -> None:
        if not 0.0 < self.restitution <= 1.0:
            raise ValueError(f"restitution must be in (0, 1], got {self.restitution}")
        if self.friction < 0.0:
            raise ValueError(f"friction must be non-negative, got {self.friction}")


#: Measured defaults: painted table top and pimpled racket rubber.
TABLE_SURFACE = SurfaceParams(restitution=0.97, friction=0.05)
RACKET_SURFACE = SurfaceParams(restitution=0.9, friction=1.0)


def estimate_restitution(h1: float, h2: float) -> float:
    """Restitution from a drop test: release height h1, rebound height h2.

    kappa = sqrt(h2 / h1), from the ratio of impact speeds.
    """
    if h1 <= 0.0:
        raise ValueError(f"release height must be positive, got {h1}")
    if h2 < 0.0:
        raise ValueError(f"rebound height must be non-negative, got {h2}")
    return math.sqrt(h2 / h1)


def estimate_friction(theta: float) -> float:
    """Friction from a tilt test: theta is the tilt angle (rad) at which the
    balls start to slide; mu = tan(theta)."""
    if not 0.0 <= theta < math.pi / 2.0:
        raise ValueError(f"tilt angle must be in [0, pi/2), got {theta}")
    return math.tan(theta)


def rotation_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """R = Rz(gamma) @ Ry(beta) @ Rx(alpha)."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rz = np.array([[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def racket_normal(angles: tuple[float, float, float]) -> np.ndarray:
    """Face normal of a racket posed with (alpha, beta, gamma).

    The untilted face normal is (-1, 0, 0), rotated by
    Rz(gamma) @ Ry(beta) @ Rx(alpha).  The roll Rx(alpha) fixes the x
    axis, so the product collapses to the closed form below, which is a
    unit vector by construction.
    """
    _, beta, gamma = angles
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    return np.array([-cb * cg, -cb * sg, sb])


@dataclass
class RacketState:
    """Pose and motion of the racket blade at the moment of impact.

    The blade is a rigid disc; `angles` are (alpha, beta, gamma) rotations
    about x, y, z applied in that order to the untilted pose.
    """

    center: np.ndarray
    angles: tuple[float, float, float]
    vel: np.ndarray
    radius: float = 0.08

    def __post_init__(self) -> None:
        self.center = np.array(self.center, dtype=float)
        self.vel = np.array(self.vel, dtype=float)
        self.angles = tuple(float(a) for a in self.angles)
        if self.radius <= 0.0:
            raise ValueError("racket radius must be positive")


def bounce(
    state: BallState,
    normal: np.ndarray,
    surf_vel: np.ndarray,
    surf: SurfaceParams,
    ball: BallParams,
) -> BallState:
    """Impulse response of the ball hitting a flat surface.

    `normal` is the unit surface normal on the ball's side; the ball must
    be approaching, i.e. (v - surf_vel) . normal < 0.  The normal impulse
    realises restitution; the tangential impulse opposes the contact-point
    slip u = v_t + w x (-r1 n) with magnitude min(mu*Jn, m_eff*|u|), the
    cap being the stick condition for a spherical shell.  Position and
    time are unchanged.
    """
    n = np.asarray(normal, dtype=float)
    v_surf = np.asarray(surf_vel, dtype=float)
    v_rel = state.v - v_surf
    vn = float(v_rel @ n)
    if vn >= 0.0:
        raise ValueError(f"contact is not approaching (relative normal speed {vn:.4g} >= 0)")

    kappa = surf.restitution
    m = ball.m
    r1 = ball.r1
    inertia = ball.inertia

    jn = m * (1.0 + kappa) * (-vn)
    v_out = state.v - (1.0 + kappa) * vn * n

    u = (v_rel - vn * n) + np.cross(state.w, -r1 * n)
    u -= float(u @ n) * n  # numerical safety: keep slip tangential
    slip = math.sqrt(float(u @ u))
    w_out = state.w.copy()
    if slip > 0.0:
        m_eff = 1.0 / (1.0 / m + r1 * r1 / inertia)
        jt = min(surf.friction * jn, m_eff * slip)
        u_hat = u / slip
        v_out = v_out - (jt / m) * u_hat
        w_out = w_out + (r1 * jt / inertia) * np.cross(n, u_hat)
    return BallState(state.t, state.p.copy(), v_out, w_out)


def racket_impact(
    ball_state: BallState,
    racket: RacketState,
    surf: SurfaceParams,
    ball: BallParams,
) -> tuple[BallState, bool]:
    """Strike the ball with the racket, or miss.

    The ball misses when its centre, projected onto the blade plane, is
    further than the blade radius from the racket centre.  On a hit the
    face normal is oriented towards the approaching ball and bounce()
    applies with the blade's velocity as the surface velocity.
    """
    n = racket_normal(racket.angles)
    d = ball_state.p - racket.center
    d_t = d - float(d @ n) * n
    if math.sqrt(float(d_t @ d_t)) > racket.radius:
        return ball_state.copy(), False
    vn = float((ball_state.v - racket.vel) @ n)
    if vn > 0.0:
        n = -n
        vn = -vn
    if vn == 0.0:
        # grazing: ball slides along the face, no momentum exchange
        return ball_state.copy(), False
    return bounce(ball_state, n, racket.vel, surf, ball), True
