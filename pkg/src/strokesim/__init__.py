"""strokesim: a table-tennis stroke workbench.

Physics of spinning-ball flight, impulse impact models for table and
racket, a single-step stroke environment, and a from-scratch
actor-critic learner with its evaluation harness.
"""

from .agent import AgentConfig, SyntheticBandit, TrainResult, train
from .contact import RacketState, SurfaceParams, bounce, racket_impact, racket_normal
from .env import (
    EVAL_RANGES,
    TRAIN_RANGES,
    ActionBounds,
    EpisodeOutcome,
    HitState,
    NoiseConfig,
    StateRanges,
    StrokeEnv,
    TableGeometry,
    reward,
    reward_1d,
    synthesize_serve,
)
from .evaluation import Metrics, distance_error, evaluate, height_error
from .physics import BallParams, BallState, aero_accel, back_integrate, ball_inertia, integrate_to_plane, step

__version__ = "0.1.0"
