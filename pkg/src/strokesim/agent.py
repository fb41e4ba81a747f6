"""Single-step actor-critic stroke learner.

The stroke problem is a contextual bandit: one observation, one action,
one immediate reward, no successor state.  That collapses the usual
deterministic-policy-gradient machinery considerably — critics regress
directly on observed rewards, so there are no target networks — while
keeping the parts that matter: optional twin critics combined by
minimum-norm selection, delayed actor updates, and an exploration rule
that samples several noisy candidate actions and keeps the one the
critic scores highest.

Critics may be vector-valued (one output per reward component) or
scalar.  Action selection and the actor loss always work on the norm of
the critic output.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .env import EpisodeOutcome, EpisodeResult
from .evaluation import Metrics, metrics_from_results, run_suite
from .nets import MLP, AdamState, adam_step, backward, backward_input, forward, init_mlp

__all__ = [
    "AgentConfig",
    "ReplayBuffer",
    "SyntheticBandit",
    "TrainResult",
    "critic_value",
    "select_action_argmax",
    "select_action_default",
    "train",
    "update_actor",
    "update_critics",
]


@dataclass(frozen=True)
class AgentConfig:
    """Learner configuration; the flags reproduce the ablation variants.

    use_twin_critics picks the two-critic backbone over a single critic;
    use_argmax_exploration switches from plain Gaussian action noise to
    candidate search; q_dim is the critic output width (3 trains on the
    shaped reward vector, 1 on the scalar reward).
    """

    use_twin_critics: bool = True
    use_argmax_exploration: bool = True
    q_dim: int = 3
    exploration_sigma: float = 0.1
    candidates: int = 64
    replay_capacity: int = 5000
    batch_size: int = 512
    learning_rate: float = 3e-4
    episodes: int = 10000
    episodes_per_epoch: int = 100
    policy_delay: int = 2
    warmup_episodes: int = 512
    updates_per_episode: int = 2
    learning_rate_final: float | None = None  # linear decay target; None keeps lr constant
    mirror_augmentation: bool = True  # also store the laterally mirrored transition
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    reward_k: float = 0.5
    hidden_sizes: tuple[int, ...] = (256, 256)
    epoch_eval_episodes: int = 1000

    def __post_init__(self) -> None:
        if self.q_dim not in (1, 3):
            raise ValueError("q_dim must be 1 or 3")
        if self.candidates < 1:
            raise ValueError("need at least one candidate")
        if self.exploration_sigma < 0.0:
            raise ValueError("exploration sigma must be non-negative")
        if self.policy_delay < 1 or self.batch_size < 1 or self.episodes < 1:
            raise ValueError("policy_delay, batch_size and episodes must be positive")
        if self.episodes_per_epoch < 1 or self.replay_capacity < 1:
            raise ValueError("episodes_per_epoch and replay_capacity must be positive")
        if self.warmup_episodes < 0 or self.reward_k <= 0.0:
            raise ValueError("warmup must be >= 0 and reward_k > 0")
        if self.updates_per_episode < 1:
            raise ValueError("updates_per_episode must be positive")


class ReplayBuffer:
    """Fixed-capacity ring of (observation, action, reward) triples."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, reward_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._obs = np.empty((capacity, obs_dim))
        self._act = np.empty((capacity, action_dim))
        self._rew = np.empty((capacity, reward_dim))
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, obs: np.ndarray, action: np.ndarray, reward: np.ndarray) -> None:
        i = self._next
        self._obs[i] = obs
        self._act[i] = action
        self._rew[i] = reward
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=n)
        return self._obs[idx], self._act[idx], self._rew[idx]


def _q_batch(critics: list[MLP], x: np.ndarray) -> np.ndarray:
    """Critic outputs for stacked (s, a) rows, min-norm selected per row."""
    q1, _ = forward(critics[0], x)
    if len(critics) == 1:
        return q1
    q2, _ = forward(critics[1], x)
    n1 = np.sqrt((q1 * q1).sum(axis=1))
    n2 = np.sqrt((q2 * q2).sum(axis=1))
    return np.where((n1 < n2)[:, None], q1, q2)


def critic_value(critics: list[MLP], s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Q estimate for (s, a): the twin whose output has the smaller norm,
    the second critic winning ties; single-critic mode passes through."""
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    if s.ndim == 1:
        return _q_batch(critics, np.concatenate([s, a])[None, :])[0]
    return _q_batch(critics, np.hstack([s, a]))


def select_action_argmax(
    actor: MLP,
    critics: list[MLP],
    s: np.ndarray,
    k: int,
    sigma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Candidate-search exploration: k clipped noisy variations of the
    policy action (the first candidate is noiseless) scored by the norm
    of the critic value; ties go to the lowest candidate index."""
    if k < 1:
        raise ValueError("need at least one candidate")
    mu, _ = forward(actor, s)
    cands = np.repeat(mu[None, :], k, axis=0)
    if k > 1:
        cands[1:] += rng.normal(0.0, sigma, size=(k - 1, mu.shape[0]))
    np.clip(cands, -1.0, 1.0, out=cands)
    q = _q_batch(critics, np.hstack([np.repeat(s[None, :], k, axis=0), cands]))
    norms = np.sqrt((q * q).sum(axis=1))
    return cands[int(np.argmax(norms))].copy()

def select_action_default(actor: MLP, s: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Plain Gaussian exploration around the policy action, clipped."""
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    mu, _ = forward(actor, s)
    return np.clip(mu + rng.normal(0.0, sigma, size=mu.shape), -1.0, 1.0)


def update_critics(
    critics: list[MLP],
    adam_states: list[AdamState],
    batch: tuple[np.ndarray, np.ndarray, np.ndarray],
    lr: float,
    scratch: list[dict] | None = None,
) -> tuple[float, ...]:
    """One Adam step per critic on the mean squared reward residual
    (both critics see the same batch). Returns the pre-step losses.

    `scratch` (one dict per critic) carries reusable forward/backward
    buffers between calls; pass the same list every time.
    """
    s, a, r = batch
    if len(s) == 0:
        raise ValueError("batch must be non-empty")
    x = np.hstack([s, a])
    inv_b = 1.0 / len(s)
    losses = []
    for i, (net, st) in enumerate(zip(critics, adam_states)):
        slot = scratch[i] if scratch is not None else {}
        q, cache = forward(net, x, slot.get("cache"))
        slot["cache"] = cache
        diff = q - r
        losses.append(float((diff * diff).sum(axis=1).mean()))
        grads, _ = backward(net, cache, (2.0 * inv_b) * diff, slot.get("grads"))
        slot["grads"] = grads
        adam_step(net, grads, st, lr)
    return tuple(losses)


def update_actor(
    actor: MLP,
    adam_state: AdamState,
    critics: list[MLP],
    s: np.ndarray,
    lr: float,
    scratch: dict | None = None,
) -> float:
    """One Adam step on the actor against loss -mean ||Q(s, mu(s))||.

    The min-norm critic is selected per sample and only feeds gradients
    to the actor; critic parameters are left untouched.  Samples whose
    selected Q is exactly zero contribute no gradient (the norm has no
    derivative there).
    """
    if len(s) == 0:
        raise ValueError("batch must be non-empty")
    if scratch is None:
        scratch = {}
    b = len(s)
    a, cache_a = forward(actor, s, scratch.get("a_cache"))
    scratch["a_cache"] = cache_a
    x = np.hstack([s, a])
    c_caches = scratch.setdefault("c_caches", [None] * len(critics))
    q1, c1 = forward(critics[0], x, c_caches[0])
    c_caches[0] = c1
    if len(critics) > 1:
        q2, c2 = forward(critics[1], x, c_caches[1])
        c_caches[1] = c2
        n1 = np.sqrt((q1 * q1).sum(axis=1))
        n2 = np.sqrt((q2 * q2).sum(axis=1))
        use1 = n1 < n2
        norms = np.where(use1, n1, n2)
        q_sel = np.where(use1[:, None], q1, q2)
    else:
        use1 = np.ones(b, dtype=bool)
        norms = np.sqrt((q1 * q1).sum(axis=1))
        q_sel = q1
    loss = -float(norms.mean())

    dq = np.zeros_like(q_sel)
    nonzero = norms > 0.0
    dq[nonzero] = (-1.0 / b) * q_sel[nonzero] / norms[nonzero][:, None]
    dx = backward_input(critics[0], c1, np.where(use1[:, None], dq, 0.0))
    if len(critics) > 1:
        dx = dx + backward_input(critics[1], c2, np.where(use1[:, None], 0.0, dq))
    grads_a, _ = backward(actor, cache_a, dx[:, s.shape[1] :], scratch.get("a_grads"))
    scratch["a_grads"] = grads_a
    adam_step(actor, grads_a, adam_state, lr)
    return loss


@dataclass
class TrainResult:
    actor: MLP
    critics: list[MLP]
    log: list[dict]
    config: AgentConfig
    seed: int
    wall_time: float


def _epoch_record(
    epoch: int,
    actor: MLP,
    critics: list[MLP],
    eval_env,
    episodes: int,
    eval_seed: int,
    critic_loss,
    actor_loss,
) -> dict:
    suite = run_suite(actor, eval_env, episodes, eval_seed)
    m = metrics_from_results(suite.results)
    q = _q_batch(critics, np.hstack([suite.obs, suite.actions]))
    return {
        "epoch": epoch,
        "episodes": episodes,
        "success_rate": m.success_rate,
        "mean_reward": list(m.mean_reward),
        "mean_q": [float(v) for v in q.mean(axis=0)],
        "distance_error_m": m.distance_error,
        "height_error_m": m.height_error,
        "critic_loss": list(critic_loss) if critic_loss is not None else None,
        "actor_loss": actor_loss,
    }


def train(
    train_env,
    eval_env,
    config: AgentConfig,
    seed: int,
    eval_seed: int = 1_000_003,
    verbose: bool = False,
) -> TrainResult:
    """Run the whole bandit training loop, deterministically from `seed`.

    Per episode: sample a state, pick an action (uniform during warmup,
    then candidate search or Gaussian noise), play it, store the
    transition, and after warmup take one critic step on a fresh uniform
    minibatch, with an actor step every `policy_delay` critic steps.
    Every `episodes_per_epoch` episodes the deterministic policy is
    evaluated on a fixed suite and appended to the log.

    Randomness is drawn from generators keyed on (seed, stream, episode),
    so results are independent of call history and reproducible bit for
    bit.
    """
    t_start = time.perf_counter()
    obs_dim = train_env.obs_dim
    action_dim = train_env.action_dim
    init_rng = np.random.default_rng((seed, 3))
    actor = init_mlp((obs_dim, *config.hidden_sizes, action_dim), "tanh", init_rng)
    n_critics = 2 if config.use_twin_critics else 1
    critics = [
        init_mlp((obs_dim + action_dim, *config.hidden_sizes, config.q_dim), "linear", init_rng)
        for _ in range(n_critics)
    ]
    adam_actor = AdamState.for_net(actor, beta1=config.adam_beta1, beta2=config.adam_beta2)
    adam_critics = [AdamState.for_net(c, beta1=config.adam_beta1, beta2=config.adam_beta2) for c in critics]
    buffer = ReplayBuffer(config.replay_capacity, obs_dim, action_dim, config.q_dim)
    batch_rng = np.random.default_rng((seed, 2))
    critic_scratch = [{} for _ in critics]
    actor_scratch: dict = {}

    log: list[dict] = []
    critic_steps = 0
    last_closs = None
    last_aloss = None
    for ep in range(config.episodes):
        env_rng = np.random.default_rng((seed, 0, ep))
        act_rng = np.random.default_rng((seed, 1, ep))
        ctx = train_env.sample_episode(env_rng)
        if ep < config.warmup_episodes:
            action = act_rng.uniform(-1.0, 1.0, action_dim)
        elif config.use_argmax_exploration:
            action = select_action_argmax(
                actor, critics, ctx.obs, config.candidates, config.exploration_sigma, act_rng
            )
        else:
            action = select_action_default(actor, ctx.obs, config.exploration_sigma, act_rng)
        result = train_env.play(ctx, action)
        reward = result.reward_vec if config.q_dim == 3 else np.array([result.reward_1d])
        buffer.add(ctx.obs, action, reward)
        if config.mirror_augmentation and hasattr(train_env, "mirror_transition"):
            mirrored = train_env.mirror_transition(ctx, action)
            if mirrored is not None:
                buffer.add(mirrored[0], mirrored[1], reward)

        if ep >= config.warmup_episodes:
            lr = config.learning_rate
            if config.learning_rate_final is not None:
                frac = ep / max(config.episodes - 1, 1)
                lr = lr + (config.learning_rate_final - lr) * frac
            for _ in range(config.updates_per_episode):
                batch = buffer.sample(batch_rng, config.batch_size)
                last_closs = update_critics(critics, adam_critics, batch, lr, critic_scratch)
                critic_steps += 1
                if critic_steps % config.policy_delay == 0:
                    last_aloss = update_actor(actor, adam_actor, critics, batch[0], lr, actor_scratch)

        if (ep + 1) % config.episodes_per_epoch == 0:
            epoch = (ep + 1) // config.episodes_per_epoch
            record = _epoch_record(
                epoch, actor, critics, eval_env, config.epoch_eval_episodes, eval_seed, last_closs, last_aloss
            )
            log.append(record)
            if verbose:
                print(
                    f"epoch {epoch:3d}  success {record['success_rate']:.3f}  "
                    f"eps_d {record['distance_error_m']:.3f}  eps_h {record['height_error_m']:.3f}",
                    flush=True,
                )
    return TrainResult(actor, critics, log, config, seed, time.perf_counter() - t_start)


@dataclass
class _BanditContext:
    obs: np.ndarray


class SyntheticBandit:
    """Known-optimum bandit for checking the learner without any physics.

    Observations are uniform in [-1, 1]^obs_dim and the best action is a
    fixed gain times the first three observation components; rewards are
    exp(-|a_j - a*_j|) per component, so the optimum earns exactly 1.
    """

    def __init__(self, obs_dim: int = 11, action_dim: int = 3, gain: float = 0.6):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.gain = gain

    def optimum(self, obs: np.ndarray) -> np.ndarray:
        return self.gain * obs[..., : self.action_dim]

    def sample_episode(self, rng: np.random.Generator) -> _BanditContext:
        return _BanditContext(obs=rng.uniform(-1.0, 1.0, self.obs_dim))

    def play(self, ctx: _BanditContext, a01: np.ndarray) -> EpisodeResult:
        a = np.clip(np.asarray(a01, dtype=float), -1.0, 1.0)
        gap = np.abs(a - self.optimum(ctx.obs))
        r_vec = np.exp(-gap)
        dist = float(np.sqrt((gap * gap).sum()))
        return EpisodeResult(
            success=True,
            reward_vec=r_vec,
            reward_1d=float(np.exp(-dist)),
            distance_reward=float(np.exp(-dist)),
            outcome=None,
        )

    def play_many(self, ctxs: list[_BanditContext], a01: np.ndarray) -> list[EpisodeResult]:
        return [self.play(c, a) for c, a in zip(ctxs, a01)]
