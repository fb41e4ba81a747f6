import copy

import numpy as np
import numpy.testing as npt
import pytest

from strokesim.agent import (
    AgentConfig,
    ReplayBuffer,
    SyntheticBandit,
    critic_value,
    select_action_argmax,
    select_action_default,
    train,
    update_actor,
    update_critics,
)
from strokesim.nets import MLP, AdamState, forward, init_mlp


def constant_critic(bias, in_width=14):
    """Critic that outputs `bias` for every input."""
    bias = np.asarray(bias, dtype=float)
    return MLP([np.zeros((in_width, bias.size))], [bias.copy()], "linear")


def hat_critic(a_star, obs_dim=2):
    """Q_j(s, a) = 1 - |a_j - a_star_j|: norm is largest at a_star."""
    a_star = np.asarray(a_star, dtype=float)
    n_act = a_star.size
    in_width = obs_dim + n_act
    w1 = np.zeros((in_width, 2 * n_act))
    b1 = np.zeros(2 * n_act)
    for j in range(n_act):
        w1[obs_dim + j, 2 * j] = 1.0
        b1[2 * j] = -a_star[j]
        w1[obs_dim + j, 2 * j + 1] = -1.0
        b1[2 * j + 1] = a_star[j]
    w2 = np.zeros((2 * n_act, n_act))
    for j in range(n_act):
        w2[2 * j, j] = -1.0
        w2[2 * j + 1, j] = -1.0
    return MLP([w1, w2], [b1, np.ones(n_act)], "linear")


class TestCriticValue:
    def test_smaller_norm_wins(self):
        critics = [constant_critic([0.3, 0.4, 0.0]), constant_critic([0.6, 0.0, 0.8])]
        q = critic_value(critics, np.zeros(11), np.zeros(3))
        npt.assert_allclose(q, [0.3, 0.4, 0.0])

    def test_tie_goes_to_second_critic(self):
        critics = [constant_critic([0.5, 0.0, 0.0]), constant_critic([0.0, 0.5, 0.0])]
        q = critic_value(critics, np.zeros(11), np.zeros(3))
        npt.assert_allclose(q, [0.0, 0.5, 0.0])

    def test_single_critic_passthrough(self):
        critics = [constant_critic([0.9, 0.1, 0.2])]
        q = critic_value(critics, np.zeros(11), np.zeros(3))
        npt.assert_allclose(q, [0.9, 0.1, 0.2])

    def test_selected_norm_is_the_minimum(self):
        rng = np.random.default_rng(0)
        critics = [init_mlp((14, 8, 3), "linear", rng) for _ in range(2)]
        for net in critics:
            for w in net.weights:
                w += rng.normal(0, 0.5, w.shape)
        s = rng.normal(size=(40, 11))
        a = rng.uniform(-1, 1, (40, 3))
        q_sel = critic_value(critics, s, a)
        x = np.hstack([s, a])
        n1 = np.linalg.norm(forward(critics[0], x)[0], axis=1)
        n2 = np.linalg.norm(forward(critics[1], x)[0], axis=1)
        npt.assert_allclose(np.linalg.norm(q_sel, axis=1), np.minimum(n1, n2), rtol=1e-12)


class TestExploration:
    def test_zero_sigma_returns_policy_action(self):
        rng = np.random.default_rng(1)
        actor = init_mlp((11, 16, 3), "tanh", rng)
        critics = [init_mlp((14, 16, 3), "linear", rng)]
        s = rng.normal(size=11)
        mu, _ = forward(actor, s)
        a = select_action_argmax(actor, critics, s, 32, 0.0, np.random.default_rng(2))
        npt.assert_allclose(a, np.clip(mu, -1, 1))

    def test_single_candidate_is_the_policy_action(self):
        rng = np.random.default_rng(1)
        actor = init_mlp((11, 16, 3), "tanh", rng)
        critics = [init_mlp((14, 16, 3), "linear", rng)]
        s = rng.normal(size=11)
        mu, _ = forward(actor, s)
        a = select_action_argmax(actor, critics, s, 1, 0.5, np.random.default_rng(2))
        npt.assert_allclose(a, np.clip(mu, -1, 1))

    def test_picks_candidate_nearest_known_optimum(self):
        # hat-shaped critic peaks at a_star; the chosen candidate must beat
        # the plain policy action
        a_star = np.array([0.4, -0.3, 0.1])
        critics = [hat_critic(a_star, obs_dim=11)]
        actor = init_mlp((11, 8, 3), "tanh", np.random.default_rng(3))
        s = np.zeros(11)
        mu, _ = forward(actor, s)
        a = select_action_argmax(actor, critics, s, 64, 0.3, np.random.default_rng(4))
        assert np.linalg.norm(a - a_star) < np.linalg.norm(np.clip(mu, -1, 1) - a_star)

    def test_matches_brute_force_over_candidates(self):
        rng_model = np.random.default_rng(5)
        actor = init_mlp((11, 16, 3), "tanh", rng_model)
        critics = [init_mlp((14, 16, 3), "linear", rng_model) for _ in range(2)]
        for net in critics:
            for w in net.weights:
                w += rng_model.normal(0, 0.4, w.shape)
        s = rng_model.normal(size=11)
        k, sigma = 16, 0.2
        chosen = select_action_argmax(actor, critics, s, k, sigma, np.random.default_rng(6))
        # regenerate the same candidate set and score it independently
        mu, _ = forward(actor, s)
        cands = np.repeat(mu[None, :], k, axis=0)
        cands[1:] += np.random.default_rng(6).normal(0.0, sigma, size=(k - 1, 3))
        cands = np.clip(cands, -1.0, 1.0)
        scores = [np.linalg.norm(critic_value(critics, s, c)) for c in cands]
        npt.assert_allclose(chosen, cands[int(np.argmax(scores))])

    def test_default_exploration_zero_sigma(self):
        actor = init_mlp((11, 16, 3), "tanh", np.random.default_rng(7))
        s = np.zeros(11)
        mu, _ = forward(actor, s)
        a = select_action_default(actor, s, 0.0, np.random.default_rng(8))
        npt.assert_allclose(a, np.clip(mu, -1, 1))

    def test_actions_always_clipped(self):
        actor = init_mlp((11, 16, 3), "tanh", np.random.default_rng(9))
        s = np.zeros(11)
        for i in range(20):
            a = select_action_default(actor, s, 2.0, np.random.default_rng(i))
            assert (np.abs(a) <= 1.0).all()

    def test_seeded_reproducibility(self):
        actor = init_mlp((11, 16, 3), "tanh", np.random.default_rng(10))
        critics = [init_mlp((14, 16, 3), "linear", np.random.default_rng(11))]
        s = np.ones(11) * 0.2
        a1 = select_action_argmax(actor, critics, s, 8, 0.1, np.random.default_rng(12))
        a2 = select_action_argmax(actor, critics, s, 8, 0.1, np.random.default_rng(12))
        npt.assert_array_equal(a1, a2)


class TestReplayBuffer:
    def test_evicts_oldest_first(self):
        buf = ReplayBuffer(3, 1, 1, 1)
        for i in range(5):
            buf.add(np.array([i]), np.array([i]), np.array([i]))
        assert len(buf) == 3
        stored = sorted(buf._obs[:, 0].tolist())
        assert stored == [2.0, 3.0, 4.0]

    def test_sample_is_uniform_over_current_content(self):
        buf = ReplayBuffer(10, 1, 1, 1)
        for i in range(4):
            buf.add(np.array([i]), np.array([0]), np.array([0]))
        s, _, _ = buf.sample(np.random.default_rng(0), 1000)
        assert set(np.unique(s[:, 0])) <= {0.0, 1.0, 2.0, 3.0}

    def test_empty_buffer_rejects_sampling(self):
        buf = ReplayBuffer(10, 1, 1, 1)
        with pytest.raises(ValueError):
            buf.sample(np.random.default_rng(0), 4)

    def test_rejects_bad_capacity(self):
        with pytest.raises(ValueError):
            ReplayBuffer(0, 1, 1, 1)


class TestUpdateCritics:
    def test_perfect_predictions_give_zero_loss_and_no_drift(self):
        r = np.array([[0.2, 0.6, 0.1]])
        critic = constant_critic(r[0])
        state = AdamState.for_net(critic)
        before = copy.deepcopy(critic.weights)
        losses = update_critics([critic], [state], (np.zeros((1, 11)), np.zeros((1, 3)), r), lr=1e-3)
        assert losses[0] == 0.0
        assert all((w == b).all() for w, b in zip(critic.weights, before))
        assert state.step == 1

    def test_scalar_mode_is_plain_mse(self):
        rng = np.random.default_rng(13)
        critic = init_mlp((14, 8, 1), "linear", rng)
        s = rng.normal(size=(16, 11))
        a = rng.uniform(-1, 1, (16, 3))
        r = rng.uniform(0, 1, (16, 1))
        q, _ = forward(critic, np.hstack([s, a]))
        expected = float(((q - r) ** 2).sum(axis=1).mean())
        losses = update_critics([critic], [AdamState.for_net(critic)], (s, a, r), lr=1e-9)
        assert losses[0] == pytest.approx(expected, rel=1e-12)

    def test_repeated_updates_fit_single_transition(self):
        rng = np.random.default_rng(14)
        critic = init_mlp((14, 32, 32, 3), "linear", rng)
        state = AdamState.for_net(critic)
        batch = (rng.normal(size=(1, 11)), rng.uniform(-1, 1, (1, 3)), np.array([[0.8, 0.5, 0.9]]))
        loss = None
        for _ in range(2000):
            loss = update_critics([critic], [state], batch, lr=1e-3)[0]
        assert loss < 1e-4

    def test_both_critics_trained_independently_on_same_batch(self):
        rng = np.random.default_rng(15)
        critics = [init_mlp((14, 8, 3), "linear", rng) for _ in range(2)]
        states = [AdamState.for_net(c) for c in critics]
        batch = (rng.normal(size=(8, 11)), rng.uniform(-1, 1, (8, 3)), rng.uniform(0, 1, (8, 3)))
        l1, l2 = update_critics(critics, states, batch, lr=1e-3)
        assert l1 != l2  # different inits, same data

    def test_scratch_buffers_do_not_change_results(self):
        rng = np.random.default_rng(16)
        critics_a = [init_mlp((14, 8, 3), "linear", np.random.default_rng(1))]
        critics_b = [c.copy() for c in critics_a]
        st_a = [AdamState.for_net(critics_a[0])]
        st_b = [AdamState.for_net(critics_b[0])]
        scratch = [dict()]
        for _ in range(5):
            batch = (rng.normal(size=(8, 11)), rng.uniform(-1, 1, (8, 3)), rng.uniform(0, 1, (8, 3)))
            update_critics(critics_a, st_a, batch, lr=1e-3)
            update_critics(critics_b, st_b, batch, lr=1e-3, scratch=scratch)
        for wa, wb in zip(critics_a[0].weights, critics_b[0].weights):
            npt.assert_array_equal(wa, wb)

    def test_rejects_empty_batch(self):
        critic = constant_critic([0.0])
        with pytest.raises(ValueError):
            update_critics([critic], [AdamState.for_net(critic)], (np.zeros((0, 11)), np.zeros((0, 3)), np.zeros((0, 1))), 1e-3)


def action_picker_critic():
    """Q(s, a) = (a_0, 0, 0) for obs_dim=2, action_dim=1: reward equals the
    action's first component, so the actor should push it up."""
    w = np.zeros((3, 1))
    w[2, 0] = 1.0
    return MLP([w], [np.zeros(1)], "linear")


class TestUpdateActor:
    def test_actor_climbs_towards_rewarding_action(self):
        # critic output = the action itself; starting on the positive side,
        # the actor must push its action towards +1
        rng = np.random.default_rng(17)
        actor = init_mlp((2, 8, 1), "tanh", rng)
        actor.biases[-1][:] = 0.1
        adam = AdamState.for_net(actor)
        critic = action_picker_critic()
        s = rng.normal(size=(32, 2))
        before = forward(actor, s)[0].mean()
        for _ in range(300):
            update_actor(actor, adam, [critic], s, lr=1e-2)
        after = forward(actor, s)[0].mean()
        assert after > before + 0.5
        assert after > 0.9

    def test_critic_parameters_untouched(self):
        rng = np.random.default_rng(18)
        actor = init_mlp((11, 8, 3), "tanh", rng)
        critics = [init_mlp((14, 8, 3), "linear", rng) for _ in range(2)]
        snap = [copy.deepcopy(c.weights) for c in critics]
        update_actor(actor, AdamState.for_net(actor), critics, rng.normal(size=(16, 11)), lr=1e-2)
        for c, ws in zip(critics, snap):
            assert all((w == s).all() for w, s in zip(c.weights, ws))

    def test_small_step_descends_the_loss(self):
        rng = np.random.default_rng(19)
        actor = init_mlp((11, 16, 3), "tanh", rng)
        critics = [init_mlp((14, 16, 3), "linear", rng) for _ in range(2)]
        for net in critics:
            for w in net.weights:
                w += rng.normal(0, 0.3, w.shape)
        s = rng.normal(size=(64, 11))

        def actor_loss():
            a, _ = forward(actor, s)
            q1, _ = forward(critics[0], np.hstack([s, a]))
            q2, _ = forward(critics[1], np.hstack([s, a]))
            n1 = np.linalg.norm(q1, axis=1)
            n2 = np.linalg.norm(q2, axis=1)
            return -float(np.minimum(n1, n2).mean())

        before = actor_loss()
        reported = update_actor(actor, AdamState.for_net(actor), critics, s, lr=1e-5)
        assert reported == pytest.approx(before, rel=1e-12)
        assert actor_loss() <= before

    def test_zero_q_contributes_no_gradient(self):
        actor = init_mlp((2, 4, 1), "tanh", np.random.default_rng(20))
        adam = AdamState.for_net(actor)
        critic = constant_critic([0.0], in_width=3)
        before = copy.deepcopy(actor.weights)
        update_actor(actor, adam, [critic], np.zeros((4, 2)), lr=1e-2)
        assert all((w == b).all() for w, b in zip(actor.weights, before))


class TestTraining:
    def test_training_is_deterministic(self):
        cfg = AgentConfig(
            episodes=60,
            warmup_episodes=16,
            batch_size=16,
            hidden_sizes=(16, 16),
            candidates=4,
            episodes_per_epoch=30,
            epoch_eval_episodes=8,
        )
        env = SyntheticBandit()
        a = train(env, env, cfg, seed=3)
        b = train(env, env, cfg, seed=3)
        for wa, wb in zip(a.actor.weights, b.actor.weights):
            npt.assert_array_equal(wa, wb)
        assert a.log == b.log

    def test_different_seeds_differ(self):
        cfg = AgentConfig(
            episodes=40,
            warmup_episodes=16,
            batch_size=16,
            hidden_sizes=(8, 8),
            candidates=4,
            episodes_per_epoch=20,
            epoch_eval_episodes=8,
        )
        env = SyntheticBandit()
        a = train(env, env, cfg, seed=3)
        b = train(env, env, cfg, seed=4)
        assert any((wa != wb).any() for wa, wb in zip(a.actor.weights, b.actor.weights))

    def test_log_has_one_record_per_epoch(self):
        cfg = AgentConfig(
            episodes=100,
            warmup_episodes=10,
            batch_size=8,
            hidden_sizes=(8, 8),
            candidates=4,
            episodes_per_epoch=25,
            epoch_eval_episodes=8,
        )
        env = SyntheticBandit()
        result = train(env, env, cfg, seed=0)
        assert [r["epoch"] for r in result.log] == [1, 2, 3, 4]
        record = result.log[-1]
        assert set(record) >= {"success_rate", "mean_reward", "mean_q", "distance_error_m", "height_error_m"}
        assert len(record["mean_q"]) == cfg.q_dim

    def test_single_critic_mode_trains(self):
        cfg = AgentConfig(
            use_twin_critics=False,
            q_dim=1,
            policy_delay=1,
            episodes=40,
            warmup_episodes=16,
            batch_size=16,
            hidden_sizes=(8, 8),
            candidates=4,
            episodes_per_epoch=20,
            epoch_eval_episodes=8,
        )
        env = SyntheticBandit()
        result = train(env, env, cfg, seed=5)
        assert len(result.critics) == 1
        assert result.critics[0].sizes[-1] == 1

    def test_learner_improves_on_known_optimum_bandit(self):
        cfg = AgentConfig(
            episodes=1500,
            warmup_episodes=128,
            batch_size=128,
            learning_rate=3e-3,
            hidden_sizes=(32, 32),
            candidates=16,
            episodes_per_epoch=500,
            epoch_eval_episodes=64,
        )
        env = SyntheticBandit()
        result = train(env, env, cfg, seed=1)
        first = np.mean(result.log[0]["mean_reward"])
        last = np.mean(result.log[-1]["mean_reward"])
        assert last > first
        assert last > 0.9


class TestAgentConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            AgentConfig(q_dim=2)
        with pytest.raises(ValueError):
            AgentConfig(candidates=0)
        with pytest.raises(ValueError):
            AgentConfig(exploration_sigma=-0.1)
        with pytest.raises(ValueError):
            AgentConfig(updates_per_episode=0)
