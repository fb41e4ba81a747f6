import math

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strokesim.env import (
    EVAL_RANGES,
    NO_NOISE,
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
    scale_action,
    synthesize_serve,
    unscale_action,
)
from strokesim.physics import BallParams, step

ENV = StrokeEnv()
QUIET_ENV = StrokeEnv(noise=NO_NOISE)
TARGET = np.array([2.55, 0.0])


def make_hit(p, v, w=(0.0, 0.0, 0.0)):
    return HitState(p=np.array(p), v=np.array(v), w=np.array(w), target=TARGET.copy())


def play_stroke(env, hit, speed, beta_deg, gamma_deg=0.0):
    action = np.array([speed, math.radians(beta_deg), math.radians(gamma_deg)])
    return env.rollout(hit, env.racket_from_action(action, hit.p))


class TestRanges:
    def test_training_ranges_values(self):
        assert TRAIN_RANGES.p_y == (-0.60, 0.63)
        assert TRAIN_RANGES.v_x == (-6.00, -1.35)
        assert TRAIN_RANGES.w_y == (-299.99, 299.81)

    def test_evaluation_ranges_values(self):
        assert EVAL_RANGES.p_y == (-0.68, 0.68)
        assert EVAL_RANGES.v_x == (-5.94, -2.52)

    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError):
            StateRanges(
                p_y=(0.5, -0.5),
                p_z=(0, 1),
                v_x=(-1, 0),
                v_y=(-1, 1),
                v_z=(-1, 1),
                w_x=(-1, 1),
                w_y=(-1, 1),
                w_z=(-1, 1),
            )


class TestSampling:
    def test_samples_lie_on_hitting_plane(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            hit = ENV.sample_hit_state(rng)
            assert hit.p[0] == 0.675
            npt.assert_allclose(hit.target, TARGET)

    def test_degenerate_range_returns_constant(self):
        flat = StateRanges(
            p_y=(0.2, 0.2),
            p_z=(0.1, 0.1),
            v_x=(-3.0, -3.0),
            v_y=(0.0, 0.0),
            v_z=(0.0, 0.0),
            w_x=(0.0, 0.0),
            w_y=(0.0, 0.0),
            w_z=(0.0, 0.0),
        )
        hit = ENV.sample_hit_state(np.random.default_rng(1), ranges=flat)
        npt.assert_allclose(hit.p, [0.675, 0.2, 0.1])
        npt.assert_allclose(hit.v, [-3.0, 0.0, 0.0])

    def test_coverage_over_many_samples(self):
        rng = np.random.default_rng(2)
        samples = np.array(
            [np.concatenate([h.p[1:], h.v, h.w]) for h in (ENV.sample_hit_state(rng) for _ in range(10000))]
        )
        bounds = [
            TRAIN_RANGES.p_y,
            TRAIN_RANGES.p_z,
            TRAIN_RANGES.v_x,
            TRAIN_RANGES.v_y,
            TRAIN_RANGES.v_z,
            TRAIN_RANGES.w_x,
            TRAIN_RANGES.w_y,
            TRAIN_RANGES.w_z,
        ]
        for dim, (lo, hi) in enumerate(bounds):
            col = samples[:, dim]
            assert col.min() >= lo and col.max() <= hi
            assert (col.max() - col.min()) >= 0.95 * (hi - lo)


class TestObservation:
    def test_noise_free_observe_equals_normalize(self):
        hit = make_hit([0.675, 0.1, 0.2], [-4, 0.5, 1], [10, -50, 20])
        obs = QUIET_ENV.observe(hit, np.random.default_rng(0))
        npt.assert_allclose(obs, QUIET_ENV.normalize(hit))

    def test_range_boundary_maps_to_one(self):
        hit = make_hit([0.675, 0.63, 0.2], [-4, 0, 0])
        assert QUIET_ENV.normalize(hit)[3] == pytest.approx(1.0)

    def test_midpoint_maps_to_zero(self):
        hit = make_hit([0.675, 0.015, 0.2], [-4, 0, 0])
        assert QUIET_ENV.normalize(hit)[3] == pytest.approx(2 * (0.615 / 1.23) - 1, abs=1e-12)
        assert QUIET_ENV.normalize(hit)[3] == pytest.approx(0.0, abs=1e-12)

    def test_fixed_dimensions_map_to_zero(self):
        hit = make_hit([0.675, 0.1, 0.2], [-4, 0, 0])
        obs = QUIET_ENV.normalize(hit)
        npt.assert_allclose(obs[:3], 0.0)  # target x, target y, hitting plane x

    def test_observation_always_clamped(self):
        loud = StrokeEnv(noise=NoiseConfig(0.5, 3.0, 100.0))
        rng = np.random.default_rng(3)
        for _ in range(50):
            obs = loud.observe(loud.sample_hit_state(rng), rng)
            assert (obs >= -1.0).all() and (obs <= 1.0).all()

    def test_normalization_is_invertible_in_range(self):
        rng = np.random.default_rng(4)
        lo, hi = QUIET_ENV._norm_lo, QUIET_ENV._norm_hi
        for _ in range(20):
            hit = QUIET_ENV.sample_hit_state(rng)
            obs = QUIET_ENV.normalize(hit)
            raw = np.concatenate([hit.target, hit.p, hit.v, hit.w])
            span = hi - lo
            recon = np.where(span > 0, lo + (obs + 1.0) * 0.5 * span, raw)
            npt.assert_allclose(recon, raw, atol=1e-12)

    def test_perturb_is_seed_deterministic(self):
        hit = make_hit([0.675, 0.1, 0.2], [-4, 0.5, 1], [10, -50, 20])
        a = ENV.perturb(hit, np.random.default_rng(5))
        b = ENV.perturb(hit, np.random.default_rng(5))
        npt.assert_allclose(a.p, b.p)
        npt.assert_allclose(a.v, b.v)
        npt.assert_allclose(a.w, b.w)
        assert not np.allclose(a.p, hit.p)


class TestActionScaling:
    def test_round_trip_bijection(self):
        bounds = ActionBounds()
        rng = np.random.default_rng(6)
        for _ in range(100):
            a = rng.uniform(-1, 1, 3)
            npt.assert_allclose(unscale_action(scale_action(a, bounds), bounds), a, atol=1e-12)

    def test_bounds_map_exactly(self):
        bounds = ActionBounds()
        phys = scale_action(np.array([1.0, 1.0, -1.0]), bounds)
        npt.assert_allclose(phys, [2.0, math.radians(50), -math.radians(50)])
        phys = scale_action(np.array([-1.0, 0.0, 0.0]), bounds)
        npt.assert_allclose(phys, [0.0, 0.0, 0.0])


class TestRacketFromAction:
    def test_centre_tracks_predicted_position_and_roll_tracks_y(self):
        racket = ENV.racket_from_action(np.array([0.5, 0.1, -0.2]), np.array([0.675, 0.0, 0.2]))
        assert racket.angles[0] == 0.0
        npt.assert_allclose(racket.center, [0.675, 0.0, 0.2])
        npt.assert_allclose(racket.vel, [0.5, 0.0, 0.0])

    def test_roll_angle_scales_with_lateral_offset(self):
        racket = ENV.racket_from_action(np.array([0.5, 0.0, 0.0]), np.array([0.675, 0.38125, 0.2]))
        assert racket.angles[0] == pytest.approx(math.radians(12.5), rel=1e-12)

    def test_limit_action(self):
        phys = scale_action(np.array([1.0, 1.0, -1.0]), ENV.bounds)
        racket = ENV.racket_from_action(phys, np.array([0.675, 0.0, 0.2]))
        npt.assert_allclose(racket.vel, [2.0, 0.0, 0.0])
        assert racket.angles[1] == pytest.approx(math.radians(50))
        assert racket.angles[2] == pytest.approx(-math.radians(50))


class TestReward:
    def test_perfect_return(self):
        outcome = EpisodeOutcome.returned(2.55, 0.0, 0.173)
        npt.assert_allclose(reward(outcome, TARGET), [1.0, 1.0, 1.0])
        assert reward_1d(outcome, TARGET) == pytest.approx(1.0)

    def test_failure_is_zero(self):
        outcome = EpisodeOutcome.fail("miss")
        npt.assert_allclose(reward(outcome, TARGET), [0.0, 0.0, 0.0])
        assert reward_1d(outcome, TARGET) == 0.0

    def test_shaped_components(self):
        outcome = EpisodeOutcome.returned(2.35, 0.1, 0.273)
        expected = [math.exp(-0.2), math.exp(-0.1), math.exp(-0.1)]
        npt.assert_allclose(reward(outcome, TARGET), expected, rtol=1e-12)
        npt.assert_allclose(reward(outcome, TARGET), [0.81873, 0.90484, 0.90484], rtol=1e-4)

    def test_scalar_reward_value(self):
        # landing 0.2 m off at clearance error 0.1 m with k = 0.5
        outcome = EpisodeOutcome.returned(2.75, 0.0, 0.273)
        assert reward_1d(outcome, TARGET, k=0.5) == pytest.approx(math.exp(-0.05), rel=1e-12)
        assert reward_1d(outcome, TARGET, k=0.5) == pytest.approx(0.95123, rel=1e-4)

    def test_scalar_reward_rejects_bad_k(self):
        with pytest.raises(ValueError):
            reward_1d(EpisodeOutcome.fail("miss"), TARGET, k=0.0)

    def test_monotone_in_each_error(self):
        base = reward(EpisodeOutcome.returned(2.55, 0.0, 0.173), TARGET)
        worse_x = reward(EpisodeOutcome.returned(2.75, 0.0, 0.173), TARGET)
        worse_y = reward(EpisodeOutcome.returned(2.55, 0.2, 0.173), TARGET)
        worse_h = reward(EpisodeOutcome.returned(2.55, 0.0, 0.373), TARGET)
        assert worse_x[0] < base[0] and worse_x[1] == base[1]
        assert worse_y[1] < base[1] and worse_y[0] == base[0]
        assert worse_h[2] < base[2]

    @settings(deadline=None, max_examples=100)
    @given(
        x=st.floats(2.17, 3.54),
        y=st.floats(-0.76, 0.76),
        h=st.floats(0.173, 2.0),
    )
    def test_components_in_unit_interval(self, x, y, h):
        r = reward(EpisodeOutcome.returned(x, y, h), TARGET)
        assert (r >= 0).all() and (r <= 1).all()


class TestOutcomeInvariants:
    def test_success_requires_landing_and_clearance(self):
        with pytest.raises(ValueError):
            EpisodeOutcome(success=True)
        with pytest.raises(ValueError):
            EpisodeOutcome(success=True, landing=np.array([2.5, 0.0]))

    def test_failure_must_not_carry_landing(self):
        with pytest.raises(ValueError):
            EpisodeOutcome(success=False, failure_reason="miss", landing=np.array([2.5, 0.0]))

    def test_unknown_reason_rejected(self):
        with pytest.raises(ValueError):
            EpisodeOutcome(success=False, failure_reason="exploded")


class TestRollout:
    def test_miss_when_racket_centred_far_away(self):
        hit = make_hit([0.675, 0.0, 0.15], [-4, 0, 0])
        racket = ENV.racket_from_action(np.array([0.5, 0.0, 0.0]), np.array([0.675, 0.10, 0.15]))
        outcome = ENV.rollout(hit, racket)
        assert outcome.failure_reason == "miss"

    def test_flat_low_stroke_falls_short(self):
        # a flat stroke from 0.15 m cannot carry 1.495 m to the net plane:
        # even without drag the ball drops to the table after ~0.8 m
        outcome = play_stroke(ENV, make_hit([0.675, 0.0, 0.15], [-4, 0, 0]), 0.5, 0.0)
        assert outcome.failure_reason == "own_side"

    def test_lofted_stroke_returns_successfully(self):
        outcome = play_stroke(ENV, make_hit([0.675, 0.0, 0.15], [-4, 0, 0]), 0.5, -20.0)
        assert outcome.success
        assert ENV.table.net_x <= outcome.landing[0] <= ENV.table.far_edge_x
        assert abs(outcome.landing[1]) <= ENV.table.width / 2
        assert outcome.net_clearance >= ENV.table.net_height

    def test_steep_downward_exit_lands_own_side(self):
        outcome = play_stroke(ENV, make_hit([0.675, 0.0, 0.30], [-4, 0, -3]), 0.5, 0.0)
        assert outcome.failure_reason == "own_side"

    def test_extreme_angles_send_ball_backwards(self):
        outcome = play_stroke(ENV, make_hit([0.675, 0.0, 0.15], [-4, 0, 0]), 0.0, 50.0, 50.0)
        assert outcome.failure_reason == "backward"

    def test_fast_flat_stroke_hits_net(self):
        outcome = play_stroke(ENV, make_hit([0.675, 0.0, 0.05], [-5, 0, 0]), 1.2, -7.0)
        assert outcome.failure_reason == "into_net"

    def test_slow_below_table_ball_times_out(self):
        # outgoing x velocity is nearly cancelled, the ball starts below the
        # table surface and never rises above it, so no event ever fires
        outcome = play_stroke(ENV, make_hit([0.675, 0.0, -0.005], [-4, 0, -0.5]), 0.0, 0.0, 42.0)
        assert outcome.failure_reason == "timeout"

    def test_big_lob_overshoots_the_table(self):
        outcome = play_stroke(ENV, make_hit([0.675, 0.0, 0.34], [-6, 0, 2]), 2.0, -30.0)
        assert outcome.failure_reason == "off_table"

    def test_rollout_is_deterministic(self):
        hit = make_hit([0.675, 0.1, 0.2], [-4.5, 0.8, 1.0], [30, -200, 40])
        racket = ENV.racket_from_action(np.array([0.8, math.radians(-15), math.radians(5)]), hit.p)
        a = ENV.rollout(hit, racket)
        b = ENV.rollout(hit, racket)
        assert a.success == b.success and a.failure_reason == b.failure_reason
        if a.success:
            npt.assert_array_equal(a.landing, b.landing)
            assert a.net_clearance == b.net_clearance

    def test_success_invariants_over_random_episodes(self):
        rng = np.random.default_rng(7)
        for i in range(200):
            ctx = ENV.sample_episode(np.random.default_rng((70, i)))
            result = ENV.play(ctx, rng.uniform(-1, 1, 3))
            outcome = result.outcome
            if outcome.success:
                assert ENV.table.net_x - 1e-9 <= outcome.landing[0] <= ENV.table.far_edge_x + 1e-9
                assert abs(outcome.landing[1]) <= ENV.table.width / 2 + 1e-9
                assert outcome.net_clearance >= ENV.table.net_height
                assert (result.reward_vec > 0).all()
            else:
                npt.assert_array_equal(result.reward_vec, 0.0)
                assert result.reward_1d == 0.0


class TestMirrorSymmetry:
    def test_mirrored_transition_earns_identical_reward(self):
        # the mirrored (state, action) pair must be a real episode of the
        # same environment with exactly the same reward vector
        from strokesim.env import StrokeContext

        for i in range(50):
            rng = np.random.default_rng((55, i))
            ctx = ENV.sample_episode(rng)
            a = rng.uniform(-1, 1, 3)
            res = ENV.play(ctx, a)

            m = ctx.measured
            h = ctx.hit
            flip = lambda s: HitState(
                p=np.array([s.p[0], -s.p[1], s.p[2]]),
                v=np.array([s.v[0], -s.v[1], s.v[2]]),
                w=np.array([-s.w[0], s.w[1], -s.w[2]]),
                target=s.target.copy(),
            )
            ctx_m = StrokeContext(hit=flip(h), measured=flip(m), obs=ENV.normalize(flip(m)))
            a_m = np.array([a[0], a[1], -a[2]])
            res_m = ENV.play(ctx_m, a_m)
            assert res_m.success == res.success
            npt.assert_allclose(res_m.reward_vec, res.reward_vec, atol=1e-9)

    def test_mirror_transition_matches_manual_flip(self):
        rng = np.random.default_rng(56)
        ctx = ENV.sample_episode(rng)
        a = rng.uniform(-1, 1, 3)
        obs_m, a_m = ENV.mirror_transition(ctx, a)
        assert (obs_m >= -1).all() and (obs_m <= 1).all()
        npt.assert_allclose(a_m, [a[0], a[1], -a[2]])

    def test_mirror_refused_for_off_centre_target(self):
        env = StrokeEnv(target=(2.55, 0.3))
        ctx = env.sample_episode(np.random.default_rng(57))
        assert env.mirror_transition(ctx, np.zeros(3)) is None


class TestBatchPlayout:
    def test_batch_matches_scalar_playout(self):
        ctxs, actions = [], []
        for i in range(200):
            rng = np.random.default_rng((80, i))
            ctxs.append(ENV.sample_episode(rng))
            actions.append(rng.uniform(-1, 1, 3))
        actions = np.array(actions)
        batch = ENV.play_many(ctxs, actions)
        for ctx, a, res_b in zip(ctxs, actions, batch):
            res_s = ENV.play(ctx, a)
            assert res_b.success == res_s.success
            assert res_b.outcome.failure_reason == res_s.outcome.failure_reason
            npt.assert_allclose(res_b.reward_vec, res_s.reward_vec, atol=1e-9)
            if res_b.success:
                npt.assert_allclose(res_b.outcome.landing, res_s.outcome.landing, atol=1e-9)

    def test_batch_rejects_wrong_action_shape(self):
        ctxs = [ENV.sample_episode(np.random.default_rng(0))]
        with pytest.raises(ValueError):
            ENV.play_many(ctxs, np.zeros((2, 3)))


class TestSynthesizeServe:
    def test_round_trip_to_hitting_state(self):
        hit = make_hit([0.675, 0.1, 0.25], [-4.2, 0.5, -1.0], [20, -150, 40])
        serve = synthesize_serve(hit, ENV.ball, T=0.25, dt=1e-3)
        state = serve
        for _ in range(250):
            state = step(state, 1e-3, ENV.ball)
        npt.assert_allclose(state.p, hit.p, atol=1e-6)
        npt.assert_allclose(state.v, hit.v, atol=1e-6)

    def test_zero_duration_is_the_hit_itself(self):
        hit = make_hit([0.675, 0.1, 0.25], [-4.2, 0.5, -1.0])
        serve = synthesize_serve(hit, ENV.ball, T=0.0)
        npt.assert_allclose(serve.p, hit.p)

    def test_low_hit_rejected(self):
        hit = make_hit([0.675, 0.0, -0.01], [-4.0, 0.0, -0.5])
        with pytest.raises(ValueError):
            synthesize_serve(hit, ENV.ball, T=0.25)


class TestTableGeometry:
    def test_net_and_far_edge(self):
        table = TableGeometry()
        assert table.net_x == pytest.approx(0.80 + 2.74 / 2)
        assert table.far_edge_x == pytest.approx(0.80 + 2.74)

    def test_env_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            StrokeEnv(dt=0.0)
