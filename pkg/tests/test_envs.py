"""Benchmark environments: dynamics oracles, rollouts, and descriptors."""

import math

import numpy as np
import pytest

from ascii_me.envs import (
    ArmReachEnv,
    GaitDriveEnv,
    PointTrapEnv,
    make_env,
    rollout,
    rollout_batch,
)
from ascii_me.policy import PolicySpec, init_genotype


class TestRegistry:
    def test_known_names(self):
        for name in ("point_trap_omni", "arm_omni", "gait_uni"):
            env = make_env(name)
            assert env.spec.name == name

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            make_env("cartpole")

    def test_horizon_override(self):
        assert make_env("point_trap_omni", horizon=7).spec.horizon == 7


class TestSpecs:
    def test_dimensions(self):
        point = make_env("point_trap_omni")
        assert (point.spec.state_dim, point.spec.action_dim) == (5, 2)
        arm = make_env("arm_omni")
        assert (arm.spec.state_dim, arm.spec.action_dim) == (6, 3)
        gait = make_env("gait_uni")
        assert (gait.spec.state_dim, gait.spec.action_dim) == (3, 2)

    def test_descriptor_bounds_shape(self):
        for name in ("point_trap_omni", "arm_omni", "gait_uni"):
            env = make_env(name)
            assert len(env.spec.descriptor_bounds) == env.spec.descriptor_dim
            for lo, hi in env.spec.descriptor_bounds:
                assert lo < hi


class TestInitialStates:
    def test_deterministic(self):
        env = make_env("arm_omni")
        a = env.initial_states(6, np.random.default_rng(3))
        b = env.initial_states(6, np.random.default_rng(3))
        assert np.array_equal(a, b)

    def test_point_velocities_zero_and_alive(self):
        env = make_env("point_trap_omni")
        states = env.initial_states(8, np.random.default_rng(0))
        assert np.array_equal(states[:, 2:4], np.zeros((8, 2)))
        assert np.array_equal(states[:, 4], np.ones(8))
        assert np.all(np.abs(states[:, :2] - env.start) < 1.0)

    def test_arm_speeds_zero(self):
        states = make_env("arm_omni").initial_states(8, np.random.default_rng(0))
        assert np.array_equal(states[:, 3:], np.zeros((8, 3)))

    def test_gait_phase_origin(self):
        states = make_env("gait_uni").initial_states(8, np.random.default_rng(0))
        assert np.array_equal(states[:, 1], np.zeros(8))
        assert np.array_equal(states[:, 2], np.ones(8))
        assert np.all(np.abs(states[:, 0]) <= 1.0)


class TestPointTrap:
    def test_three_step_trace(self):
        # north-west of the start is open space: pure integrator dynamics
        env = PointTrapEnv()
        state = np.array([[-4.2, 0.0, 0.0, 0.0, 1.0]])
        action = np.array([[-0.6, 0.8]])
        px, py, vx, vy = -4.2, 0.0, 0.0, 0.0
        for _ in range(3):
            state, reward = env.step(state, action)
            vx, vy = 0.9 * vx + 0.15 * -0.6, 0.9 * vy + 0.15 * 0.8
            px, py = px + 0.15 * vx, py + 0.15 * vy
            assert np.allclose(state[0], [px, py, vx, vy, 1.0], atol=1e-15)
            assert reward[0] == pytest.approx(1.0 - 0.5 * 1.0, abs=1e-15)

    def test_action_clip(self):
        env = PointTrapEnv()
        state = np.array([[-4.2, 0.0, 0.0, 0.0, 1.0]])
        big, unit = env.step(state, np.array([[-5.0, 0.0]]))
        ref, _ = env.step(state, np.array([[-1.0, 0.0]]))
        assert np.array_equal(big, ref)
        assert unit[0] == pytest.approx(0.5)  # clipped action costs 1 - 0.5*1

    def test_velocity_clip(self):
        # drag keeps steady-state speed at 1.5, so only a handcrafted
        # overspeed state can reach the safety clip
        env = PointTrapEnv()
        state = np.array([[-4.5, 4.0, 2.4, 0.0, 1.0]])
        nxt, _ = env.step(state, np.array([[1.0, 0.0]]))
        assert nxt[0, 2] == pytest.approx(2.0)

    def test_drag_caps_sustained_speed(self):
        # westward from the start: no walls in the way, only drag limits speed
        env = PointTrapEnv()
        state = np.array([[-4.2, 0.0, 0.0, 0.0, 1.0]])
        for _ in range(200):
            state, _ = env.step(state, np.array([[-1.0, 0.0]]))
        assert state[0, 4] == 1.0
        assert state[0, 2] == pytest.approx(-1.5, abs=1e-8)
        assert state[0, 2] >= -1.5

    def test_position_box(self):
        # the outer boundary clamps position without harming the mass
        env = PointTrapEnv()
        state = np.array([[4.99, 3.0, 2.0, 0.0, 1.0]])
        nxt, reward = env.step(state, np.array([[0.0, 0.0]]))
        assert nxt[0, 0] == pytest.approx(5.0)
        assert nxt[0, 4] == 1.0
        assert reward[0] == 1.0

    def test_wall_contact_kills(self):
        env = PointTrapEnv()
        state = np.array([[-2.4, 1.15, 0.0, 1.0, 1.0]])
        nxt, reward = env.step(state, np.array([[0.0, 0.0]]))
        # crossing the pocket's top arm freezes the mass at the crash site
        assert np.allclose(nxt[0], [-2.4, 1.15, 0.0, 0.0, 0.0])
        assert reward[0] == 0.0

    def test_dead_stay_dead(self):
        env = PointTrapEnv()
        state = np.array([[-2.4, 1.15, 0.0, 0.0, 0.0]])
        for _ in range(3):
            state, reward = env.step(state, np.array([[1.0, 1.0]]))
            assert np.allclose(state[0], [-2.4, 1.15, 0.0, 0.0, 0.0])
            assert reward[0] == 0.0

    def test_wall_span_is_finite(self):
        # the same upward motion east of the pocket span touches nothing
        env = PointTrapEnv()
        state = np.array([[-1.0, 1.15, 0.0, 1.0, 1.0]])
        nxt, reward = env.step(state, np.array([[0.0, 0.0]]))
        assert nxt[0, 1] > 1.2
        assert nxt[0, 4] == 1.0
        assert reward[0] == 1.0

    def test_pocket_back_kills_eastward_rush(self):
        env = PointTrapEnv()
        state = np.array([[-1.75, 0.0, 1.5, 0.0, 1.0]])
        nxt, _ = env.step(state, np.array([[0.0, 0.0]]))
        assert np.allclose(nxt[0], [-1.75, 0.0, 0.0, 0.0, 0.0])

    def test_divider_slot_passes(self):
        # eastward through the first divider at slot height survives
        env = PointTrapEnv()
        state = np.array([[-0.65, 1.7, 1.5, 0.0, 1.0]])
        nxt, _ = env.step(state, np.array([[0.0, 0.0]]))
        assert nxt[0, 0] > -0.5
        assert nxt[0, 4] == 1.0

    def test_divider_blocks_above_slot(self):
        # the identical motion above the slot is fatal
        env = PointTrapEnv()
        state = np.array([[-0.65, 3.0, 1.5, 0.0, 1.0]])
        nxt, _ = env.step(state, np.array([[0.0, 0.0]]))
        assert np.allclose(nxt[0], [-0.65, 3.0, 0.0, 0.0, 0.0])

    def test_descriptor_is_clipped_position(self):
        env = PointTrapEnv()
        finals = np.array([[0.5, -2.0, 1.0, 1.0, 1.0],
                           [6.0, 7.0, 0.0, 0.0, 0.0]])
        desc = env.descriptor(finals, np.zeros((2, env.spec.horizon, 2)))
        assert np.allclose(desc, [[0.5, -2.0], [5.0, 5.0]])


class TestArmReach:
    def test_three_step_trace(self):
        env = ArmReachEnv()
        state = np.zeros((1, 6))
        action = np.ones((1, 3))
        theta, omega = 0.0, 0.0
        for _ in range(3):
            state, reward = env.step(state, action)
            omega = 0.95 * omega + 0.1 * 1.0
            theta = theta + 0.1 * omega
            assert np.allclose(state[0, :3], theta, atol=1e-15)
            assert np.allclose(state[0, 3:], omega, atol=1e-15)
            assert reward[0] == pytest.approx(0.0, abs=1e-15)

    def test_reward_zero_torque(self):
        env = ArmReachEnv()
        _, reward = env.step(np.zeros((1, 6)), np.zeros((1, 3)))
        assert reward[0] == 1.0

    def test_reward_partial_torque(self):
        env = ArmReachEnv()
        _, reward = env.step(np.zeros((1, 6)), np.array([[0.5, 0.0, 0.0]]))
        assert reward[0] == pytest.approx(1.0 - 0.25 / 3.0)

    def test_descriptor_straight_arm(self):
        env = ArmReachEnv()
        finals = np.zeros((1, 6))
        desc = env.descriptor(finals, np.zeros((1, env.spec.horizon, 3)))
        assert np.allclose(desc[0], [1.0, 0.0], atol=1e-12)

    def test_descriptor_right_angle(self):
        env = ArmReachEnv()
        finals = np.zeros((1, 6))
        finals[0, 0] = math.pi / 2  # first joint up, others straight
        desc = env.descriptor(finals, np.zeros((1, env.spec.horizon, 3)))
        assert np.allclose(desc[0], [0.0, 1.0], atol=1e-12)

    def test_descriptor_curl(self):
        env = ArmReachEnv()
        theta = np.array([0.3, -0.2, 0.5])
        finals = np.concatenate([theta, np.zeros(3)])[None]
        cum = np.cumsum(theta)
        want = [np.sum(np.cos(cum)) / 3.0, np.sum(np.sin(cum)) / 3.0]
        desc = env.descriptor(finals, np.zeros((1, env.spec.horizon, 3)))
        assert np.allclose(desc[0], want, atol=1e-12)


class TestGaitDrive:
    def test_three_step_trace(self):
        env = GaitDriveEnv()
        state = np.array([[0.0, 0.0, 1.0]])
        action = np.ones((1, 2))
        v = 0.0
        for t in range(1, 4):
            state, reward = env.step(state, action)
            v = min(1.0, 0.9 * v + 0.1 * 2.0)
            assert state[0, 0] == pytest.approx(v, abs=1e-15)
            assert np.allclose(
                state[0, 1:],
                [math.sin(2 * math.pi * t / 20), math.cos(2 * math.pi * t / 20)],
                atol=1e-12,
            )
            assert reward[0] == pytest.approx(0.5 * v + 1.0 - 0.5, abs=1e-12)

    def test_speed_clip(self):
        env = GaitDriveEnv()
        state = np.array([[1.0, 0.0, 1.0]])
        nxt, _ = env.step(state, np.ones((1, 2)))
        assert nxt[0, 0] == 1.0

    def test_worst_case_reward_is_zero(self):
        env = GaitDriveEnv()
        state = np.array([[-1.0, 0.0, 1.0]])
        _, reward = env.step(state, np.array([[-1.0, -1.0]]))
        assert reward[0] == 0.0

    def test_duty_factor_descriptor(self):
        env = GaitDriveEnv(horizon=4)
        actions = np.zeros((1, 4, 2))
        actions[0, :, 0] = [0.6, -0.7, 0.4, 0.5]  # two strict exceedances
        actions[0, :, 1] = 0.9
        desc = env.descriptor(np.zeros((1, 3)), actions)
        assert np.allclose(desc[0], [0.5, 1.0])

    def test_state_norm_never_zero(self):
        env = GaitDriveEnv()
        states = env.initial_states(4, np.random.default_rng(2))
        rng = np.random.default_rng(3)
        for _ in range(50):
            states, _ = env.step(states, rng.uniform(-1, 1, size=(4, 2)))
            assert np.all(np.linalg.norm(states, axis=1) >= 0.99)


class TestRollouts:
    def test_shapes_and_validity(self):
        env = make_env("arm_omni", horizon=12)
        pspec = PolicySpec(6, 3, (8,))
        genos = np.stack([init_genotype(pspec, s) for s in range(5)])
        out = rollout_batch(env, pspec, genos, np.random.default_rng(0))
        assert out.states.shape == (5, 12, 6)
        assert out.actions.shape == (5, 12, 3)
        assert out.rewards.shape == (5, 12)
        assert out.fitness.shape == (5,)
        assert out.descriptors.shape == (5, 2)
        assert out.valid.all()

    def test_deterministic(self):
        env = make_env("point_trap_omni", horizon=20)
        pspec = PolicySpec(5, 2, (8,))
        genos = np.stack([init_genotype(pspec, s) for s in range(3)])
        a = rollout_batch(env, pspec, genos, np.random.default_rng(9))
        b = rollout_batch(env, pspec, genos, np.random.default_rng(9))
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.fitness, b.fitness)

    def test_zero_policy_point_fitness(self):
        # a motionless policy never hits a wall: full survival bonus
        env = make_env("point_trap_omni", horizon=30)
        pspec = PolicySpec(5, 2, (8,))
        genos = np.zeros((2, pspec.parameter_count))
        out = rollout_batch(env, pspec, genos, np.random.default_rng(1))
        assert np.array_equal(out.fitness, [30.0, 30.0])

    def test_crashed_rollout_keeps_crash_site(self):
        # a policy that always pushes east dies at the pocket's back wall
        # and its descriptor stays there for the rest of the episode
        env = make_env("point_trap_omni", horizon=60)
        pspec = PolicySpec(5, 2, ())
        geno = np.zeros(pspec.parameter_count)
        geno[-2] = 5.0  # x-action bias: tanh(5) ~ 1, hard east
        out = rollout_batch(env, pspec, geno[None], np.random.default_rng(3))
        assert out.valid[0]
        alive = out.states[0, :, 4]
        death = int(np.argmin(alive))
        assert alive[death] == 0.0 and alive[death - 1] == 1.0
        assert np.all(out.rewards[0, death:] == 0.0)
        assert np.all(out.states[0, death:, :2] == out.states[0, death, :2])
        assert out.descriptors[0, 0] == pytest.approx(
            out.states[0, death, 0], abs=1e-12)
        assert -1.9 < out.descriptors[0, 0] < -1.6  # at the back wall

    def test_zero_policy_gait_fitness(self):
        horizon = 25
        env = make_env("gait_uni", horizon=horizon)
        pspec = PolicySpec(3, 2, (8,))
        genos = np.zeros((1, pspec.parameter_count))
        rng = np.random.default_rng(5)
        v0 = env.initial_states(1, np.random.default_rng(5))[0, 0]
        out = rollout_batch(env, pspec, genos, rng)
        # with zero actions the speed decays geometrically from its start
        drift = 0.5 * v0 * sum(0.9 ** t for t in range(1, horizon + 1))
        assert out.fitness[0] == pytest.approx(horizon + drift, rel=1e-12)

    def test_scalar_matches_batch(self):
        env = make_env("gait_uni", horizon=15)
        pspec = PolicySpec(3, 2, (6,))
        geno = init_genotype(pspec, 7)
        one = rollout(env, pspec, geno, np.random.default_rng(11))
        many = rollout_batch(env, pspec, geno[None], np.random.default_rng(11))
        assert np.array_equal(one.states, many.states[0])
        assert one.fitness == many.fitness[0]
        assert np.array_equal(one.descriptor, many.descriptors[0])

    @pytest.mark.parametrize("name", ["point_trap_omni", "arm_omni", "gait_uni"])
    def test_rewards_and_descriptors_bounded(self, name):
        env = make_env(name, horizon=25)
        pspec = PolicySpec(env.spec.state_dim, env.spec.action_dim, (8,))
        rng = np.random.default_rng(13)
        genos = rng.normal(scale=2.0, size=(200, pspec.parameter_count))
        out = rollout_batch(env, pspec, genos, rng)
        assert out.valid.all()
        assert np.all(out.rewards >= 0.0)
        assert np.all(np.abs(out.actions) <= 1.0)
        lows = np.array([b[0] for b in env.spec.descriptor_bounds])
        highs = np.array([b[1] for b in env.spec.descriptor_bounds])
        assert np.all(out.descriptors >= lows)
        assert np.all(out.descriptors <= highs)

    def test_nonfinite_genotype_flagged(self):
        env = make_env("point_trap_omni", horizon=10)
        pspec = PolicySpec(5, 2, (6,))
        good = init_genotype(pspec, 0)
        bad = good.copy()
        bad[3] = np.nan
        both = rollout_batch(env, pspec, np.stack([good, bad]),
                             np.random.default_rng(2))
        solo = rollout_batch(env, pspec, good[None], np.random.default_rng(2))
        assert both.valid[0] and not both.valid[1]
        assert both.fitness[1] == 0.0
        assert np.array_equal(both.rewards[1], np.zeros(10))
        assert np.isfinite(both.states[1]).all()
        assert np.isfinite(both.descriptors[1]).all()
        # the healthy member's rollout is untouched by its bad neighbour
        assert np.array_equal(both.states[0], solo.states[0])
        assert both.fitness[0] == solo.fitness[0]

    def test_float32_passthrough(self):
        env = make_env("gait_uni", horizon=8)
        pspec = PolicySpec(3, 2, (6,))
        genos = init_genotype(pspec, 0, dtype=np.float32)[None]
        out = rollout_batch(env, pspec, genos, np.random.default_rng(0))
        assert out.actions.dtype == np.float32
        assert out.states.dtype == np.float32
        assert out.fitness.dtype == np.float64
