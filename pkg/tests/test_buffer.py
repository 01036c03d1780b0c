"""Trajectory replay buffer: capacity accounting, FIFO eviction, sampling."""

import numpy as np
import pytest

from ascii_me.buffer import TrajectoryBuffer


def marked(buffer_horizon, state_dim, action_dim, mark, batch=1):
    """Trajectory batch whose every array is filled with ``mark``."""
    states = np.full((batch, buffer_horizon, state_dim), float(mark))
    actions = np.full((batch, buffer_horizon, action_dim), float(mark))
    returns = np.full((batch, buffer_horizon), float(mark))
    return states, actions, returns


class TestCapacity:
    def test_transitions_to_trajectories(self):
        buf = TrajectoryBuffer(4, 2, horizon=100, capacity_transitions=1000)
        assert buf.capacity == 10
        assert len(buf) == 0

    def test_too_small_capacity(self):
        with pytest.raises(ValueError):
            TrajectoryBuffer(4, 2, horizon=100, capacity_transitions=50)

    def test_length_saturates(self):
        buf = TrajectoryBuffer(2, 1, horizon=5, capacity_transitions=15)
        for mark in range(5):
            buf.insert(*marked(5, 2, 1, mark))
        assert buf.capacity == 3
        assert len(buf) == 3
        assert buf.transitions_stored == 15


class TestEviction:
    def test_fifo_keeps_newest(self):
        buf = TrajectoryBuffer(2, 1, horizon=4, capacity_transitions=12)
        for mark in range(4):  # capacity 3: mark 0 must fall out
            buf.insert(*marked(4, 2, 1, mark))
        kept = {int(buf.states[i, 0, 0]) for i in range(len(buf))}
        assert kept == {1, 2, 3}

    def test_oversized_insert_keeps_tail(self):
        buf = TrajectoryBuffer(2, 1, horizon=4, capacity_transitions=8)
        states = np.zeros((5, 4, 2))
        states[:, :, :] = np.arange(5)[:, None, None]
        actions = np.zeros((5, 4, 1))
        returns = np.zeros((5, 4))
        buf.insert(states, actions, returns)
        kept = {int(buf.states[i, 0, 0]) for i in range(len(buf))}
        assert kept == {3, 4}


class TestSampling:
    def test_shapes_and_membership(self):
        buf = TrajectoryBuffer(3, 2, horizon=6, capacity_transitions=60)
        for mark in (1, 2, 3):
            buf.insert(*marked(6, 3, 2, mark))
        states, actions, returns = buf.sample(40, np.random.default_rng(0))
        assert states.shape == (40, 6, 3)
        assert actions.shape == (40, 6, 2)
        assert returns.shape == (40, 6)
        assert set(np.unique(states).tolist()) <= {1.0, 2.0, 3.0}
        # each sampled row is one coherent trajectory
        assert np.all(states[:, 0, 0] == actions[:, 0, 0])
        assert np.all(states[:, 0, 0] == returns[:, 0])

    def test_deterministic(self):
        buf = TrajectoryBuffer(2, 1, horizon=3, capacity_transitions=30)
        for mark in range(6):
            buf.insert(*marked(3, 2, 1, mark))
        a = buf.sample(20, np.random.default_rng(5))[0]
        b = buf.sample(20, np.random.default_rng(5))[0]
        assert np.array_equal(a, b)

    def test_covers_all_entries(self):
        buf = TrajectoryBuffer(2, 1, horizon=3, capacity_transitions=30)
        for mark in range(10):
            buf.insert(*marked(3, 2, 1, mark))
        states, _, _ = buf.sample(500, np.random.default_rng(1))
        assert set(states[:, 0, 0].tolist()) == set(float(m) for m in range(10))

    def test_empty_raises(self):
        buf = TrajectoryBuffer(2, 1, horizon=3, capacity_transitions=30)
        with pytest.raises(ValueError):
            buf.sample(1, np.random.default_rng(0))


class TestValidation:
    def test_shape_mismatch(self):
        buf = TrajectoryBuffer(3, 2, horizon=6, capacity_transitions=60)
        with pytest.raises(ValueError):
            buf.insert(np.zeros((2, 6, 4)), np.zeros((2, 6, 2)), np.zeros((2, 6)))
        with pytest.raises(ValueError):
            buf.insert(np.zeros((2, 5, 3)), np.zeros((2, 5, 2)), np.zeros((2, 5)))

    def test_nonfinite_rejected(self):
        buf = TrajectoryBuffer(2, 1, horizon=3, capacity_transitions=30)
        states, actions, returns = marked(3, 2, 1, 1)
        returns[0, 1] = np.inf
        with pytest.raises(ValueError):
            buf.insert(states, actions, returns)

    def test_float32_storage(self):
        buf = TrajectoryBuffer(2, 1, horizon=3, capacity_transitions=30,
                               dtype=np.float32)
        buf.insert(*marked(3, 2, 1, 1))
        states, actions, returns = buf.sample(2, np.random.default_rng(0))
        assert states.dtype == np.float32
        assert actions.dtype == np.float32
        assert returns.dtype == np.float32
