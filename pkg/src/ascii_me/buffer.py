"""Fixed-size FIFO store of whole evaluated trajectories.

Capacity is specified in transitions, the natural budget unit, and rounded
down to whole trajectories of the configured horizon.  Once full, inserting
evicts the oldest entries.  Sampling is uniform with replacement over what
is currently stored, returning coherent (states, actions, returns) rows.
"""

from __future__ import annotations

import numpy as np


class TrajectoryBuffer:
    def __init__(self, state_dim, action_dim, horizon,
                 capacity_transitions=1_024_000, dtype=np.float64):
        self.horizon = int(horizon)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        capacity = int(capacity_transitions) // self.horizon
        if capacity < 1:
            raise ValueError(
                f"capacity of {capacity_transitions} transitions does not fit "
                f"one trajectory of horizon {horizon}")
        self.capacity = capacity
        self.states = np.zeros((capacity, self.horizon, int(state_dim)),
                               dtype=dtype)
        self.actions = np.zeros((capacity, self.horizon, int(action_dim)),
                                dtype=dtype)
        self.returns = np.zeros((capacity, self.horizon), dtype=dtype)
        self._next = 0
        self._stored = 0

    def __len__(self):
        return self._stored

    @property
    def transitions_stored(self):
        return self._stored * self.horizon

    def insert(self, states, actions, returns):
        """Append a batch of trajectories, evicting the oldest when full."""
        states = np.asarray(states)
        actions = np.asarray(actions)
        returns = np.asarray(returns)
        want_s = (self.horizon, self.states.shape[2])
        want_a = (self.horizon, self.actions.shape[2])
        if (states.ndim != 3 or states.shape[1:] != want_s
                or actions.shape != (states.shape[0], *want_a)
                or returns.shape != (states.shape[0], self.horizon)):
            raise ValueError(
                f"expected states (batch, {want_s[0]}, {want_s[1]}), actions "
                f"(batch, {want_a[0]}, {want_a[1]}), returns (batch, "
                f"{self.horizon}); got {states.shape}, {actions.shape}, "
                f"{returns.shape}")
        for name, arr in (("states", states), ("actions", actions),
                          ("returns", returns)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contain non-finite values")

        batch = states.shape[0]
        if batch > self.capacity:
            # only the newest entries could survive anyway
            states = states[-self.capacity:]
            actions = actions[-self.capacity:]
            returns = returns[-self.capacity:]
            batch = self.capacity
        first = min(batch, self.capacity - self._next)
        stop = self._next + first
        self.states[self._next:stop] = states[:first]
        self.actions[self._next:stop] = actions[:first]
        self.returns[self._next:stop] = returns[:first]
        if first < batch:  # wrap around to the start of the ring
            rest = batch - first
            self.states[:rest] = states[first:]
            self.actions[:rest] = actions[first:]
            self.returns[:rest] = returns[first:]
        self._next = (self._next + batch) % self.capacity
        self._stored = min(self._stored + batch, self.capacity)

    def sample(self, count, rng):
        """Uniform-with-replacement draw of stored trajectories."""
        if self._stored == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._stored, size=count)
        return self.states[idx], self.actions[idx], self.returns[idx]
