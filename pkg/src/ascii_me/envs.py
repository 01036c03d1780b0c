"""Benchmark tasks for archive-based neuroevolution at desk scale.

Three small continuous-control tasks share one contract: a fixed episode
horizon, batched deterministic dynamics, actions clipped to [-1, 1] before
use, per-step rewards that are never negative, and a low-dimensional
behaviour descriptor with declared bounds.  Non-negative rewards keep an
episode's fitness (the undiscounted reward sum) directly comparable across
policies of the same task.

The ``_omni`` suffix marks tasks whose descriptor is a final position the
policy can steer anywhere (omnidirectional); ``_uni`` marks the locomotion
task where the descriptor characterizes how the policy moves, not where.

- ``point_trap_omni``: a planar point mass in a walled room where touching
  a wall ends the episode's motion and its income.  A pocket sits directly
  in front of the start and two slotted dividers partition the room, so the
  descriptor -- the final position -- only reaches the far chambers by
  threading the slots.
- ``arm_omni``: a torque-controlled planar arm.  The descriptor is the
  final fingertip position; the reward favours low effort.
- ``gait_uni``: a one-dimensional runner with two actuators and a phase
  clock.  The descriptor is each actuator's duty factor, the fraction of
  steps it spends engaged, so different gaits land in different cells even
  when speeds match.

Environments are plain classes; ``make_env`` builds one by name.  Rollouts
record the state each action was computed in, the executed (clipped)
actions, and the per-step rewards, which is exactly what the variation
operators and replay storage consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .policy import forward_pop


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    horizon: int
    descriptor_dim: int
    descriptor_bounds: tuple  # ((low, high), ...) per descriptor axis


@dataclass
class Rollout:
    """One episode: the state seen by each action, as-executed actions,
    rewards, and the summary values derived from them."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    fitness: float
    descriptor: np.ndarray
    valid: bool


@dataclass
class BatchRollouts:
    states: np.ndarray       # (batch, horizon, state_dim)
    actions: np.ndarray      # (batch, horizon, action_dim)
    rewards: np.ndarray      # (batch, horizon)
    fitness: np.ndarray      # (batch,)
    descriptors: np.ndarray  # (batch, descriptor_dim)
    valid: np.ndarray        # (batch,) bool


class PointTrapEnv:
    """Point mass navigating a room of walls that are fatal to touch.

    State is [x, y, vx, vy, alive].  Acceleration commands integrate
    semi-implicitly: velocity decays by a drag factor and picks up the
    commanded acceleration (then a safety clip to a top speed), and the
    position moves with the new velocity.  Drag caps sustained speed at
    ``dt / (1 - drag)`` times the acceleration, so distant cells demand
    steady effort.

    Reward is a survival bonus minus an energy penalty: an alive step that
    touches no wall earns ``1 - 0.5 * |a|^2``; any other step earns 0.  A
    move whose segment crosses a wall clears the alive flag for the rest of
    the episode, freezing the mass where it stood with zero velocity -- the
    episode always runs the full horizon, but a dead policy collects nothing
    further and its descriptor (the final position) stays at the crash site.

    The layout makes reaching far cells a navigation problem.  The mass
    starts mid-west facing the open mouth of a pocket, so accelerating
    blindly forward is fatal at the pocket's back wall.  Two full-height
    dividers split the rest of the room, each pierced by one slot placed on
    opposite sides, so the chambers beyond are reachable only by threading
    an S-shaped route.  The outer boundary merely clamps position and is
    safe to press against.
    """

    _WALLS = (
        (-3.2, 1.2, -1.6, 1.2),    # pocket top arm
        (-3.2, -1.2, -1.6, -1.2),  # pocket bottom arm
        (-1.6, -1.2, -1.6, 1.2),   # pocket back
        (-0.5, -5.0, -0.5, 1.0),   # first divider, below its slot
        (-0.5, 2.4, -0.5, 5.0),    # first divider, above its slot
        (2.0, -1.0, 2.0, 5.0),     # second divider, above its slot
        (2.0, -5.0, 2.0, -2.4),    # second divider, below its slot
    )

    def __init__(self, horizon=130, init_noise=0.1, drag=0.9):
        self.dt = 0.15
        self.max_speed = 2.0
        self.bound = 5.0
        self.drag = float(drag)
        self.init_noise = float(init_noise)
        self.start = np.array([-4.2, 0.0])
        self.spec = EnvSpec(
            name="point_trap_omni",
            state_dim=5,
            action_dim=2,
            horizon=int(horizon),
            descriptor_dim=2,
            descriptor_bounds=((-5.0, 5.0), (-5.0, 5.0)),
        )

    def initial_states(self, batch, rng):
        states = np.zeros((batch, 5))
        states[:, :2] = self.start + self.init_noise * rng.standard_normal(
            (batch, 2))
        states[:, 4] = 1.0
        return states

    def step(self, states, actions):
        a = np.clip(actions, -1.0, 1.0)
        pos = states[..., :2]
        vel = states[..., 2:4]
        alive = states[..., 4] > 0.5
        new_vel = np.clip(self.drag * vel + self.dt * a,
                          -self.max_speed, self.max_speed)
        new_pos = pos + self.dt * new_vel
        hit = self._crosses_wall(pos, new_pos)
        dead = ~alive | hit
        new_pos = np.where(dead[:, None], pos, new_pos)
        new_vel = np.where(dead[:, None], 0.0, new_vel)
        new_pos = np.clip(new_pos, -self.bound, self.bound)
        reward = np.where(alive & ~hit, 1.0 - 0.5 * (a * a).sum(axis=-1), 0.0)
        out = np.concatenate(
            [new_pos, new_vel, (~dead)[:, None].astype(new_pos.dtype)],
            axis=-1)
        return out, reward

    def _crosses_wall(self, p, q):
        blocked = np.zeros(p.shape[0], dtype=bool)
        for x0, y0, x1, y1 in self._WALLS:
            if y0 == y1:
                denom = q[:, 1] - p[:, 1]
                crosses = (p[:, 1] - y0) * (q[:, 1] - y0) < 0
                safe = np.where(denom == 0, 1.0, denom)
                xc = p[:, 0] + (q[:, 0] - p[:, 0]) * (y0 - p[:, 1]) / safe
                blocked |= crosses & (xc >= x0) & (xc <= x1)
            else:
                denom = q[:, 0] - p[:, 0]
                crosses = (p[:, 0] - x0) * (q[:, 0] - x0) < 0
                safe = np.where(denom == 0, 1.0, denom)
                yc = p[:, 1] + (q[:, 1] - p[:, 1]) * (x0 - p[:, 0]) / safe
                blocked |= crosses & (yc >= y0) & (yc <= y1)
        return blocked

    def descriptor(self, final_states, actions):
        return np.clip(final_states[..., :2], -self.bound, self.bound)


class ArmReachEnv:
    """Planar arm with damped torque-controlled joints of equal length.

    State is the joint angles followed by the joint speeds.  Each step the
    speeds decay and pick up the commanded torque, then the angles integrate
    the new speeds.  Reward is ``1 - |torque|^2 / joints``, so staying still
    earns full reward.  The descriptor is the fingertip position; with link
    lengths summing to one it always lies in the unit disc.
    """

    def __init__(self, horizon=50, joints=3, init_noise=0.1):
        if joints < 1:
            raise ValueError("need at least one joint")
        self.joints = int(joints)
        self.dt = 0.1
        self.damping = 0.95
        self.torque_gain = 0.1
        self.init_noise = float(init_noise)
        self.spec = EnvSpec(
            name="arm_omni",
            state_dim=2 * self.joints,
            action_dim=self.joints,
            horizon=int(horizon),
            descriptor_dim=2,
            descriptor_bounds=((-1.0, 1.0), (-1.0, 1.0)),
        )

    def initial_states(self, batch, rng):
        states = np.zeros((batch, 2 * self.joints))
        states[:, :self.joints] = self.init_noise * rng.standard_normal(
            (batch, self.joints))
        return states

    def step(self, states, actions):
        tau = np.clip(actions, -1.0, 1.0)
        theta = states[..., :self.joints]
        omega = states[..., self.joints:]
        new_omega = self.damping * omega + self.torque_gain * tau
        new_theta = theta + self.dt * new_omega
        reward = 1.0 - (tau * tau).sum(axis=-1) / float(self.joints)
        return np.concatenate([new_theta, new_omega], axis=-1), reward

    def descriptor(self, final_states, actions):
        angles = np.cumsum(final_states[..., :self.joints], axis=-1)
        link = 1.0 / self.joints
        x = (link * np.cos(angles)).sum(axis=-1)
        y = (link * np.sin(angles)).sum(axis=-1)
        return np.clip(np.stack([x, y], axis=-1), -1.0, 1.0)


class GaitDriveEnv:
    """One-dimensional runner with two actuators and a shared phase clock.

    State is [speed, sin(phase), cos(phase)]; the phase advances by a fixed
    angle each step regardless of the actions, so the state never has zero
    norm.  Speed relaxes toward the summed actuator drive and reward
    pays for speed minus effort.  The descriptor is each actuator's duty
    factor: the fraction of steps its command magnitude exceeds a threshold.
    """

    def __init__(self, horizon=50, period=20, duty_threshold=0.5,
                 init_noise=0.1):
        if period < 2:
            raise ValueError("period must be at least 2 steps")
        self.period = int(period)
        self.duty_threshold = float(duty_threshold)
        self.init_noise = float(init_noise)
        angle = 2.0 * math.pi / self.period
        self._rot_sin = math.sin(angle)
        self._rot_cos = math.cos(angle)
        self.spec = EnvSpec(
            name="gait_uni",
            state_dim=3,
            action_dim=2,
            horizon=int(horizon),
            descriptor_dim=2,
            descriptor_bounds=((0.0, 1.0), (0.0, 1.0)),
        )

    def initial_states(self, batch, rng):
        states = np.zeros((batch, 3))
        states[:, 0] = np.clip(
            self.init_noise * rng.standard_normal(batch), -1.0, 1.0)
        states[:, 2] = 1.0
        return states

    def step(self, states, actions):
        a = np.clip(actions, -1.0, 1.0)
        v = states[..., 0]
        s = states[..., 1]
        c = states[..., 2]
        new_v = np.clip(0.9 * v + 0.1 * (a[..., 0] + a[..., 1]), -1.0, 1.0)
        new_s = s * self._rot_cos + c * self._rot_sin
        new_c = c * self._rot_cos - s * self._rot_sin
        reward = 0.5 * new_v + 1.0 - 0.25 * (a * a).sum(axis=-1)
        return np.stack([new_v, new_s, new_c], axis=-1), reward

    def descriptor(self, final_states, actions):
        duty = (np.abs(actions) > self.duty_threshold).mean(axis=-2)
        return np.clip(duty, 0.0, 1.0)


ENVIRONMENTS = {
    "point_trap_omni": PointTrapEnv,
    "arm_omni": ArmReachEnv,
    "gait_uni": GaitDriveEnv,
}


def make_env(name, **kwargs):
    """Build a registered environment by name."""
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(
            f"unknown environment '{name}'; choose from {sorted(ENVIRONMENTS)}"
        ) from None
    return cls(**kwargs)


def rollout_batch(env, policy_spec, genotypes, rng):
    """Run each genotype for the full horizon from a noisy initial state.

    Members whose trajectory turns non-finite (possible only with degenerate
    genotypes) come back flagged invalid: rewards and fitness zeroed, arrays
    zero-padded from the failure step, descriptor pinned inside bounds.
    Valid members are unaffected by invalid neighbours in the same batch.
    """
    genotypes = np.asarray(genotypes)
    if genotypes.ndim != 2 or genotypes.shape[1] != policy_spec.parameter_count:
        raise ValueError(
            f"genotypes must be (batch, {policy_spec.parameter_count}), "
            f"got {genotypes.shape}"
        )
    if (policy_spec.state_dim, policy_spec.action_dim) != (
            env.spec.state_dim, env.spec.action_dim):
        raise ValueError("policy and environment disagree on dimensions")

    batch = genotypes.shape[0]
    horizon = env.spec.horizon
    dtype = genotypes.dtype if genotypes.dtype.kind == "f" else np.float64
    states = env.initial_states(batch, rng).astype(dtype, copy=False)
    s_hist = np.empty((batch, horizon, env.spec.state_dim), dtype=dtype)
    a_hist = np.empty((batch, horizon, env.spec.action_dim), dtype=dtype)
    r_hist = np.empty((batch, horizon), dtype=dtype)
    failed_at = np.full(batch, -1)

    with np.errstate(invalid="ignore", over="ignore"):
        for t in range(horizon):
            s_hist[:, t] = states
            acts = np.clip(forward_pop(policy_spec, genotypes, states),
                           -1.0, 1.0)
            states, rewards = env.step(states, acts)
            a_hist[:, t] = acts
            r_hist[:, t] = rewards
            finite = (np.isfinite(acts).all(axis=1)
                      & np.isfinite(states).all(axis=1)
                      & np.isfinite(rewards))
            fresh = ~finite & (failed_at < 0)
            failed_at[fresh] = t
        descriptors = np.asarray(env.descriptor(states, a_hist),
                                 dtype=np.float64)

    valid = failed_at < 0
    fitness = r_hist.sum(axis=1, dtype=np.float64)
    if not valid.all():
        lows = np.array([lo for lo, _ in env.spec.descriptor_bounds])
        highs = np.array([hi for _, hi in env.spec.descriptor_bounds])
        for b in np.nonzero(~valid)[0]:
            t = failed_at[b]
            a_hist[b, t:] = 0.0
            s_hist[b, t + 1:] = 0.0
            r_hist[b] = 0.0
        fitness[~valid] = 0.0
        descriptors[~valid] = np.clip(0.0, lows, highs)

    return BatchRollouts(s_hist, a_hist, r_hist, fitness, descriptors, valid)


def rollout(env, policy_spec, genotype, rng):
    """Single-genotype convenience wrapper around ``rollout_batch``."""
    out = rollout_batch(env, policy_spec, np.asarray(genotype)[None], rng)
    return Rollout(out.states[0], out.actions[0], out.rewards[0],
                   float(out.fitness[0]), out.descriptors[0],
                   bool(out.valid[0]))
