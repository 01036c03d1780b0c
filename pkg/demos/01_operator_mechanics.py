"""
Inside the two variation operators
==================================

Every offspring in this library comes from one of two operators: a
directional interpolation in parameter space, or a short supervised pull
toward a recorded action sequence.  This demo builds a miniature policy,
rolls it out in the bundled point-navigation environment, and walks through
what each operator actually computes.

Run it from the repository root:

    python3 demos/01_operator_mechanics.py
"""

import numpy as np

from ascii_me import (
    AsciiConfig,
    IsoLineConfig,
    PolicySpec,
    ascii_mutate,
    forward_states,
    init_genotype,
    isoline_dd,
    make_env,
    rewards_to_go,
    rollout_batch,
    weight_vector,
)

# ---------------------------------------------------------------------------
# A tiny policy and two recorded behaviours
# ---------------------------------------------------------------------------
# The environment is a 2-D point robot behind a wall course; its state is
# [x, y, vx, vy, alive] and its action a clipped 2-D thrust.  The policy is
# a small tanh network read from a flat parameter vector, so a genotype is
# just a 1-D float array.

env = make_env("point_trap_omni", horizon=60)
spec = PolicySpec(env.spec.state_dim, env.spec.action_dim, hidden_layers=(8,))
print(f"environment: {env.spec.name}, horizon {env.spec.horizon}")
print(f"policy: {spec.parameter_count} parameters\n")

# Two genotypes with very different outcomes.  The "parent" has an eastward
# output bias that sends it straight into a lethal wall; crashing freezes
# the point and ends its reward stream.  The "target" barely moves, which in
# this environment is enough to survive the whole episode.
parent = init_genotype(spec, seed=7)
parent[-2] += 2.0  # output-layer x-thrust bias: rush east, crash
target = 0.3 * init_genotype(spec, seed=3)  # timid, survives

rng = np.random.default_rng(0)
pair = rollout_batch(env, spec, np.stack([parent, target]), rng)
crash_step = int(np.argmin(pair.states[0, :, 4]))  # first step dead
print("fitness [parent, target]:", np.round(pair.fitness, 2))
print(f"parent crashes at step {crash_step} of {env.spec.horizon}; "
      "target survives them all")

# ---------------------------------------------------------------------------
# Operator 1: directional interpolation
# ---------------------------------------------------------------------------
# child = parent + iso_sigma * eps + line_sigma * delta * (partner - parent)
#
# Small isotropic noise plus a random step along the line joining two
# parents.  The offspring cloud is therefore a thin cigar aligned with the
# parent pair: variance along the line is line_sigma^2 * |partner - parent|^2,
# while every orthogonal direction only sees iso_sigma^2.

iso_cfg = IsoLineConfig()  # iso_sigma=0.005, line_sigma=0.05
children = isoline_dd(
    np.tile(parent, (4096, 1)), np.tile(target, (4096, 1)), iso_cfg,
    np.random.default_rng(1))

line = target - parent
line_hat = line / np.linalg.norm(line)
along = (children - parent) @ line_hat
orth = (children - parent) - along[:, None] * line_hat

print("\ndirectional interpolation, 4096 children:")
print(f"  std along the parent-partner line: {along.std():.4f} "
      f"(predicted {iso_cfg.line_sigma * np.linalg.norm(line):.4f})")
print(f"  std of any orthogonal coordinate:  {orth.std():.4f} "
      f"(predicted {iso_cfg.iso_sigma:.4f})")

# ---------------------------------------------------------------------------
# Operator 2: scoring the time steps of a recorded behaviour
# ---------------------------------------------------------------------------
# The second operator treats the target's episode as a supervision signal:
# at every step t it asks how much the parent should imitate the recorded
# action.  Three ingredients go into one weight z_t:
#
#   kernel_t = exp(-|a_rec - a_parent|^2 / (2 * kernel_variance))
#              how close the recorded action already is to what the parent
#              would do in the same state;
#   gate_t   = max(cosine_floor, cos(s_parent, s_target))
#              whether the two behaviours were in comparable states at t;
#   gap_t    = target_return_to_go - parent_return_to_go
#              whether the recorded behaviour actually did better from t on.
#
# z_t = kernel_t * gate_t * gap_t, except that a step whose recorded action
# is both far away (kernel below clip_threshold) and worse (negative gap)
# is zeroed: there is nothing to learn from bad data about unfamiliar
# actions.

ascii_cfg = AsciiConfig()
parent_returns = rewards_to_go(pair.rewards[0], ascii_cfg.discount)
target_returns = rewards_to_go(pair.rewards[1], ascii_cfg.discount)

imagined = forward_states(spec, parent, pair.states[1])
z = weight_vector(pair.states[0], parent_returns,
                  pair.states[1], pair.actions[1], target_returns,
                  imagined, ascii_cfg)

print("\nper-step weights on the recorded actions:")
print(f"  steps total {z.size}, zeroed by the far-and-worse clip: "
      f"{int((z == 0).sum())}")
print(f"  weight range over the kept steps: "
      f"[{z[z != 0].min():.3f}, {z[z != 0].max():.3f}]")
print(f"  largest weight at step {int(np.argmax(z))}, "
      f"smallest at step {int(np.argmin(z))}")

# Every step is kept here: the target out-earns the crashed parent from
# every point in the episode, so the return gap never goes negative.  The
# weights are largest at the start -- the whole surviving future of the
# recorded behaviour counts against the parent's short one -- and taper
# toward the end of the episode, where little future is left to compare.

# ---------------------------------------------------------------------------
# Operator 2: the supervised pull
# ---------------------------------------------------------------------------
# The mutation itself repeats a few inner iterations: re-run the parent on
# the recorded states, recompute the weights above, and take one gradient
# step on the weighted squared action gap.  The coefficient is
# learning_rate / (horizon * kernel_variance), so episodes of different
# lengths see comparable update sizes.  trace=True records the mean action
# gap after each inner iteration.

result = ascii_mutate(spec, parent,
                      pair.states[0], parent_returns,
                      pair.states[1], pair.actions[1], target_returns,
                      ascii_cfg, trace=True)

gaps = result.trace.action_gap
print("\nsupervised pull over "
      f"{ascii_cfg.iterations} inner iterations:")
print(f"  mean action gap, first iteration: {gaps[0]:.4f}")
print(f"  mean action gap, last iteration:  {gaps[-1]:.4f}")
print(f"  aborted (non-finite update): {result.aborted}")

# Roll out the child: it inherits the parent's genome but has been pulled
# toward the better-scoring parts of the target's behaviour.
trio = rollout_batch(env, spec,
                     np.stack([parent, target, result.genotype]),
                     np.random.default_rng(0))
child_crash = int(np.argmin(trio.states[2, :, 4]))
print("\nfitness [parent, target, child]:", np.round(trio.fitness, 2))
print(f"child survives to step {child_crash} "
      f"(parent only made it to {crash_step})")

# One mutation from one recorded episode already buys the child a few extra
# steps of life.  The pull happens entirely through the recorded actions --
# no parameters are copied from the target.  In the full evolutionary loop
# the recordings come from a shared replay buffer, the operator runs on
# whole batches at once, and this gentle per-step supervision compounds
# generation after generation.
