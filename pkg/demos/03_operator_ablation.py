"""
Why the operator mix matters: a wall-course ablation
====================================================

The bundled point-navigation environment is a gauntlet: the robot starts
inside a U-shaped pocket, and two slotted baffles stand between it and the
far side of the arena.  Touching any wall is fatal -- the point freezes and
earns nothing for the rest of the episode -- so random parameter noise
mostly produces offspring that die at the same wall as their parent.  The
action-sequence operator sees per-time-step return gaps instead, which tell
it exactly where a behaviour stopped earning, and that signal is enough to
thread the slots.

This demo runs the same evaluation budget twice -- once with directional
interpolation only, once with the half-and-half operator mix -- and draws
where each archive ended up.

Run it from the repository root (about a minute):

    python3 demos/03_operator_ablation.py

The command-line equivalent of this experiment is:

    ascii-me ablate-ga --config trap.toml --values 0.5,1.0 --seeds 1,2,3
"""

import numpy as np

from ascii_me import RunConfig, run

# ---------------------------------------------------------------------------
# Two runs, one budget
# ---------------------------------------------------------------------------
# ga_fraction=1.0 fills every batch with directional interpolation only.
# ga_fraction=0.5 replaces half of each batch with the action-sequence
# operator.  Everything else -- seed, budget, archive, policy -- is equal.

EVALS = 10_000

archives = {}
for ga_fraction in (1.0, 0.5):
    config = RunConfig(
        env_name="point_trap_omni",
        seed=1,
        total_evaluations=EVALS,
        batch_size=256,
        ga_fraction=ga_fraction,
        centroid_count=256,
    )
    label = ("interpolation only" if ga_fraction == 1.0
             else "half-and-half mix")
    result = run(config)
    metrics = result.archive.metrics()
    archives[ga_fraction] = result.archive
    print(f"{label:<20} qd_score {metrics.qd_score:>9.1f}   "
          f"coverage {metrics.coverage:.3f}   "
          f"({result.wall_time:.0f}s)")

# ---------------------------------------------------------------------------
# Where each archive lives
# ---------------------------------------------------------------------------
# The behaviour descriptor is the robot's final position, so the archive
# centroids tile the arena itself and occupancy is a map.  Legend:
#
#   #  reached by both runs          M  only the operator mix
#   G  only interpolation-alone      .  reached by neither
#
# The start pocket opens to the west around x=-4.2; baffle slots sit near
# (-0.5, 1.7) and (2.0, -1.7), so the only safe route is an S-curve.

mix, pure = archives[0.5], archives[1.0]
centroids = mix.centroids
GRID = 25
rows = [[" "] * GRID for _ in range(GRID)]
rank = {" ": 0, ".": 1, "G": 2, "M": 3, "#": 4}
for i, (cx, cy) in enumerate(centroids):
    col = min(GRID - 1, int((cx + 5.0) / 10.0 * GRID))
    row = min(GRID - 1, int((5.0 - cy) / 10.0 * GRID))
    got_mix, got_pure = mix.occupied[i], pure.occupied[i]
    mark = ("#" if got_mix and got_pure
            else "M" if got_mix else "G" if got_pure else ".")
    if rank[mark] > rank[rows[row][col]]:
        rows[row][col] = mark

print("\n   west wall                                east wall")
for line in rows:
    print("  |" + "".join(line) + "|")

# ---------------------------------------------------------------------------
# Progress through the gauntlet
# ---------------------------------------------------------------------------
# Counting occupied cells chamber by chamber shows where interpolation-only
# evolution stalls: it saturates the start chamber but rarely crosses the
# baffles, because a child that dies at a wall lands on its parent's crash
# site instead of expanding the archive.

chambers = (
    ("start chamber  (x < -0.5)", centroids[:, 0] < -0.5),
    ("middle chamber (-0.5..2)", (centroids[:, 0] >= -0.5)
     & (centroids[:, 0] < 2.0)),
    ("far chamber    (x > 2)", centroids[:, 0] >= 2.0),
)
print(f"\n{'region':<28} {'cells':>5} {'mix':>6} {'interp only':>12}")
for name, mask in chambers:
    print(f"{name:<28} {int(mask.sum()):>5} "
          f"{int((mix.occupied & mask).sum()):>6} "
          f"{int((pure.occupied & mask).sum()):>12}")

# With more budget the gap keeps widening: the mix regularly fills the far
# chamber while interpolation alone is still bouncing off the first baffle.
# The benchmark suite repeats this comparison across seeds and batch sizes;
# `ascii-me sweep` and `ascii-me report` automate the bookkeeping.
