"""The evolution loop: evaluate, archive, vary, repeat until budget.

One run owns an archive, a trajectory buffer, and an evaluation budget.
Iteration 0 spends one batch on random genotypes; every later iteration
selects parents from the archive, builds offspring with the two variation
operators (a ``ga_fraction`` share by directional interpolation, the rest
by action-sequence pull against buffer or archive targets), evaluates them,
and offers everything back to the archive and buffer.  The final iteration
shrinks so the total number of evaluations lands exactly on the budget.

Randomness is organized as one stream per (purpose, iteration, slot), so
results are bit-identical no matter how many workers process the fixed-size
work chunks.  Worker threads only compute; all mutation of shared state
happens on the main thread in slot order.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .archive import Archive, load_or_generate_centroids, save_archive
from .buffer import TrajectoryBuffer
from .envs import ENVIRONMENTS, BatchRollouts, make_env, rollout_batch
from .policy import PolicySpec, forward_pop_states, init_genotype
from .seeding import stream
from .variation import (
    AsciiConfig,
    IsoLineConfig,
    ascii_mutate_batch,
    isoline_dd,
    rewards_to_go,
)

# purpose tags for derived random streams; frozen, part of the run format
_INIT, _SELECT_ISO, _SELECT_ASCII, _TARGETS, _MUTATE_ISO, _EVAL = range(6)


@dataclass
class RunConfig:
    env_name: str
    seed: int
    total_evaluations: int
    batch_size: int
    ga_fraction: float = 0.5
    centroid_count: int = 1024
    centroid_seed: int = 1
    hidden_layers: tuple = (64, 64)
    activation: str = "tanh"
    env_kwargs: dict = field(default_factory=dict)
    isoline: IsoLineConfig = field(default_factory=IsoLineConfig)
    ascii: AsciiConfig = field(default_factory=AsciiConfig)
    buffer_capacity: int = 1_024_000
    target_source: str = "buffer"
    workers: int = 1
    dtype: str = "float64"
    mutation_chunk: int = 64
    eval_chunk: int = 256
    centroid_cache_dir: Optional[str] = None

    def __post_init__(self):
        self.hidden_layers = tuple(int(h) for h in self.hidden_layers)
        if isinstance(self.isoline, dict):
            self.isoline = IsoLineConfig(**self.isoline)
        if isinstance(self.ascii, dict):
            self.ascii = AsciiConfig(**self.ascii)
        if isinstance(self.env_kwargs, dict) is False:
            raise ValueError("env_kwargs must be a mapping")
        if self.env_name not in ENVIRONMENTS:
            raise ValueError(f"unknown environment '{self.env_name}'; "
                             f"choose from {sorted(ENVIRONMENTS)}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.total_evaluations < self.batch_size:
            raise ValueError("total_evaluations must cover at least the "
                             "initial batch")
        if not 0.0 <= self.ga_fraction <= 1.0:
            raise ValueError("ga_fraction must lie in [0, 1]")
        if self.centroid_count < 1:
            raise ValueError("centroid_count must be positive")
        if self.activation not in ("tanh", "relu"):
            raise ValueError("activation must be 'tanh' or 'relu'")
        if self.target_source not in ("buffer", "archive"):
            raise ValueError("target_source must be 'buffer' or 'archive'")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be 'float64' or 'float32'")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.mutation_chunk < 1 or self.eval_chunk < 1:
            raise ValueError("chunk sizes must be positive")
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be positive")

    def to_dict(self):
        data = asdict(self)
        data["hidden_layers"] = list(self.hidden_layers)
        return data

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class IterationReport:
    iteration: int
    evaluations: int     # cumulative, including this iteration
    batch: int           # evaluations spent this iteration
    qd_score: float
    coverage: float
    max_fitness: Optional[float]
    occupied: int
    additions: dict      # per-source outcome counts for this iteration only
    invalid: int         # rollouts discarded as non-finite
    aborted: int         # mutations reverted to their parent
    buffer_size: int
    seconds: float


@dataclass
class RunResult:
    config: RunConfig
    policy_spec: PolicySpec
    archive: Archive
    buffer: TrajectoryBuffer
    reports: list
    evaluations: int
    wall_time: float


def _run_jobs(pool, fn, args):
    if pool is None:
        return [fn(a) for a in args]
    return list(pool.map(fn, args))


def _snapshot(counters):
    return {source: dict(tally) for source, tally in counters.items()}


def _delta(before, after):
    out = {}
    for source, tally in after.items():
        prev = before.get(source, {})
        diff = {key: value - prev.get(key, 0) for key, value in tally.items()}
        if any(diff.values()):
            out[source] = diff
    return out


def _evaluate(env, pspec, genotypes, config, iteration, pool):
    total = genotypes.shape[0]

    def eval_chunk(lo):
        hi = min(lo + config.eval_chunk, total)
        return rollout_batch(env, pspec, genotypes[lo:hi],
                             stream(config.seed, _EVAL, iteration, lo))

    parts = _run_jobs(pool, eval_chunk, range(0, total, config.eval_chunk))
    if len(parts) == 1:
        return parts[0]
    return BatchRollouts(
        states=np.concatenate([p.states for p in parts]),
        actions=np.concatenate([p.actions for p in parts]),
        rewards=np.concatenate([p.rewards for p in parts]),
        fitness=np.concatenate([p.fitness for p in parts]),
        descriptors=np.concatenate([p.descriptors for p in parts]),
        valid=np.concatenate([p.valid for p in parts]),
    )


def _isoline_offspring(archive, count, config, iteration):
    rng = stream(config.seed, _SELECT_ISO, iteration, 0)
    picks = archive.sample_uniform(2 * count, rng)
    parents = archive.genotypes[picks[:count]]
    partners = archive.genotypes[picks[count:]]
    out = np.empty_like(parents)
    for lo in range(0, count, config.mutation_chunk):
        hi = min(lo + config.mutation_chunk, count)
        out[lo:hi] = isoline_dd(
            parents[lo:hi], partners[lo:hi], config.isoline,
            stream(config.seed, _MUTATE_ISO, iteration, lo))
    return out


def _ascii_offspring(archive, buffer, pspec, count, config, iteration, pool,
                     dtype):
    picks = archive.sample_uniform(
        count, stream(config.seed, _SELECT_ASCII, iteration, 0))
    parents = archive.genotypes[picks]
    own_states = archive.extras["states"][picks]
    own_returns = archive.extras["returns"][picks]

    target_rng = stream(config.seed, _TARGETS, iteration, 0)
    if config.target_source == "buffer" and len(buffer) > 0:
        t_states, t_actions, t_returns = buffer.sample(count, target_rng)
        t_genotypes = None
    else:
        # fall back to replaying archive elites as targets
        picks = archive.sample_uniform(count, target_rng)
        t_states = archive.extras["states"][picks]
        t_returns = archive.extras["returns"][picks]
        t_genotypes = archive.genotypes[picks]
        t_actions = None

    def mutate_chunk(lo):
        hi = min(lo + config.mutation_chunk, count)
        states = t_states[lo:hi]
        if t_actions is None:
            actions = forward_pop_states(pspec, t_genotypes[lo:hi], states)
        else:
            actions = t_actions[lo:hi]
        return ascii_mutate_batch(
            pspec, parents[lo:hi], own_states[lo:hi], own_returns[lo:hi],
            states, actions, t_returns[lo:hi], config.ascii)

    starts = list(range(0, count, config.mutation_chunk))
    results = _run_jobs(pool, mutate_chunk, starts)
    out = np.empty((count, pspec.parameter_count), dtype=dtype)
    aborted = 0
    for lo, res in zip(starts, results):
        hi = min(lo + config.mutation_chunk, count)
        out[lo:hi] = res.genotypes.astype(dtype, copy=False)
        aborted += int(res.aborted.sum())
    return out, aborted


def _absorb(archive, buffer, genotypes, rollouts, returns, sources):
    """Store an evaluated batch; returns how many rollouts were invalid."""
    valid = rollouts.valid
    if valid.any():
        buffer.insert(rollouts.states[valid], rollouts.actions[valid],
                      returns[valid])
    for label, span in sources:
        keep = valid[span]
        if not keep.any():
            continue
        archive.try_add(
            genotypes[span][keep],
            rollouts.fitness[span][keep],
            rollouts.descriptors[span][keep],
            extras={"states": rollouts.states[span][keep],
                    "returns": returns[span][keep]},
            source=label,
        )
    return int((~valid).sum())


def run(config, output_dir=None):
    """Execute one full evolution run; optionally persist it to a directory.

    The directory receives ``config.json`` up front, a ``reports.jsonl``
    line per iteration as it completes, and ``final.json`` plus the archive
    checkpoint (``archive.npz`` / ``archive.json``) at the end.
    """
    t_start = time.perf_counter()
    env = make_env(config.env_name, **config.env_kwargs)
    pspec = PolicySpec(env.spec.state_dim, env.spec.action_dim,
                       config.hidden_layers, config.activation)
    dtype = np.float32 if config.dtype == "float32" else np.float64
    centroids = load_or_generate_centroids(
        config.centroid_count, env.spec.descriptor_bounds,
        config.centroid_seed, config.centroid_cache_dir)
    horizon = env.spec.horizon
    archive = Archive(
        centroids, pspec.parameter_count,
        extra_shapes={"states": (horizon, env.spec.state_dim),
                      "returns": (horizon,)},
        genotype_dtype=dtype)
    buffer = TrajectoryBuffer(env.spec.state_dim, env.spec.action_dim,
                              horizon, config.buffer_capacity, dtype=dtype)
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None

    out = None
    jsonl = None
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(),
                                                    indent=2))
        jsonl = open(out / "reports.jsonl", "w")

    reports = []

    def record(iteration, batch, evaluations, invalid, aborted, before,
               seconds):
        metrics = archive.metrics()
        report = IterationReport(
            iteration=iteration,
            evaluations=evaluations,
            batch=batch,
            qd_score=metrics.qd_score,
            coverage=metrics.coverage,
            max_fitness=metrics.max_fitness,
            occupied=metrics.occupied,
            additions=_delta(before, archive.counters),
            invalid=invalid,
            aborted=aborted,
            buffer_size=len(buffer),
            seconds=seconds,
        )
        reports.append(report)
        if jsonl is not None:
            jsonl.write(json.dumps(asdict(report)) + "\n")
        return report

    try:
        t_iter = time.perf_counter()
        before = _snapshot(archive.counters)
        genotypes = np.empty((config.batch_size, pspec.parameter_count),
                             dtype=dtype)
        for slot in range(config.batch_size):
            genotypes[slot] = init_genotype(
                pspec, stream(config.seed, _INIT, 0, slot), dtype=dtype)
        rollouts = _evaluate(env, pspec, genotypes, config, 0, pool)
        returns = rewards_to_go(rollouts.rewards, config.ascii.discount)
        invalid = _absorb(archive, buffer, genotypes, rollouts, returns,
                          [("init", slice(0, config.batch_size))])
        evaluations = config.batch_size
        record(0, config.batch_size, evaluations, invalid, 0, before,
               time.perf_counter() - t_iter)

        iteration = 0
        while evaluations < config.total_evaluations:
            iteration += 1
            t_iter = time.perf_counter()
            before = _snapshot(archive.counters)
            this_batch = min(config.batch_size,
                             config.total_evaluations - evaluations)
            ga_count = round(this_batch * config.ga_fraction)
            pg_count = this_batch - ga_count

            parts = []
            aborted = 0
            if ga_count:
                parts.append(_isoline_offspring(archive, ga_count, config,
                                                iteration))
            if pg_count:
                mutated, aborted = _ascii_offspring(
                    archive, buffer, pspec, pg_count, config, iteration,
                    pool, dtype)
                parts.append(mutated)
            offspring = parts[0] if len(parts) == 1 else np.concatenate(parts)

            rollouts = _evaluate(env, pspec, offspring, config, iteration,
                                 pool)
            returns = rewards_to_go(rollouts.rewards, config.ascii.discount)
            sources = []
            if ga_count:
                sources.append(("isoline", slice(0, ga_count)))
            if pg_count:
                sources.append(("ascii", slice(ga_count, this_batch)))
            invalid = _absorb(archive, buffer, offspring, rollouts, returns,
                              sources)
            evaluations += this_batch
            record(iteration, this_batch, evaluations, invalid, aborted,
                   before, time.perf_counter() - t_iter)
    finally:
        if jsonl is not None:
            jsonl.close()
        if pool is not None:
            pool.shutdown()

    wall_time = time.perf_counter() - t_start
    if out is not None:
        metrics = archive.metrics()
        final = {
            "evaluations": evaluations,
            "iterations": len(reports),
            "wall_time": wall_time,
            "qd_score": metrics.qd_score,
            "coverage": metrics.coverage,
            "max_fitness": metrics.max_fitness,
            "occupied": metrics.occupied,
            "counters": archive.counters,
        }
        (out / "final.json").write_text(json.dumps(final, indent=2))
        save_archive(archive, out / "archive.npz")

    return RunResult(config=config, policy_spec=pspec, archive=archive,
                     buffer=buffer, reports=reports, evaluations=evaluations,
                     wall_time=wall_time)
