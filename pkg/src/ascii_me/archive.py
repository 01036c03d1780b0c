"""Elite archive over a centroidal tessellation of descriptor space.

The descriptor space is partitioned by nearest-centroid cells, with the
centroids spread by Lloyd's algorithm over uniform samples so every cell
claims about the same volume.  Each cell keeps at most one genotype and is
only ever replaced by a strictly fitter one.  Centroid sets are expensive
enough to be worth caching on disk, keyed by (count, bounds, seed).

Besides the genotype, a cell can carry extra per-elite arrays (declared at
construction) that live and die with it, e.g. the elite's recorded states
for later use as variation targets.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

_LOOKUP_CHUNK = 8192


def cell_index(centroids, points):
    """Index of the nearest centroid per point; ties go to the lowest index."""
    c = np.asarray(centroids, dtype=np.float64)
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if p.shape[1] != c.shape[1]:
        raise ValueError(
            f"points have dimension {p.shape[1]}, centroids {c.shape[1]}")
    out = np.empty(p.shape[0], dtype=np.int64)
    for start in range(0, p.shape[0], _LOOKUP_CHUNK):
        block = p[start:start + _LOOKUP_CHUNK]
        out[start:start + block.shape[0]] = (
            cdist(block, c, "sqeuclidean").argmin(axis=1))
    return out


def _check_bounds(bounds):
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    if not bounds:
        raise ValueError("bounds must cover at least one dimension")
    for lo, hi in bounds:
        if not lo < hi:
            raise ValueError(f"invalid bound ({lo}, {hi})")
    return bounds


def generate_centroids(count, bounds, seed, samples=None, iterations=40,
                       tol=1e-9):
    """Spread ``count`` centroids over the box via Lloyd's algorithm.

    Uniform sample points are assigned to their nearest centroid, centroids
    move to their cluster means, and clusters that land empty are reseeded
    from random samples.  Deterministic for a given seed.
    """
    bounds = _check_bounds(bounds)
    if count < 1:
        raise ValueError("count must be positive")
    n = int(samples) if samples is not None else max(100 * count, 20_000)
    if count > n:
        raise ValueError(f"cannot place {count} centroids with {n} samples")
    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in bounds])
    highs = np.array([hi for _, hi in bounds])
    points = lows + (highs - lows) * rng.random((n, len(bounds)))
    centroids = points[rng.choice(n, size=count, replace=False)]
    for _ in range(iterations):
        labels = cell_index(centroids, points)
        counts = np.bincount(labels, minlength=count)
        new = np.empty_like(centroids)
        for d in range(points.shape[1]):
            new[:, d] = np.bincount(labels, weights=points[:, d],
                                    minlength=count)
        filled = counts > 0
        new[filled] /= counts[filled, None]
        if not filled.all():
            empty = ~filled
            new[empty] = points[rng.integers(0, n, size=int(empty.sum()))]
        shift = np.abs(new - centroids).max()
        centroids = new
        if shift < tol:
            break
    return centroids


def _centroid_cache_name(count, bounds, seed):
    payload = json.dumps(
        {"count": int(count), "bounds": [list(b) for b in bounds],
         "seed": int(seed)},
        sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(payload.encode()).hexdigest()[:16]
    return f"centroids_{digest}.npy"


def centroid_cache_path(count, bounds, seed, cache_dir):
    """Where a centroid set for these parameters lives inside a cache dir."""
    return Path(cache_dir) / _centroid_cache_name(count, _check_bounds(bounds),
                                                  seed)


def load_or_generate_centroids(count, bounds, seed, cache_dir=None, **kwargs):
    """Fetch a centroid set from the cache directory, generating on a miss."""
    bounds = _check_bounds(bounds)
    if cache_dir is None:
        return generate_centroids(count, bounds, seed, **kwargs)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / _centroid_cache_name(count, bounds, seed)
    if path.exists():
        centroids = np.load(path)
        if centroids.shape != (count, len(bounds)):
            raise ValueError(
                f"cached centroid file {path} has shape {centroids.shape}, "
                f"expected {(count, len(bounds))}")
        return centroids
    centroids = generate_centroids(count, bounds, seed, **kwargs)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.save(fh, centroids)
    os.replace(tmp, path)
    return centroids


class AdditionOutcome(enum.Enum):
    ADDED_NEW = "new"
    ADDED_IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass(frozen=True)
class ArchiveMetrics:
    qd_score: float       # sum of elite fitnesses over occupied cells
    coverage: float       # occupied fraction of all cells
    max_fitness: Optional[float]
    occupied: int


class Archive:
    """One-elite-per-cell container with strict-improvement replacement.

    Arrays (``genotypes``, ``fitness``, ``descriptors``, ``occupied``,
    ``extras``) are indexed by cell and exposed directly; treat them as
    read-only and mutate only through ``try_add``.  ``counters`` tallies
    addition outcomes per source label, so operator attribution falls out
    of normal bookkeeping.
    """

    def __init__(self, centroids, parameter_count, extra_shapes=None,
                 genotype_dtype=np.float64):
        self.centroids = np.asarray(centroids, dtype=np.float64)
        if self.centroids.ndim != 2:
            raise ValueError("centroids must be a (cells, dims) array")
        cells = self.centroids.shape[0]
        self.genotypes = np.zeros((cells, int(parameter_count)),
                                  dtype=genotype_dtype)
        self.fitness = np.full(cells, -np.inf)
        self.descriptors = np.zeros((cells, self.centroids.shape[1]))
        self.occupied = np.zeros(cells, dtype=bool)
        self._extra_shapes = {k: tuple(v) for k, v in (extra_shapes or {}).items()}
        self.extras = {
            name: np.zeros((cells, *shape))
            for name, shape in self._extra_shapes.items()
        }
        self.counters = {}

    @property
    def capacity(self):
        return self.centroids.shape[0]

    @property
    def occupied_count(self):
        return int(self.occupied.sum())

    def _check_extras(self, extras, batch):
        if set(extras or {}) != set(self._extra_shapes):
            raise ValueError(
                f"extras must provide exactly {sorted(self._extra_shapes)}, "
                f"got {sorted(extras or {})}")
        checked = {}
        for name, arr in (extras or {}).items():
            arr = np.asarray(arr)
            want = (batch, *self._extra_shapes[name])
            if arr.shape != want:
                raise ValueError(f"extras[{name!r}] must have shape {want}, "
                                 f"got {arr.shape}")
            checked[name] = arr
        return checked

    def try_add(self, genotypes, fitness, descriptors, extras=None,
                source="unknown"):
        """Offer a batch of candidates, in order, one outcome per candidate.

        Earlier candidates in the batch can be displaced by later, fitter
        ones aimed at the same cell, exactly as if offered one at a time.
        """
        g = np.atleast_2d(np.asarray(genotypes))
        f = np.atleast_1d(np.asarray(fitness, dtype=np.float64))
        d = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
        if not (g.shape[0] == f.shape[0] == d.shape[0]):
            raise ValueError("batch sizes disagree")
        if g.shape[1] != self.genotypes.shape[1]:
            raise ValueError(
                f"genotypes must have {self.genotypes.shape[1]} parameters")
        for name, arr in (("genotypes", g), ("fitness", f), ("descriptors", d)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contain non-finite values")
        checked = self._check_extras(extras, g.shape[0])

        cells = cell_index(self.centroids, d)
        outcomes = []
        for i, cell in enumerate(cells):
            if not self.occupied[cell]:
                outcome = AdditionOutcome.ADDED_NEW
            elif f[i] > self.fitness[cell]:
                outcome = AdditionOutcome.ADDED_IMPROVED
            else:
                outcome = AdditionOutcome.REJECTED
            if outcome is not AdditionOutcome.REJECTED:
                self.occupied[cell] = True
                self.fitness[cell] = f[i]
                self.genotypes[cell] = g[i]
                self.descriptors[cell] = d[i]
                for name, arr in checked.items():
                    self.extras[name][cell] = arr[i]
            outcomes.append(outcome)
        tally = self.counters.setdefault(
            source, {o.value: 0 for o in AdditionOutcome})
        for outcome in outcomes:
            tally[outcome.value] += 1
        return outcomes

    def sample_uniform(self, count, rng):
        """Cell indices of elites drawn uniformly with replacement."""
        filled = np.flatnonzero(self.occupied)
        if filled.size == 0:
            raise ValueError("cannot sample from an empty archive")
        return filled[rng.integers(0, filled.size, size=count)]

    def metrics(self):
        if not self.occupied.any():
            return ArchiveMetrics(0.0, 0.0, None, 0)
        elite_fitness = self.fitness[self.occupied]
        return ArchiveMetrics(
            qd_score=float(elite_fitness.sum()),
            coverage=self.occupied_count / self.capacity,
            max_fitness=float(elite_fitness.max()),
            occupied=self.occupied_count,
        )


def save_archive(archive, path):
    """Write the archive as <path>.npz arrays plus a <path>.json summary."""
    path = Path(path)
    arrays = {
        "centroids": archive.centroids,
        "genotypes": archive.genotypes,
        "fitness": archive.fitness,
        "descriptors": archive.descriptors,
        "occupied": archive.occupied,
    }
    for name, arr in archive.extras.items():
        arrays[f"extra_{name}"] = arr
    np.savez_compressed(path, **arrays)
    metrics = archive.metrics()
    summary = {
        "capacity": archive.capacity,
        "occupied": archive.occupied_count,
        "parameter_count": archive.genotypes.shape[1],
        "metrics": {
            "qd_score": metrics.qd_score,
            "coverage": metrics.coverage,
            "max_fitness": metrics.max_fitness,
            "occupied": metrics.occupied,
        },
        "counters": archive.counters,
        "extras": sorted(archive.extras),
    }
    path.with_suffix(".json").write_text(json.dumps(summary, indent=2))


def load_archive(path):
    """Rebuild an archive saved by ``save_archive``."""
    path = Path(path)
    with np.load(path) as data:
        extra_shapes = {
            name[len("extra_"):]: data[name].shape[1:]
            for name in data.files if name.startswith("extra_")
        }
        archive = Archive(
            data["centroids"],
            parameter_count=data["genotypes"].shape[1],
            extra_shapes=extra_shapes or None,
            genotype_dtype=data["genotypes"].dtype,
        )
        archive.genotypes[:] = data["genotypes"]
        archive.fitness[:] = data["fitness"]
        archive.descriptors[:] = data["descriptors"]
        archive.occupied[:] = data["occupied"]
        for name in extra_shapes:
            archive.extras[name][:] = data[f"extra_{name}"]
    summary_path = path.with_suffix(".json")
    if summary_path.exists():
        archive.counters = json.loads(summary_path.read_text())["counters"]
    return archive
