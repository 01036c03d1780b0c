"""Variation operators for the evolutionary loop.

Two operators produce offspring genotypes:

- ``isoline_dd`` draws random interpolations between two parents plus
  isotropic noise, the classic directional variation rule for continuous
  genomes.
- ``ascii_mutate_batch`` nudges a parent toward a recorded action sequence
  with a few supervised steps.  Every time step of the recording is weighted
  by three signals: a Gaussian kernel on the gap between the recorded action
  and what the parent would do in the same state, the cosine similarity
  between the states the two behaviours visited at that step (floored so
  dissimilar states still contribute a little), and the difference of
  discounted returns from that step onward.  Steps whose recorded action is
  both far away and worse are dropped outright, which keeps the operator
  from unlearning good behaviour to imitate bad data.

The per-update coefficient is ``learning_rate / (horizon * kernel_variance)``
so runs with different episode lengths see comparable update magnitudes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .policy import PolicySpec, forward_vjp_pop_states

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IsoLineConfig:
    """Noise scales for the directional-interpolation operator."""

    iso_sigma: float = 0.005
    line_sigma: float = 0.05

    def __post_init__(self):
        if self.iso_sigma < 0 or self.line_sigma < 0:
            raise ValueError("noise scales must be non-negative")


@dataclass(frozen=True)
class AsciiConfig:
    """Parameters for the action-sequence interpolation operator.

    ``noise_scale`` is reserved for isotropic pre-noise on the parent and
    must stay 0.0: the operator applies its supervised updates to the parent
    directly.
    """

    iterations: int = 32
    learning_rate: float = 3e-3
    kernel_variance: float = 4.0
    clip_threshold: float = 0.8
    cosine_floor: float = 0.25
    discount: float = 0.99
    noise_scale: float = 0.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not 0 < self.learning_rate < np.inf:
            raise ValueError("learning_rate must be positive and finite")
        if not 0 < self.kernel_variance < np.inf:
            raise ValueError("kernel_variance must be positive and finite")
        if not 0 < self.clip_threshold <= 1:
            raise ValueError("clip_threshold must lie in (0, 1]")
        if not -1 <= self.cosine_floor <= 1:
            raise ValueError("cosine_floor must lie in [-1, 1]")
        if not 0 <= self.discount <= 1:
            raise ValueError("discount must lie in [0, 1]")
        if self.noise_scale != 0.0:
            raise ValueError("noise_scale is reserved and must be 0.0")

    def step_scale(self, horizon: int) -> float:
        """Coefficient applied to each accumulated update."""
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        return self.learning_rate / (horizon * self.kernel_variance)


def rewards_to_go(rewards, discount):
    """Discounted suffix sums along the last axis.

    Entry ``t`` holds the reward earned at step ``t`` plus the discounted
    total of everything after it.
    """
    r = np.asarray(rewards)
    if r.dtype.kind != "f":
        r = r.astype(np.float64)
    if r.shape[-1] == 0:
        raise ValueError("need at least one reward per trajectory")
    out = np.empty_like(r)
    out[..., -1] = r[..., -1]
    for t in range(r.shape[-1] - 2, -1, -1):
        out[..., t] = r[..., t] + discount * out[..., t + 1]
    return out


def isoline_dd(parents, partners, config, rng):
    """Directional interpolation between parent pairs, one child per row.

    ``child = parent + iso_sigma * eps + line_sigma * delta * (partner - parent)``
    with ``eps`` an isotropic normal vector and ``delta`` a scalar normal per
    pair.  The isotropic draw happens first, then the scalars, so a fixed
    generator state always yields the same children.
    """
    pa = np.asarray(parents)
    pb = np.asarray(partners)
    if pa.ndim != 2 or pa.shape != pb.shape:
        raise ValueError(
            f"expected matching (batch, params) arrays, got {pa.shape} and {pb.shape}"
        )
    dtype = pa.dtype if pa.dtype.kind == "f" else np.float64
    eps = rng.standard_normal(pa.shape, dtype=dtype)
    delta = rng.standard_normal((pa.shape[0], 1), dtype=dtype)
    return pa + config.iso_sigma * eps + config.line_sigma * delta * (pb - pa)


def _comparability_gate(current_states, target_states, floor):
    """Floored cosine similarity per (batch, step) state pair.

    Pairs where either state has zero norm have no defined angle and fall
    back to the floor.
    """
    dot = (current_states * target_states).sum(axis=-1)
    norms = (np.linalg.norm(current_states, axis=-1)
             * np.linalg.norm(target_states, axis=-1))
    undefined = norms == 0
    hits = int(undefined.sum())
    if hits:
        logger.debug(
            "cosine undefined for %d state pairs with zero norm; using floor %g",
            hits, floor,
        )
    cos = np.where(undefined, -1.0, dot / np.where(undefined, 1.0, norms))
    return np.maximum(floor, cos), hits


def _step_weights(gate, return_gap, target_actions, imagined_actions, config):
    """Weights, kernel values, and raw action gaps for a batch of pairs."""
    diff = target_actions - imagined_actions
    sq = (diff * diff).sum(axis=-1)
    kernel = np.exp(-sq / (2.0 * config.kernel_variance))
    beta = kernel * gate * return_gap
    z = np.where((kernel < config.clip_threshold) & (return_gap < 0), 0.0, beta)
    return z, kernel, diff


def weight_vector(current_states, current_returns, target_states,
                  target_actions, target_returns, imagined_actions, config):
    """Per-time-step weights on the action gap for one trajectory pair.

    ``imagined_actions`` are the parent policy's outputs on the target's
    states; callers typically get them from ``policy.forward_states``.
    Returns a 1-D array with one weight per step.
    """
    cs = np.asarray(current_states, dtype=np.float64)
    ts = np.asarray(target_states, dtype=np.float64)
    cr = np.asarray(current_returns, dtype=np.float64)
    tr = np.asarray(target_returns, dtype=np.float64)
    ta = np.asarray(target_actions, dtype=np.float64)
    ia = np.asarray(imagined_actions, dtype=np.float64)
    if not (cs.shape == ts.shape and ta.shape == ia.shape
            and cr.shape == tr.shape == cs.shape[:1] == ta.shape[:1]):
        raise ValueError("trajectory arrays disagree on horizon or widths")
    gate, _ = _comparability_gate(cs[None], ts[None], config.cosine_floor)
    z, _, _ = _step_weights(gate, (tr - cr)[None], ta[None], ia[None], config)
    return z[0]


@dataclass
class MutationTrace:
    """Per-inner-iteration diagnostics, mostly for plots and debugging."""

    action_gap: list      # mean Euclidean distance to the recorded actions
    kernel_mean: list
    weight_mean: list     # mean absolute per-step weight


@dataclass
class AsciiBatchResult:
    genotypes: np.ndarray     # (batch, params)
    aborted: np.ndarray       # (batch,) True where updates overflowed
    zero_norm_pairs: int      # state pairs that fell back to the cosine floor
    trace: Optional[MutationTrace]


@dataclass
class AsciiResult:
    genotype: np.ndarray
    aborted: bool
    zero_norm_pairs: int
    trace: Optional[MutationTrace]


def _validate_batch(spec, genotypes, current_states, current_returns,
                    target_states, target_actions, target_returns):
    if genotypes.ndim != 2 or genotypes.shape[1] != spec.parameter_count:
        raise ValueError(
            f"genotypes must be (batch, {spec.parameter_count}), got {genotypes.shape}"
        )
    batch = genotypes.shape[0]
    horizon = target_states.shape[1] if target_states.ndim == 3 else -1
    expected = {
        "current_states": (batch, horizon, spec.state_dim),
        "target_states": (batch, horizon, spec.state_dim),
        "target_actions": (batch, horizon, spec.action_dim),
        "current_returns": (batch, horizon),
        "target_returns": (batch, horizon),
    }
    arrays = {
        "current_states": current_states,
        "target_states": target_states,
        "target_actions": target_actions,
        "current_returns": current_returns,
        "target_returns": target_returns,
    }
    for name, arr in arrays.items():
        if arr.shape != expected[name]:
            raise ValueError(f"{name} must have shape {expected[name]}, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} contains non-finite values")
    if not np.isfinite(genotypes).all():
        raise ValueError("genotypes contain non-finite values")


def ascii_mutate_batch(spec, genotypes, current_states, current_returns,
                       target_states, target_actions, target_returns,
                       config, trace=False):
    """Pull each parent toward its recorded target over several inner steps.

    Row ``b`` of every array describes one parent/target pairing; all pairs
    share the episode horizon.  Members whose parameters stop being finite
    mid-run are reverted to their parent and frozen, flagged in ``aborted``.
    Results are independent of how rows are grouped into batches.
    """
    parents = np.array(genotypes, dtype=np.float64, copy=True)
    cs = np.asarray(current_states, dtype=np.float64)
    cr = np.asarray(current_returns, dtype=np.float64)
    ts = np.asarray(target_states, dtype=np.float64)
    ta = np.asarray(target_actions, dtype=np.float64)
    tr = np.asarray(target_returns, dtype=np.float64)
    _validate_batch(spec, parents, cs, cr, ts, ta, tr)

    batch, horizon = cs.shape[0], cs.shape[1]
    gate, zero_hits = _comparability_gate(cs, ts, config.cosine_floor)
    return_gap = tr - cr
    scale = config.step_scale(horizon)

    x = parents.copy()
    frozen = np.zeros(batch, dtype=bool)
    rec = ([], [], []) if trace else None

    # Divergence is handled by reverting, so the transient inf/nan values it
    # produces should not warn.
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.iterations):
            imagined, backward = forward_vjp_pop_states(spec, x, ts)
            z, kernel, diff = _step_weights(gate, return_gap, ta, imagined,
                                            config)
            cotangents = z[..., None] * diff

            # A diverged member can output inf/nan actions; revert it before
            # the backward pass sees them.
            bad = ~np.isfinite(cotangents).all(axis=(1, 2)) & ~frozen
            if bad.any():
                x[bad] = parents[bad]
                frozen |= bad
            if frozen.any():
                cotangents[frozen] = 0.0

            if rec is not None:
                live = ~frozen
                if live.any():
                    gaps = np.sqrt((diff[live] ** 2).sum(axis=-1))
                    rec[0].append(float(gaps.mean()))
                    rec[1].append(float(kernel[live].mean()))
                    rec[2].append(float(np.abs(z[live]).mean()))
                else:
                    for channel in rec:
                        channel.append(float("nan"))

            candidate = x + scale * backward(cotangents)
            bad = ~np.isfinite(candidate).all(axis=1) & ~frozen
            if bad.any():
                candidate[bad] = parents[bad]
                frozen |= bad
            x = candidate

    trace_obj = MutationTrace(*rec) if rec is not None else None
    return AsciiBatchResult(x, frozen, zero_hits, trace_obj)


def ascii_mutate(spec, genotype, current_states, current_returns,
                 target_states, target_actions, target_returns,
                 config, trace=False):
    """Single-pair convenience wrapper around ``ascii_mutate_batch``."""
    genotype = np.asarray(genotype)
    res = ascii_mutate_batch(
        spec,
        genotype[None],
        np.asarray(current_states)[None],
        np.asarray(current_returns)[None],
        np.asarray(target_states)[None],
        np.asarray(target_actions)[None],
        np.asarray(target_returns)[None],
        config,
        trace=trace,
    )
    return AsciiResult(res.genotypes[0], bool(res.aborted[0]),
                       res.zero_norm_pairs, res.trace)
