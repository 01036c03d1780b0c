"""Deterministic MLP policies on flat parameter vectors.

A policy maps a state vector to an action vector through a feed-forward
network described by a :class:`PolicySpec`.  Parameters live in a single flat
vector ("genotype") so evolutionary operators can do plain vector arithmetic
on them.  The layout is frozen and shared by every routine in this package:

    layer 0 weights (row-major, shape fan_out x fan_in), layer 0 bias,
    layer 1 weights, layer 1 bias, ..., output weights, output bias.

Besides forward evaluation the module provides vector-Jacobian products
(``vjp*``): reverse-mode accumulation of ``J^T c`` where ``J`` is the
Jacobian of the action with respect to the parameters.  The full Jacobian is
never materialized; a single backward pass reuses the forward activations.

Batched variants operate on stacks of genotypes and/or states.  They compute
exactly the same per-sample values as the scalar routines (``np.matmul``
applies the identical 2-D kernel slice by slice), which the test suite pins
down, and they exist because the evolutionary loop is throughput-bound.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .seeding import as_generator

ACTIVATIONS = ("tanh", "relu")

_BLOB_MAGIC = b"AMG1"  # genotype blob, version 1


@dataclass(frozen=True)
class PolicySpec:
    """Architecture of a deterministic MLP policy.

    ``hidden_layers`` lists hidden widths input-to-output; an empty tuple
    gives a single linear layer.  ``activation`` applies to hidden layers
    only; ``output_squash`` adds a tanh on the output layer so actions land
    in (-1, 1).
    """

    state_dim: int
    action_dim: int
    hidden_layers: tuple[int, ...] = (64, 64)
    activation: str = "tanh"
    output_squash: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.state_dim < 1 or self.action_dim < 1:
            raise ValueError("state_dim and action_dim must be >= 1")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer widths must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")

    @cached_property
    def layer_dims(self) -> tuple[tuple[int, int], ...]:
        """(fan_in, fan_out) per layer, input to output."""
        widths = (self.state_dim, *self.hidden_layers, self.action_dim)
        return tuple(zip(widths[:-1], widths[1:]))

    @cached_property
    def parameter_count(self) -> int:
        return sum((fi + 1) * fo for fi, fo in self.layer_dims)

    @cached_property
    def _param_slices(self) -> tuple[tuple[slice, slice], ...]:
        """Flat-vector slices (weight, bias) per layer."""
        slices = []
        off = 0
        for fan_in, fan_out in self.layer_dims:
            w = slice(off, off + fan_in * fan_out)
            off = w.stop
            b = slice(off, off + fan_out)
            off = b.stop
            slices.append((w, b))
        return tuple(slices)

    def to_dict(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "action_dim": self.action_dim,
            "hidden_layers": list(self.hidden_layers),
            "activation": self.activation,
            "output_squash": self.output_squash,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        return cls(
            state_dim=int(d["state_dim"]),
            action_dim=int(d["action_dim"]),
            hidden_layers=tuple(d.get("hidden_layers", (64, 64))),
            activation=d.get("activation", "tanh"),
            output_squash=bool(d.get("output_squash", True)),
        )


def spec_digest(spec: PolicySpec) -> str:
    """Stable 16-byte hex digest of the architecture, used to tag blobs."""
    canon = json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:32]


def init_genotype(spec: PolicySpec, seed, dtype=np.float64) -> np.ndarray:
    """Fresh flat parameter vector, scaled-uniform per layer.

    Each layer's weights and bias are drawn uniformly from
    +-1/sqrt(fan_in), layer by layer in flat order, so a given seed always
    produces the same vector.
    """
    rng = as_generator(seed)
    params = np.empty(spec.parameter_count, dtype=dtype)
    for (fan_in, fan_out), (w_sl, b_sl) in zip(spec.layer_dims, spec._param_slices):
        bound = 1.0 / np.sqrt(fan_in)
        params[w_sl] = rng.uniform(-bound, bound, fan_in * fan_out)
        params[b_sl] = rng.uniform(-bound, bound, fan_out)
    return params


def _layer_views(spec: PolicySpec, params2d: np.ndarray):
    """Per-layer (weights (B, out, in), bias (B, out)) views into (B, P)."""
    batch = params2d.shape[0]
    views = []
    for (fan_in, fan_out), (w_sl, b_sl) in zip(spec.layer_dims, spec._param_slices):
        w = params2d[:, w_sl].reshape(batch, fan_out, fan_in)
        b = params2d[:, b_sl]
        views.append((w, b))
    return views


def _forward_pop(spec: PolicySpec, params2d: np.ndarray, states3d: np.ndarray):
    """Forward pass over B genotypes x T states each.

    Returns (hidden activations per layer, actions (B, T, A)).  Hidden
    activations are kept for the backward pass.
    """
    layers = _layer_views(spec, params2d)
    hidden = []
    h = states3d
    for w, b in layers[:-1]:
        z = np.matmul(h, w.transpose(0, 2, 1))
        z += b[:, None, :]
        if spec.activation == "tanh":
            h = np.tanh(z)
        else:
            h = np.maximum(z, 0.0)
        hidden.append(h)
    w, b = layers[-1]
    out = np.matmul(h, w.transpose(0, 2, 1))
    out += b[:, None, :]
    if spec.output_squash:
        out = np.tanh(out)
    return hidden, out


def _activation_grad(spec: PolicySpec, h: np.ndarray) -> np.ndarray:
    # derivative expressed through the activation's own output
    if spec.activation == "tanh":
        return 1.0 - h * h
    return (h > 0.0).astype(h.dtype)


def _backward_pop(spec: PolicySpec, params2d: np.ndarray, layers,
                  states3d: np.ndarray, hidden, out: np.ndarray,
                  cotangents3d: np.ndarray) -> np.ndarray:
    """Backward half of the VJP, consuming cached forward activations."""
    grads = np.zeros_like(params2d)

    if spec.output_squash:
        g = cotangents3d * (1.0 - out * out)
    else:
        g = np.asarray(cotangents3d, dtype=params2d.dtype)

    inputs = [states3d, *hidden]  # inputs[l] feeds layer l
    n_layers = len(layers)
    for l in range(n_layers - 1, -1, -1):
        w, _b = layers[l]
        x = inputs[l]
        w_sl, b_sl = spec._param_slices[l]
        gw = np.matmul(g.transpose(0, 2, 1), x)           # (B, out, in)
        grads[:, w_sl] = gw.reshape(gw.shape[0], -1)
        grads[:, b_sl] = g.sum(axis=1)
        if l > 0:
            g = np.matmul(g, w)                            # (B, T, in)
            g *= _activation_grad(spec, hidden[l - 1])
    return grads


def _vjp_pop(spec: PolicySpec, params2d: np.ndarray, states3d: np.ndarray,
             cotangents3d: np.ndarray) -> np.ndarray:
    """Reverse-mode J^T c accumulated over the state axis.

    For each genotype b the result row is
    ``sum_t (d action(s_bt) / d params_b)^T @ c_bt`` -- one backward pass,
    no Jacobian materialization.
    """
    layers = _layer_views(spec, params2d)
    hidden, out = _forward_pop(spec, params2d, states3d)
    return _backward_pop(spec, params2d, layers, states3d, hidden, out,
                         cotangents3d)


def _check_state(spec: PolicySpec, s: np.ndarray, name: str = "state"):
    if s.shape[-1] != spec.state_dim:
        raise ValueError(f"{name} has dimension {s.shape[-1]}, expected {spec.state_dim}")


def forward(spec: PolicySpec, params: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Action for a single state. Deterministic."""
    state = np.asarray(state, dtype=params.dtype)
    _check_state(spec, state)
    _, out = _forward_pop(spec, params[None, :], state[None, None, :])
    return out[0, 0]


def forward_states(spec: PolicySpec, params: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Actions for a (T, state_dim) stack of states under one genotype."""
    states = np.asarray(states, dtype=params.dtype)
    _check_state(spec, states)
    _, out = _forward_pop(spec, params[None, :], states[None, :, :])
    return out[0]


def forward_pop(spec: PolicySpec, params2d: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Actions for B genotypes, one state each: (B, P) x (B, S) -> (B, A)."""
    _check_state(spec, states)
    _, out = _forward_pop(spec, params2d, states[:, None, :])
    return out[:, 0, :]


def forward_pop_states(spec: PolicySpec, params2d: np.ndarray, states3d: np.ndarray) -> np.ndarray:
    """Actions for B genotypes x T states each: (B, P) x (B, T, S) -> (B, T, A)."""
    _check_state(spec, states3d)
    _, out = _forward_pop(spec, params2d, states3d)
    return out


def vjp(spec: PolicySpec, params: np.ndarray, state: np.ndarray,
        cotangent: np.ndarray) -> np.ndarray:
    """J^T c for one state: the parameter-space image of an action nudge."""
    state = np.asarray(state, dtype=params.dtype)
    cotangent = np.asarray(cotangent, dtype=params.dtype)
    _check_state(spec, state)
    if cotangent.shape[-1] != spec.action_dim:
        raise ValueError("cotangent dimension mismatch")
    if not (np.isfinite(params).all() and np.isfinite(state).all()
            and np.isfinite(cotangent).all()):
        raise ValueError("vjp requires finite inputs")
    return _vjp_pop(spec, params[None, :], state[None, None, :],
                    cotangent[None, None, :])[0]


def vjp_states(spec: PolicySpec, params: np.ndarray, states: np.ndarray,
               cotangents: np.ndarray) -> np.ndarray:
    """Sum of per-state J^T c over a (T, S) x (T, A) trajectory."""
    states = np.asarray(states, dtype=params.dtype)
    cotangents = np.asarray(cotangents, dtype=params.dtype)
    _check_state(spec, states)
    return _vjp_pop(spec, params[None, :], states[None, :, :],
                    cotangents[None, :, :])[0]


def vjp_pop_states(spec: PolicySpec, params2d: np.ndarray, states3d: np.ndarray,
                   cotangents3d: np.ndarray) -> np.ndarray:
    """Batched :func:`vjp_states`: (B, P) x (B, T, S) x (B, T, A) -> (B, P)."""
    return _vjp_pop(spec, params2d, states3d, cotangents3d)


def forward_vjp_pop_states(spec: PolicySpec, params2d: np.ndarray,
                           states3d: np.ndarray):
    """One forward pass returning ``(actions, backward)``.

    ``backward(cotangents3d)`` yields exactly what :func:`vjp_pop_states`
    would for the same inputs, but reuses the activations cached here.
    Callers that need both the actions and their pullback -- the
    trajectory-matching inner loop -- pay one forward pass instead of two.
    """
    _check_state(spec, states3d)
    layers = _layer_views(spec, params2d)
    hidden, out = _forward_pop(spec, params2d, states3d)

    def backward(cotangents3d: np.ndarray) -> np.ndarray:
        return _backward_pop(spec, params2d, layers, states3d, hidden, out,
                             cotangents3d)

    return out, backward


# -- serialization ----------------------------------------------------------

def genotype_to_bytes(spec: PolicySpec, params: np.ndarray) -> bytes:
    """Little-endian blob: magic, spec digest, length, float64 payload."""
    payload = np.ascontiguousarray(params, dtype="<f8").tobytes()
    return (_BLOB_MAGIC + bytes.fromhex(spec_digest(spec))
            + struct.pack("<I", params.size) + payload)


def genotype_from_bytes(spec: PolicySpec, blob: bytes) -> np.ndarray:
    if blob[:4] != _BLOB_MAGIC:
        raise ValueError("not a genotype blob")
    digest = blob[4:20].hex()
    if digest != spec_digest(spec):
        raise ValueError("genotype blob was written for a different policy spec")
    (n,) = struct.unpack("<I", blob[20:24])
    if n != spec.parameter_count:
        raise ValueError("genotype length does not match spec")
    params = np.frombuffer(blob, dtype="<f8", count=n, offset=24).astype(np.float64)
    if not np.isfinite(params).all():
        raise ValueError("genotype blob contains non-finite entries")
    return params


def genotype_to_json(spec: PolicySpec, params: np.ndarray) -> str:
    """Debug-friendly JSON export (spec + parameter list)."""
    return json.dumps({"spec": spec.to_dict(), "params": params.tolist()})


def genotype_from_json(text: str) -> tuple[PolicySpec, np.ndarray]:
    d = json.loads(text)
    spec = PolicySpec.from_dict(d["spec"])
    params = np.asarray(d["params"], dtype=np.float64)
    if params.size != spec.parameter_count:
        raise ValueError("genotype length does not match spec")
    if not np.isfinite(params).all():
        raise ValueError("genotype contains non-finite entries")
    return spec, params
