"""Minimal dense feedforward network with manual backpropagation and Adam.

Parameters live in one flat float64 vector per network; per-layer weight and
bias views are cheap slices of it. Layout, per linear layer: row-major weight
matrix, then bias vector. All functions here are pure: they return new values
and never mutate their arguments.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of the shared-trunk MLP: relu hidden layers, linear heads."""

    input_dim: int = 3
    hidden_layers: int = 3
    hidden_width: int = 50
    head_outputs: int = 4

    def __post_init__(self):
        for name in ("input_dim", "hidden_layers", "hidden_width", "head_outputs"):
            if getattr(self, name) < 1:
                raise ValueError(f"NetworkSpec.{name} must be >= 1")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of each linear layer, trunk first, heads last."""
        dims = [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.head_outputs]
        return list(zip(dims[:-1], dims[1:]))

    def n_params(self) -> int:
        return sum(din * dout + dout for din, dout in self.layer_dims())

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "head_outputs": self.head_outputs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(**{k: int(d[k]) for k in ("input_dim", "hidden_layers", "hidden_width", "head_outputs")})


def _layer_views(spec: NetworkSpec, flat: np.ndarray):
    weights, biases = [], []
    off = 0
    for din, dout in spec.layer_dims():
        weights.append(flat[off:off + din * dout].reshape(din, dout))
        off += din * dout
        biases.append(flat[off:off + dout])
        off += dout
    return weights, biases


@dataclass
class NetworkParams:
    """All weights and biases of one network, backed by a single flat vector."""

    spec: NetworkSpec
    flat: np.ndarray
    weights: list[np.ndarray] = field(init=False, repr=False)
    biases: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        if self.flat.shape != (self.spec.n_params(),):
            raise ValueError(f"expected {self.spec.n_params()} parameters, got {self.flat.shape}")
        self.weights, self.biases = _layer_views(self.spec, self.flat)

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.spec, self.flat.copy())


# Gradients share the flat-vector layout of NetworkParams.
Gradients = NetworkParams


@dataclass
class ForwardTrace:
    """Intermediate values of one forward pass, as needed by backward()."""

    inputs: np.ndarray            # (N, input_dim)
    pre_activations: list[np.ndarray]   # z of every linear layer, heads last
    activations: list[np.ndarray]       # relu(z) of every hidden layer
    head_raw: np.ndarray          # (N, head_outputs) or (head_outputs,) for 1-D input
    squeezed: bool


def init_network(spec: NetworkSpec, seed: int) -> NetworkParams:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.n_params())
    params = NetworkParams(spec, flat)
    for w in params.weights:
        bound = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


def relu(x):
    return np.maximum(x, 0.0)


def nnelu(x):
    """Shifted exponential-linear unit: x + 1 for x >= 0, exp(x) below; always > 0."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, x + 1.0, np.exp(np.minimum(x, 0.0)))
    return out if out.ndim else float(out)


def nnelu_grad(x):
    """Derivative of nnelu: 1 for x >= 0, exp(x) below."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, 1.0, np.exp(np.minimum(x, 0.0)))
    return out if out.ndim else float(out)


_ACTIVATIONS = {"relu": relu, "tanh": np.tanh, "nnelu": nnelu}


def activate(kind: str, x):
    """Apply one of the three supported activations elementwise."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    out = fn(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def forward(params: NetworkParams, x) -> ForwardTrace:
    """Run the network on one observation vector or an (N, input_dim) batch.

    Hidden layers use relu; head outputs are returned raw (un-squashed).
    """
    x = np.asarray(x, dtype=float)
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise ValueError(f"input shape {x.shape} incompatible with input_dim {params.spec.input_dim}")

    zs, hs = [], []
    h = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        zs.append(z)
        if l < last:
            h = np.maximum(z, 0.0)
            hs.append(h)
    head_raw = zs[-1][0] if squeezed else zs[-1]
    return ForwardTrace(x, zs, hs, head_raw, squeezed)


def backward(params: NetworkParams, trace: ForwardTrace, head_grads) -> Gradients:
    """Exact reverse-mode gradient of sum(head_grads * head_raw) w.r.t. every parameter.

    For batched traces, head_grads is (N, head_outputs) and gradients are summed
    over the batch; callers fold any 1/N for mean losses into head_grads.
    """
    g = np.asarray(head_grads, dtype=float)
    if trace.squeezed:
        g = g[None, :]
    if g.shape != trace.pre_activations[-1].shape:
        raise ValueError(f"head_grads shape {g.shape} does not match trace {trace.pre_activations[-1].shape}")

    grads = NetworkParams(params.spec, np.zeros_like(params.flat))
    delta = g
    for l in range(len(params.weights) - 1, -1, -1):
        below = trace.activations[l - 1] if l > 0 else trace.inputs
        grads.weights[l][...] = below.T @ delta
        grads.biases[l][...] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l].T) * (trace.pre_activations[l - 1] > 0.0)
    return grads


@dataclass
class AdamState:
    """First/second moment accumulators and step counter for one network."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPS


def init_adam(spec: NetworkSpec) -> AdamState:
    n = spec.n_params()
    return AdamState(m=np.zeros(n), v=np.zeros(n))


def adam_step(params: NetworkParams, grads: Gradients, state: AdamState,
              lr: float) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    if grads.flat.shape != params.flat.shape:
        raise ValueError("gradient/parameter shape mismatch")
    g = grads.flat
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_flat = params.flat - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return (NetworkParams(params.spec, new_flat),
            AdamState(m, v, t, state.beta1, state.beta2, state.epsilon))


def save_checkpoint(path: str | Path, params: NetworkParams, variant: str, meta: dict) -> None:
    """Write a JSON checkpoint: spec, per-layer flattened weights/biases (row-major),
    model-variant tag, and training metadata. Lossless for float64."""
    doc = {
        "spec": params.spec.to_dict(),
        "weights": [w.reshape(-1).tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "variant": variant,
        "meta": meta,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[NetworkParams, str, dict]:
    doc = json.loads(Path(path).read_text())
    spec = NetworkSpec.from_dict(doc["spec"])
    params = NetworkParams(spec, np.zeros(spec.n_params()))
    for w, saved in zip(params.weights, doc["weights"]):
        w[...] = np.asarray(saved, dtype=float).reshape(w.shape)
    for b, saved in zip(params.biases, doc["biases"]):
        b[...] = np.asarray(saved, dtype=float)
    return params, doc["variant"], doc["meta"]
