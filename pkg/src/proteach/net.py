"""Small dense classifier with hand-written forward and backward passes.

Everything is plain float64 numpy, so runs are reproducible bit-for-bit on a
given platform. Parameters are value-semantic: every update returns fresh
arrays instead of mutating in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolationError, DivergenceError

CE_EPS = 1e-12

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetConfig:
    """Architecture of the classifier: input -> hidden layers -> class logits."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError("all layer dimensions must be >= 1")
        if self.num_classes < 2:
            raise ConfigurationError("need at least 2 classes")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.num_classes)


@dataclass
class ParamSet:
    """Per-layer weight matrices (fan_in x fan_out) and bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "ParamSet":
        return ParamSet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def same_shape(self, other: "ParamSet") -> bool:
        return (
            len(self.weights) == len(other.weights)
            and all(a.shape == b.shape for a, b in zip(self.weights, other.weights))
            and all(a.shape == b.shape for a, b in zip(self.biases, other.biases))
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


@dataclass
class GradSet:
    """Gradient of a scalar loss, shaped exactly like its ParamSet."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() for w in self.weights) and all(
            np.isfinite(b).all() for b in self.biases
        )


@dataclass
class ForwardTrace:
    """Intermediate state of one forward pass, kept for backprop.

    For batched passes every array has a leading sample axis; for the
    single-vector entry point the arrays are one-dimensional.
    """

    inputs: np.ndarray
    pre_activations: list[np.ndarray]  # one per layer, last entry is the logits
    activations: list[np.ndarray]  # hidden activations only

    @property
    def logits(self) -> np.ndarray:
        return self.pre_activations[-1]


def lincomb(a: float, p: ParamSet, b: float, q: ParamSet) -> ParamSet:
    """Elementwise a*p + b*q for same-shape ParamSets."""
    if not p.same_shape(q):
        raise ContractViolationError("ParamSet shapes do not match")
    return ParamSet(
        [a * wp + b * wq for wp, wq in zip(p.weights, q.weights)],
        [a * bp + b * bq for bp, bq in zip(p.biases, q.biases)],
    )


def zeros_like(p: ParamSet) -> ParamSet:
    return ParamSet([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases])


def init_params(cfg: NetConfig, rng: np.random.Generator) -> ParamSet:
    """Uniform init in +-sqrt(6/(fan_in+fan_out)) per layer; zero biases."""
    weights, biases = [], []
    dims = cfg.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ParamSet(weights, biases)


def _check_params(params: ParamSet, cfg: NetConfig) -> None:
    dims = cfg.layer_dims
    if len(params.weights) != len(dims) - 1:
        raise ConfigurationError("layer count does not match NetConfig")
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        if params.weights[i].shape != (fan_in, fan_out) or params.biases[i].shape != (fan_out,):
            raise ConfigurationError(
                f"layer {i} shaped {params.weights[i].shape}, expected {(fan_in, fan_out)}"
            )


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    t = np.tanh(z)
    return 1.0 - t * t


def forward_batch(params: ParamSet, x: np.ndarray, cfg: NetConfig) -> ForwardTrace:
    """Forward pass over a batch, x shaped (n, input_dim)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise ConfigurationError(f"batch shaped {x.shape}, expected (n, {cfg.input_dim})")
    _check_params(params, cfg)
    pre, act = [], []
    a = x
    n_layers = len(params.weights)
    for i in range(n_layers):
        z = a @ params.weights[i] + params.biases[i]
        pre.append(z)
        if i < n_layers - 1:
            a = _activate(z, cfg.activation)
            act.append(a)
    return ForwardTrace(inputs=x, pre_activations=pre, activations=act)


def forward(params: ParamSet, x: np.ndarray, cfg: NetConfig) -> ForwardTrace:
    """Forward pass for a single feature vector of length input_dim."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigurationError(f"expected a 1-d feature vector, got shape {x.shape}")
    trace = forward_batch(params, x[None, :], cfg)
    return ForwardTrace(
        inputs=trace.inputs[0],
        pre_activations=[z[0] for z in trace.pre_activations],
        activations=[a[0] for a in trace.activations],
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def ce_loss(probs: np.ndarray, y_onehot: np.ndarray) -> float:
    """Cross entropy -sum_j y_j * log(p_j + eps) for a single sample."""
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y_onehot, dtype=np.float64)
    if probs.shape != y.shape:
        raise ContractViolationError("probs and one-hot label differ in length")
    if not (np.all((y == 0.0) | (y == 1.0)) and y.sum() == 1.0):
        raise ContractViolationError("label vector is not one-hot")
    return float(-(y * np.log(probs + CE_EPS)).sum())


def mse_consistency(p_student: np.ndarray, p_teacher: np.ndarray) -> float:
    """Squared Euclidean distance between two probability vectors."""
    p = np.asarray(p_student, dtype=np.float64)
    q = np.asarray(p_teacher, dtype=np.float64)
    if p.shape != q.shape:
        raise ContractViolationError("probability vectors differ in length")
    d = p - q
    return float((d * d).sum())


def backward_batch(
    trace: ForwardTrace, params: ParamSet, dlogits: np.ndarray, cfg: NetConfig
) -> GradSet:
    """Reverse-mode gradients given dLoss/dlogits per sample, summed over the batch."""
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != trace.logits.shape:
        raise ContractViolationError(
            f"upstream gradient shaped {dlogits.shape}, logits {trace.logits.shape}"
        )
    n_layers = len(params.weights)
    g_w = [None] * n_layers
    g_b = [None] * n_layers
    delta = dlogits
    for i in range(n_layers - 1, -1, -1):
        a_prev = trace.inputs if i == 0 else trace.activations[i - 1]
        g_w[i] = a_prev.T @ delta
        g_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * _activate_grad(
                trace.pre_activations[i - 1], cfg.activation
            )
    return GradSet(g_w, g_b)


def backward(
    trace: ForwardTrace, params: ParamSet, loss_grad_at_logits: np.ndarray, cfg: NetConfig
) -> GradSet:
    """Single-sample backward pass matching `forward`."""
    g = np.asarray(loss_grad_at_logits, dtype=np.float64)
    if g.ndim != 1:
        raise ContractViolationError("expected a 1-d logits gradient")
    batch_trace = ForwardTrace(
        inputs=trace.inputs[None, :],
        pre_activations=[z[None, :] for z in trace.pre_activations],
        activations=[a[None, :] for a in trace.activations],
    )
    return backward_batch(batch_trace, params, g[None, :], cfg)


def sgd_momentum_step(
    params: ParamSet,
    grads: GradSet,
    velocity: ParamSet,
    lr: float,
    momentum: float,
    weight_decay: float,
) -> tuple[ParamSet, ParamSet]:
    """One SGD step: v <- mu*v + (g + wd*p); p <- p - lr*v.

    Returns the updated (params, velocity); inputs are left untouched.
    """
    if lr <= 0.0:
        raise ConfigurationError("learning rate must be positive")
    if not 0.0 <= momentum < 1.0:
        raise ConfigurationError("momentum must be in [0, 1)")
    if not params.same_shape(velocity):
        raise ContractViolationError("velocity shape does not match params")
    if len(grads.weights) != len(params.weights) or any(
        g.shape != w.shape for g, w in zip(grads.weights, params.weights)
    ):
        raise ContractViolationError("gradient shape does not match params")
    if not grads.all_finite():
        raise DivergenceError("nonfinite gradients")
    new_w, new_b, vel_w, vel_b = [], [], [], []
    for w, b, gw, gb, vw, vb in zip(
        params.weights, params.biases, grads.weights, grads.biases, velocity.weights, velocity.biases
    ):
        nvw = momentum * vw + (gw + weight_decay * w)
        nvb = momentum * vb + (gb + weight_decay * b)
        vel_w.append(nvw)
        vel_b.append(nvb)
        new_w.append(w - lr * nvw)
        new_b.append(b - lr * nvb)
    return ParamSet(new_w, new_b), ParamSet(vel_w, vel_b)
