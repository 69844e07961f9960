"""Shared finite-difference machinery for gradient tests."""

from __future__ import annotations

import numpy as np

from proteach.net import GradSet, ParamSet

FD_STEP = 1e-5


def numeric_grad(loss_fn, params: ParamSet, h: float = FD_STEP) -> GradSet:
    """Central finite differences of loss_fn over every parameter coordinate."""
    g_w, g_b = [], []
    for li in range(len(params.weights)):
        for arrays, grads in ((params.weights, g_w), (params.biases, g_b)):
            arr = arrays[li]
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss_fn(params)
                arr[idx] = orig - h
                down = loss_fn(params)
                arr[idx] = orig
                g[idx] = (up - down) / (2.0 * h)
                it.iternext()
            grads.append(g)
    return GradSet(g_w, g_b)


def max_grad_error(analytic: GradSet, numeric: GradSet, rel: float = 1e-4, abs_tol: float = 1e-7):
    """Worst violation of |a-n| <= max(abs_tol, rel*max(|a|,|n|)); <= 0 means pass."""
    worst = -np.inf
    for a_arr, n_arr in zip(
        analytic.weights + analytic.biases, numeric.weights + numeric.biases
    ):
        scale = np.maximum(np.abs(a_arr), np.abs(n_arr))
        allowed = np.maximum(abs_tol, rel * scale)
        worst = max(worst, float((np.abs(a_arr - n_arr) - allowed).max()))
    return worst


def random_net(rng: np.random.Generator, max_dim: int = 8, max_classes: int = 7):
    """A random small architecture plus glorot-initialized parameters.

    Biases are randomized too so relu pre-activations do not land exactly on
    the kink (zero biases put whole dead layers there, where one-sided finite
    differences disagree with the subgradient).
    """
    from proteach.net import NetConfig, init_params

    input_dim = int(rng.integers(2, max_dim + 1))
    n_hidden = int(rng.integers(0, 3))
    hidden = tuple(int(rng.integers(2, max_dim + 1)) for _ in range(n_hidden))
    classes = int(rng.integers(2, max_classes + 1))
    activation = "relu" if rng.random() < 0.5 else "tanh"
    cfg = NetConfig(input_dim, hidden, classes, activation)
    params = init_params(cfg, rng)
    params.biases = [rng.normal(scale=0.1, size=b.shape) for b in params.biases]
    return cfg, params


def kink_free(params, xs: np.ndarray, cfg, margin: float = 1e-3) -> bool:
    """True when no relu pre-activation sits within `margin` of zero."""
    from proteach.net import forward_batch

    if cfg.activation != "relu":
        return True
    xs = np.atleast_2d(xs)
    trace = forward_batch(params, xs, cfg)
    return all(np.abs(z).min() > margin for z in trace.pre_activations[:-1])


def sample_kink_free_inputs(params, cfg, rng, shape, scale: float = 1.0) -> np.ndarray:
    for _ in range(200):
        xs = rng.normal(scale=scale, size=shape)
        if kink_free(params, xs, cfg):
            return xs
    raise RuntimeError("could not sample inputs away from relu kinks")
