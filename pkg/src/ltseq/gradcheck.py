"""Central finite-difference gradient checking at float64 precision.

The oracle never touches the tape: it perturbs raw input arrays, re-runs
the forward function, and compares the quotient against the analytic
gradient. Inputs must stay clear of relu/hardtanh kinks (the tape uses
subgradient 0 there, which finite differences cannot reproduce).
"""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter, Tensor, backward


def numeric_grad(f, arrays: list[np.ndarray], h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradient of scalar f(arrays) w.r.t. each array."""
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(arrays)
            flat[i] = orig - h
            down = f(arrays)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic: list[np.ndarray], numeric: list[np.ndarray],
                  floor: float = 1e-2) -> float:
    """max |a - n| / max(|a|, |n|, floor) over all coordinates."""
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def check_gradients(build, arrays: list[np.ndarray], h: float = 1e-5) -> float:
    """Compare tape gradients of `build` against finite differences.

    `build(tensors)` must return a scalar Tensor from a list of leaf
    Tensors created from `arrays`. Returns the max relative error.
    """
    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(leaves)
    backward(loss)
    analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
                for leaf in leaves]

    def scalar_f(arrs):
        ts = [Tensor(a) for a in arrs]
        return build(ts).item()

    numeric = numeric_grad(scalar_f, [a.copy() for a in arrays], h=h)
    return max_rel_error(analytic, numeric)


def check_parameter_gradients(forward, params: list[Parameter],
                              h: float = 1e-5) -> float:
    """Like check_gradients but perturbs live model parameters in place.

    `forward()` must rebuild the graph from the params and return a
    scalar Tensor. Used for whole-decoder-step checks where the graph is
    wired through a model object rather than loose tensors.
    """
    loss = forward()
    backward(loss, params=params)
    analytic = [p.grad.copy() for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = forward().item()
            flat[i] = orig - h
            down = forward().item()
            flat[i] = orig
            n = (up - down) / (2.0 * h)
            denom = max(abs(a.ravel()[i]), abs(n), 1e-2)
            worst = max(worst, abs(a.ravel()[i] - n) / denom)
    return worst
