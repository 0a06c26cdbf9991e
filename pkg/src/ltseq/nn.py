"""Shared layers: affine maps and the plain LSTM cell."""

from __future__ import annotations

import numpy as np

from .autodiff import ParamSet, Tensor, concat, matmul, sigmoid, tanh


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return matmul(x, w) + b


def add_lstm(ps: ParamSet, prefix: str, in_dim: int, hid: int) -> None:
    ps.add(f"{prefix}.w", (in_dim + hid, 4 * hid))
    ps.add(f"{prefix}.b", (4 * hid,))


def lstm_cell(ps: ParamSet, prefix: str, x: Tensor, h: Tensor,
              c: Tensor) -> tuple[Tensor, Tensor]:
    """One update; gate block order is input, forget, output, candidate."""
    hid = h.shape[1]
    z = affine(concat([x, h], axis=1), ps[f"{prefix}.w"].tensor,
               ps[f"{prefix}.b"].tensor)
    i = sigmoid(z[:, :hid])
    f = sigmoid(z[:, hid:2 * hid])
    o = sigmoid(z[:, 2 * hid:3 * hid])
    g = tanh(z[:, 3 * hid:])
    c_new = f * c + i * g
    h_new = o * tanh(c_new)
    return h_new, c_new
