"""Reverse-mode autodiff over dense float64 numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; backward()
replays the tape in reverse topological order. Only the operations the
sequence models need are provided: elementwise arithmetic, 2-D matmul,
activations, (log-)softmax, cumsum, reductions, concat/slice/reshape,
embedding lookup and chunk repetition. Everything is float64; gradient
checking against central finite differences is the correctness oracle
(see gradcheck.py).

Subgradient conventions: relu'(0) = 0, hardtanh'(x) = 0 for |x| >= 1.
Finite-difference checks must avoid the kink neighborhoods.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .errors import ConfigError, NumericalError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference/decoding)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A node on the tape: float64 values plus an optional backward rule."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        return _binary(self, other, np.add, _add_back)

    __radd__ = __add__

    def __sub__(self, other):
        return _binary(self, other, np.subtract, _sub_back)

    def __rsub__(self, other):
        return _binary(_as_tensor(other), self, np.subtract, _sub_back)

    def __mul__(self, other):
        return _binary(self, other, np.multiply, _mul_back)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _binary(self, other, np.divide, _div_back)

    def __rtruediv__(self, other):
        return _binary(_as_tensor(other), self, np.divide, _div_back)

    def __neg__(self):
        return _unary(self, lambda x: -x, lambda out, x: lambda: x._accum(-out.grad))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        out_data = self.data[key]
        out = Tensor(out_data, requires_grad=_track(self))
        if out.requires_grad:
            src = self

            def back():
                buf = np.zeros_like(src.data)
                np.add.at(buf, key, out.grad)
                src._accum(buf)

            out._parents = (src,)
            out._backward = back
        return out

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self
        out = Tensor(self.data.reshape(shape), requires_grad=_track(self))
        if out.requires_grad:
            out._parents = (src,)
            out._backward = lambda: src._accum(out.grad.reshape(src.data.shape))
        return out

    def transpose(self, axes=None):
        src = self
        real_axes = tuple(axes) if axes is not None else tuple(range(self.ndim))[::-1]
        inv = tuple(np.argsort(real_axes))
        out = Tensor(self.data.transpose(real_axes), requires_grad=_track(self))
        if out.requires_grad:
            out._parents = (src,)
            out._backward = lambda: src._accum(out.grad.transpose(inv))
        return out

    def sum(self, axis=None, keepdims=False):
        src = self
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims),
                     requires_grad=_track(self))
        if out.requires_grad:

            def back():
                g = out.grad
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                src._accum(np.broadcast_to(g, src.data.shape).copy())

            out._parents = (src,)
            out._backward = back
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _track(*tensors) -> bool:
    return _grad_enabled and any(t.requires_grad for t in tensors)


def _binary(a, b, fwd, make_back) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(fwd(a.data, b.data), requires_grad=_track(a, b))
    if out.requires_grad:
        out._parents = (a, b)
        out._backward = make_back(out, a, b)
    return out


def _add_back(out, a, b):
    def back():
        if a.requires_grad:
            a._accum(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(out.grad, b.data.shape))
    return back


def _sub_back(out, a, b):
    def back():
        if a.requires_grad:
            a._accum(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-out.grad, b.data.shape))
    return back


def _mul_back(out, a, b):
    def back():
        if a.requires_grad:
            a._accum(_unbroadcast(out.grad * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(out.grad * a.data, b.data.shape))
    return back


def _div_back(out, a, b):
    def back():
        if a.requires_grad:
            a._accum(_unbroadcast(out.grad / b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-out.grad * a.data / (b.data * b.data),
                                  b.data.shape))
    return back


def _unary(x, fwd, make_back) -> Tensor:
    x = _as_tensor(x)
    out = Tensor(fwd(x.data), requires_grad=_track(x))
    if out.requires_grad:
        out._parents = (x,)
        out._backward = make_back(out, x)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product; the only matmul shape the models need."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ConfigError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, requires_grad=_track(a, b))
    if out.requires_grad:

        def back():
            if a.requires_grad:
                a._accum(out.grad @ b.data.T)
            if b.requires_grad:
                b._accum(a.data.T @ out.grad)

        out._parents = (a, b)
        out._backward = back
    return out


def exp(x) -> Tensor:
    return _unary(x, np.exp,
                  lambda out, src: lambda: src._accum(out.grad * out.data))


def log(x) -> Tensor:
    return _unary(x, np.log,
                  lambda out, src: lambda: src._accum(out.grad / src.data))


def tanh(x) -> Tensor:
    return _unary(x, np.tanh,
                  lambda out, src: lambda: src._accum(
                      out.grad * (1.0 - out.data * out.data)))


def sigmoid(x) -> Tensor:
    def fwd(v):
        return 1.0 / (1.0 + np.exp(-v))
    return _unary(x, fwd,
                  lambda out, src: lambda: src._accum(
                      out.grad * out.data * (1.0 - out.data)))


def relu(x) -> Tensor:
    return _unary(x, lambda v: np.maximum(v, 0.0),
                  lambda out, src: lambda: src._accum(
                      out.grad * (src.data > 0.0)))


def hardtanh(x) -> Tensor:
    """clamp(x, -1, 1); subgradient 0 at the kinks."""
    return _unary(x, lambda v: np.clip(v, -1.0, 1.0),
                  lambda out, src: lambda: src._accum(
                      out.grad * ((src.data > -1.0) & (src.data < 1.0))))


def _check_axis(x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise ConfigError(f"axis {axis} invalid for shape {x.shape}")
    return axis % x.ndim if x.ndim else 0


def softmax(x, axis: int = -1) -> Tensor:
    """Max-stabilized softmax; slices along `axis` sum to 1."""
    x = _as_tensor(x)
    axis = _check_axis(x, axis)
    if not np.isfinite(x.data).all():
        raise NumericalError("softmax input contains non-finite values")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, requires_grad=_track(x))
    if out.requires_grad:

        def back():
            g = out.grad
            dot = (g * y).sum(axis=axis, keepdims=True)
            x._accum(y * (g - dot))

        out._parents = (x,)
        out._backward = back
    return out


def log_softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    axis = _check_axis(x, axis)
    if not np.isfinite(x.data).all():
        raise NumericalError("log_softmax input contains non-finite values")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    out = Tensor(y, requires_grad=_track(x))
    if out.requires_grad:

        def back():
            g = out.grad
            x._accum(g - np.exp(y) * g.sum(axis=axis, keepdims=True))

        out._parents = (x,)
        out._backward = back
    return out


def cumsum(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    axis = _check_axis(x, axis)
    out = Tensor(np.cumsum(x.data, axis=axis), requires_grad=_track(x))
    if out.requires_grad:

        def back():
            g = np.flip(np.cumsum(np.flip(out.grad, axis=axis), axis=axis),
                        axis=axis)
            x._accum(g)

        out._parents = (x,)
        out._backward = back
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 requires_grad=_track(*tensors))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def back():
            idx = [slice(None)] * out.ndim
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    idx[axis] = slice(lo, hi)
                    t._accum(out.grad[tuple(idx)])

        out._parents = tuple(tensors)
        out._backward = back
    return out


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup: table (V, E) indexed by an integer array of any shape."""
    ids = np.asarray(ids)
    out = Tensor(table.data[ids], requires_grad=_track(table))
    if out.requires_grad:

        def back():
            buf = np.zeros_like(table.data)
            np.add.at(buf, ids, out.grad)
            table._accum(buf)

        out._parents = (table,)
        out._backward = back
    return out


def gather_rows(x: Tensor, idx) -> Tensor:
    """Pick one column per row: (B, V)[i, idx[i]] -> (B,)."""
    idx = np.asarray(idx)
    rows = np.arange(x.shape[0])
    return x[(rows, idx)]


def repeat_chunks(x: Tensor, times: int, axis: int = -1) -> Tensor:
    """Repeat each element `times` times along `axis` (chunk expansion)."""
    x = _as_tensor(x)
    axis = _check_axis(x, axis)
    out = Tensor(np.repeat(x.data, times, axis=axis), requires_grad=_track(x))
    if out.requires_grad:

        def back():
            shape = list(out.grad.shape)
            shape[axis] = shape[axis] // times
            shape.insert(axis + 1, times)
            x._accum(out.grad.reshape(shape).sum(axis=axis + 1))

        out._parents = (x,)
        out._backward = back
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate == 0."""
    if rate <= 0.0:
        return x
    if rate >= 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * Tensor(mask)


# -- backward pass --------------------------------------------------------


def _topo_order(root: Tensor) -> list[Tensor]:
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params=()) -> None:
    """Fill grads of everything reachable from `loss`.

    Grads of the listed params are zeroed first, so parameters the loss
    does not depend on end up with exactly zero gradient and repeated
    calls on the same tape give identical results.
    """
    if loss.shape != ():
        raise ConfigError(f"backward requires a scalar loss, got shape {loss.shape}")
    for p in params:
        t = p.tensor if isinstance(p, Parameter) else p
        t.grad = np.zeros_like(t.data)
    order = _topo_order(loss)
    for node in order:
        if node is not loss:
            node.grad = np.zeros_like(node.data)
    if loss.grad is None:
        loss.grad = np.zeros_like(loss.data)
    loss.grad[...] = 1.0
    for node in reversed(order):
        if node._backward is not None:
            node._backward()


# -- parameters and optimizers --------------------------------------------


class Parameter:
    """A trainable leaf tensor plus Adam moment slots."""

    __slots__ = ("name", "tensor", "m", "v", "step_count")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.tensor = Tensor(np.asarray(value, dtype=np.float64),
                             requires_grad=True)
        self.m = np.zeros_like(self.tensor.data)
        self.v = np.zeros_like(self.tensor.data)
        self.step_count = 0

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self):
        return self.tensor.grad

    @property
    def shape(self):
        return self.tensor.data.shape

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


class ParamSet:
    """Ordered registry of named parameters; the unit of checkpointing."""

    def __init__(self, rng: np.random.Generator | None = None,
                 init_scale: float = 0.1):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.init_scale = init_scale
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, shape, scale: float | None = None) -> Parameter:
        """New parameter, uniform in [-scale, scale] (default init_scale)."""
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        s = self.init_scale if scale is None else scale
        value = self.rng.uniform(-s, s, size=shape)
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def add_zeros(self, name: str, shape) -> Parameter:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        p = Parameter(name, np.zeros(shape))
        self._params[name] = p
        return p

    def params(self) -> list[Parameter]:
        return list(self._params.values())

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ConfigError(
                f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in self._params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ConfigError(
                    f"shape mismatch for {name!r}: {arr.shape} vs {p.shape}")
            p.tensor.data = arr.copy()


def clip_global_norm(params, max_norm: float) -> float:
    """Scale all grads so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            if p.grad is not None:
                p.tensor.grad = p.grad * scale
    return norm


def optimizer_step(params, kind: str, lr: float,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> None:
    """SGD or bias-corrected Adam over the given parameters."""
    if lr < 0:
        raise ConfigError(f"learning rate must be non-negative, got {lr}")
    if kind not in ("sgd", "adam"):
        raise ConfigError(f"unknown optimizer kind {kind!r}")
    for p in params:
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if kind == "sgd":
            p.tensor.data = p.data - lr * g
        else:
            p.step_count += 1
            t = p.step_count
            p.m = beta1 * p.m + (1.0 - beta1) * g
            p.v = beta2 * p.v + (1.0 - beta2) * g * g
            m_hat = p.m / (1.0 - beta1 ** t)
            v_hat = p.v / (1.0 - beta2 ** t)
            p.tensor.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)
