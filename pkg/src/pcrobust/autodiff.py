"""Minimal dense-tensor reverse-mode differentiation.

Tensors wrap float64 numpy arrays and record a pullback closure per
operation (the tape is the implicit graph of ``_prev`` references).
Shapes are explicit 2-D/1-D/scalar; the only broadcast is the bias add in
``linear``. Every op validates that its result is finite and raises
NonFiniteError otherwise. Gradient accumulation order is the deterministic
reverse topological order of construction.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or Inf."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NonFiniteError("tensor initialized with non-finite values")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul_scalar(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(data: np.ndarray, parents, backward_fn) -> Tensor:
    if not np.isfinite(data).all():
        raise NonFiniteError("operation produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    out._prev = tuple(parents) if out.requires_grad else ()
    out._backward = backward_fn if out.requires_grad else None
    return out


def _accum(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def backward(loss: Tensor):
    """Backpropagate from a scalar; returns {leaf tensor: gradient array}."""
    if loss.data.shape != ():
        raise ValueError(f"backward needs a scalar, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any requires_grad tensor")
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones(())
    for node in reversed(order):
        if node._backward is not None:
            node._backward()
    return {t: t.grad for t in order if t._backward is None}


# ---------------------------------------------------------------------------
# core ops


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch {a.data.shape} vs {b.data.shape}")
    out = _result(a.data + b.data, (a, b), None)

    def _bw():
        _accum(a, out.grad)
        _accum(b, out.grad)

    out._backward = _bw if out.requires_grad else None
    return out


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """(n, d) + (d,) row-broadcast bias; the engine's one broadcast."""
    if x.data.ndim != 2 or b.data.shape != (x.data.shape[1],):
        raise ValueError(f"bias shape {b.data.shape} does not fit {x.data.shape}")
    out = _result(x.data + b.data, (x, b), None)

    def _bw():
        _accum(x, out.grad)
        _accum(b, out.grad.sum(axis=0))

    out._backward = _bw if out.requires_grad else None
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch {a.data.shape} vs {b.data.shape}")
    with np.errstate(over="ignore"):
        data = a.data * b.data
    out = _result(data, (a, b), None)

    def _bw():
        _accum(a, b.data * out.grad)
        _accum(b, a.data * out.grad)

    out._backward = _bw if out.requires_grad else None
    return out


def mul_scalar(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = _result(a.data * c, (a,), None)

    def _bw():
        _accum(a, c * out.grad)

    out._backward = _bw if out.requires_grad else None
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    # overflow/inf-minus-inf surface as NonFiniteError from the result check
    with np.errstate(over="ignore", invalid="ignore"):
        data = a.data @ b.data
    out = _result(data, (a, b), None)

    def _bw():
        _accum(a, out.grad @ b.data.T)
        _accum(b, a.data.T @ out.grad)

    out._backward = _bw if out.requires_grad else None
    return out


def transpose(a: Tensor) -> Tensor:
    out = _result(a.data.T.copy(), (a,), None)

    def _bw():
        _accum(a, out.grad.T)

    out._backward = _bw if out.requires_grad else None
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = _result(a.data.reshape(shape).copy(), (a,), None)

    def _bw():
        _accum(a, out.grad.reshape(a.data.shape))

    out._backward = _bw if out.requires_grad else None
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, None)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bw():
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            sl = (slice(None),) * axis + (slice(start, stop),)
            _accum(t, out.grad[sl])

    out._backward = _bw if out.requires_grad else None
    return out


def relu(a: Tensor) -> Tensor:
    out = _result(np.maximum(a.data, 0.0), (a,), None)

    def _bw():
        _accum(a, (a.data > 0.0) * out.grad)

    out._backward = _bw if out.requires_grad else None
    return out


def log(a: Tensor) -> Tensor:
    with np.errstate(divide="raise", invalid="raise"):
        try:
            data = np.log(a.data)
        except FloatingPointError as exc:
            raise NonFiniteError("log of non-positive value") from exc
    out = _result(data, (a,), None)

    def _bw():
        _accum(a, out.grad / a.data)

    out._backward = _bw if out.requires_grad else None
    return out


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):  # overflow -> inf -> NonFiniteError
        data = np.exp(a.data)
    out = _result(data, (a,), None)

    def _bw():
        _accum(a, out.data * out.grad)

    out._backward = _bw if out.requires_grad else None
    return out


def mean(a: Tensor) -> Tensor:
    out = _result(np.asarray(a.data.mean()), (a,), None)
    size = a.data.size

    def _bw():
        _accum(a, np.full(a.data.shape, float(out.grad) / size))

    out._backward = _bw if out.requires_grad else None
    return out


def tsum(a: Tensor) -> Tensor:
    out = _result(np.asarray(a.data.sum()), (a,), None)

    def _bw():
        _accum(a, np.full(a.data.shape, float(out.grad)))

    out._backward = _bw if out.requires_grad else None
    return out


def sum_axis(a: Tensor, axis: int) -> Tensor:
    if a.data.ndim != 2 or axis not in (0, 1):
        raise ValueError("sum_axis expects a 2-D tensor and axis 0 or 1")
    out = _result(a.data.sum(axis=axis), (a,), None)

    def _bw():
        g = out.grad[None, :] if axis == 0 else out.grad[:, None]
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    out._backward = _bw if out.requires_grad else None
    return out


def max_axis(a: Tensor, axis: int) -> Tensor:
    """Max over one axis of a 2-D tensor; gradient routes to the first argmax."""
    if a.data.ndim != 2 or axis not in (0, 1):
        raise ValueError("max_axis expects a 2-D tensor and axis 0 or 1")
    amax = a.data.argmax(axis=axis)
    out = _result(a.data.max(axis=axis), (a,), None)

    def _bw():
        g = np.zeros_like(a.data)
        if axis == 0:
            g[amax, np.arange(a.data.shape[1])] = out.grad
        else:
            g[np.arange(a.data.shape[0]), amax] = out.grad
        _accum(a, g)

    out._backward = _bw if out.requires_grad else None
    return out


def max_pool_rows(a: Tensor, group_size: int) -> Tensor:
    """(G*g, d) -> (G, d): per-column max within consecutive row groups."""
    rows, d = a.data.shape
    if rows % group_size != 0:
        raise ValueError(f"{rows} rows not divisible by group size {group_size}")
    groups = rows // group_size
    blocks = a.data.reshape(groups, group_size, d)
    amax = blocks.argmax(axis=1)  # first max on ties
    out = _result(blocks.max(axis=1), (a,), None)

    def _bw():
        g = np.zeros((groups, group_size, d))
        g[np.arange(groups)[:, None], amax, np.arange(d)[None, :]] = out.grad
        _accum(a, g.reshape(rows, d))

    out._backward = _bw if out.requires_grad else None
    return out


def softmax_rows(x: Tensor, tau: float = 1.0) -> Tensor:
    """Row-wise softmax of x/tau with max-subtraction for stability."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    z = (x.data - x.data.max(axis=1, keepdims=True)) / tau
    e = np.exp(z)
    y = e / e.sum(axis=1, keepdims=True)
    out = _result(y, (x,), None)

    def _bw():
        g = out.grad
        dot = (g * y).sum(axis=1, keepdims=True)
        _accum(x, y * (g - dot) / tau)

    out._backward = _bw if out.requires_grad else None
    return out


def log_softmax_rows(x: Tensor, tau: float = 1.0) -> Tensor:
    """Row-wise log softmax of x/tau; safe for extreme logit gaps."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    z = (x.data - x.data.max(axis=1, keepdims=True)) / tau
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = z - lse
    out = _result(y, (x,), None)

    def _bw():
        g = out.grad
        p = np.exp(y)
        _accum(x, (g - p * g.sum(axis=1, keepdims=True)) / tau)

    out._backward = _bw if out.requires_grad else None
    return out


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with b broadcast over rows."""
    return add_bias(matmul(x, w), b)


def finite_diff_check(f, x: Tensor, eps: float = 1e-4) -> float:
    """Max relative error between backward gradients and central differences.

    ``f`` maps a Tensor to a scalar Tensor. The relative error denominator
    is max(|analytic|, |numeric|, 1e-8) per entry.
    """
    if not x.requires_grad:
        raise ValueError("x must require gradients")
    out = f(x)
    grads = backward(out)
    if x not in grads:
        raise ValueError("f(x) does not depend on x")
    analytic = np.array(grads[x])

    base = np.array(x.data)
    numeric = np.empty_like(base)
    flat = base.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(Tensor(base)).item()
        flat[i] = orig - eps
        lo = f(Tensor(base)).item()
        flat[i] = orig
        num_flat[i] = (hi - lo) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float((np.abs(analytic - numeric) / denom).max())
