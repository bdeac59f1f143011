"""Minimal reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps an ndarray and remembers how it was produced; calling
``backward()`` on a scalar walks the graph in reverse topological order and
accumulates gradients into every tensor with ``requires_grad`` set.  Only the
operations the networks and losses need are provided.  All ops preserve the
input dtype, so the same graph code runs in float32 for training and float64
for finite-difference checks.
"""

from __future__ import annotations

import contextlib

import numpy as np

from . import kernels

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (pure inference)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() only supported on scalar tensors")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # convenience arithmetic (losses are built from the functions below)
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_ensure(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return mul(self, 1.0 / float(other))


def _toposort(root):
    """Reverse topological order via iterative post-order DFS."""
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order


def _ensure(value, dtype):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _from_op(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    """Sum gradient ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b):
    a = _ensure(a, getattr(b, "dtype", None))
    b = _ensure(b, a.dtype)
    data = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _from_op(data, (a, b), bw)


def sub(a, b):
    a = _ensure(a, getattr(b, "dtype", None))
    b = _ensure(b, a.dtype)
    data = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _from_op(data, (a, b), bw)


def mul(a, b):
    a = _ensure(a, getattr(b, "dtype", None))
    b = _ensure(b, a.dtype)
    data = a.data * b.data

    def bw(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _from_op(data, (a, b), bw)


def div(a, b):
    a = _ensure(a, getattr(b, "dtype", None))
    b = _ensure(b, a.dtype)
    data = a.data / b.data

    def bw(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _from_op(data, (a, b), bw)


def square(x):
    data = x.data * x.data

    def bw(g):
        return (2.0 * g * x.data,)

    return _from_op(data, (x,), bw)


def absolute(x):
    data = np.abs(x.data)

    def bw(g):
        return (g * np.sign(x.data),)

    return _from_op(data, (x,), bw)


def log(x):
    data = np.log(x.data)

    def bw(g):
        return (g / x.data,)

    return _from_op(data, (x,), bw)


def sqrt_safe(x):
    """Elementwise sqrt whose gradient is 0 where the input is 0."""
    data = np.sqrt(x.data)

    def bw(g):
        denom = np.where(data > 0, 2.0 * data, 1.0)
        return (np.where(data > 0, g / denom, 0.0),)

    return _from_op(data, (x,), bw)


def clip(x, lo, hi):
    data = np.clip(x.data, lo, hi)

    def bw(g):
        inside = (x.data > lo) & (x.data < hi)
        return (g * inside,)

    return _from_op(data, (x,), bw)


# ---------------------------------------------------------------------------
# activations


def relu(x):
    data = np.maximum(x.data, 0)

    def bw(g):
        return (g * (x.data > 0),)

    return _from_op(data, (x,), bw)


def leaky_relu(x, alpha=0.2):
    data = np.where(x.data > 0, x.data, alpha * x.data)

    def bw(g):
        return (g * np.where(x.data > 0, 1.0, alpha).astype(x.dtype),)

    return _from_op(data, (x,), bw)


def tanh(x):
    data = np.tanh(x.data)

    def bw(g):
        return (g * (1.0 - data * data),)

    return _from_op(data, (x,), bw)


def sigmoid(x):
    data = 0.5 * (np.tanh(0.5 * x.data) + 1.0)

    def bw(g):
        return (g * data * (1.0 - data),)

    return _from_op(data, (x,), bw)


def softplus(x):
    data = np.logaddexp(0.0, x.data).astype(x.dtype)

    def bw(g):
        return (g * (0.5 * (np.tanh(0.5 * x.data) + 1.0)),)

    return _from_op(data, (x,), bw)


def softmax_channels(x):
    """Numerically stabilized softmax over axis 1 of an NCHW tensor."""
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        dot = (g * data).sum(axis=1, keepdims=True)
        return (data * (g - dot),)

    return _from_op(data, (x,), bw)


# ---------------------------------------------------------------------------
# reductions and shape ops


def sum_all(x):
    data = np.asarray(x.data.sum())

    def bw(g):
        return (np.broadcast_to(g, x.data.shape).astype(x.dtype),)

    return _from_op(data, (x,), bw)


def mean_all(x):
    n = x.data.size
    data = np.asarray(x.data.mean())

    def bw(g):
        return ((np.broadcast_to(g, x.data.shape) / n).astype(x.dtype),)

    return _from_op(data, (x,), bw)


def sum_axis(x, axis, keepdims=True):
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.data.shape).astype(x.dtype),)

    return _from_op(data, (x,), bw)


def concat0(tensors):
    data = np.concatenate([t.data for t in tensors], axis=0)
    sizes = [t.data.shape[0] for t in tensors]

    def bw(g):
        out, pos = [], 0
        for s in sizes:
            out.append(g[pos : pos + s])
            pos += s
        return tuple(out)

    return _from_op(data, tuple(tensors), bw)


def upsample2x(x):
    """Nearest-neighbour 2x spatial upsampling of an NCHW tensor."""
    data = x.data.repeat(2, axis=2).repeat(2, axis=3)

    def bw(g):
        n, c, h2, w2 = g.shape
        return (g.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)),)

    return _from_op(data, (x,), bw)


# ---------------------------------------------------------------------------
# network layers


def conv2d(x, w, b=None, stride=1, pad=0):
    data = kernels.conv2d_forward(x.data, w.data, None if b is None else b.data, stride, pad)
    parents = (x, w) if b is None else (x, w, b)

    def bw(g):
        need_dx = x.requires_grad
        need_dw = w.requires_grad or (b is not None and b.requires_grad)
        dx, dw, db = kernels.conv2d_backward(
            x.data, w.data, g, stride, pad, need_dx, need_dw
        )
        if b is None:
            return dx, dw
        return dx, dw, db

    return _from_op(data, parents, bw)


def instance_norm(x, gamma, beta, eps=1e-5):
    """Per-sample, per-channel normalization over the spatial axes."""
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    var = x.data.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    gshape = (1, -1, 1, 1)
    data = xhat * gamma.data.reshape(gshape) + beta.data.reshape(gshape)

    def bw(g):
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        gs = g * gamma.data.reshape(gshape)
        m1 = gs.mean(axis=(2, 3), keepdims=True)
        m2 = (gs * xhat).mean(axis=(2, 3), keepdims=True)
        dx = inv * (gs - m1 - xhat * m2)
        return dx.astype(x.dtype), dgamma.astype(gamma.dtype), dbeta.astype(beta.dtype)

    return _from_op(data, (x, gamma, beta), bw)
