"""Network building blocks: modules, layers, initialization, optimizer."""

from __future__ import annotations

import contextlib

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Parameter(Tensor):
    def __init__(self, data):
        super().__init__(np.asarray(data), requires_grad=True)


class Module:
    """Container with torch-style attribute registration of params/children."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield (f"{prefix}{name}", p)
        for name, child in self._children.items():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def param_count(self):
        return sum(p.data.size for p in self.parameters())

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = set(own) - set(state)
            extra = set(state) - set(own)
            raise ValueError(f"state dict mismatch: missing={sorted(missing)}, unexpected={sorted(extra)}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()

    def copy_from(self, other):
        self.load_state_dict(other.state_dict())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


@contextlib.contextmanager
def frozen(modules):
    """Temporarily clear requires_grad so backward skips these parameters."""
    params = [p for m in modules for p in m.parameters()]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p in params:
            p.requires_grad = True


def he_init(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d(Module):
    def __init__(self, cin, cout, k, rng, stride=1, pad=None, bias=True, dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.pad = k // 2 if pad is None else pad
        self.w = Parameter(he_init(rng, (cout, cin, k, k), cin * k * k, dtype))
        self.b = Parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def forward(self, x):
        return ad.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)


class InstanceNorm2d(Module):
    def __init__(self, channels, dtype=np.float32, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))

    def forward(self, x):
        return ad.instance_norm(x, self.gamma, self.beta, eps=self.eps)


class SGD:
    """Momentum gradient descent with L2 weight decay.

    One instance owns the momentum buffers for every named parameter it was
    given; ``step`` can be restricted to a subset of names so alternating
    phases never touch the other side's parameters.
    """

    def __init__(self, named_params, lr, momentum=0.0, weight_decay=0.0, lr_mults=None):
        self.params = dict(named_params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.lr_mults = dict(lr_mults or {})
        self.buffers = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def _lr_for(self, name):
        for prefix, mult in self.lr_mults.items():
            if name == prefix or name.startswith(prefix + "."):
                return self.lr * mult
        return self.lr

    def step(self, names=None):
        names = self.params.keys() if names is None else names
        for name in names:
            p = self.params[name]
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data
            buf = self.buffers[name]
            buf *= self.momentum
            buf += g
            p.data = p.data - self._lr_for(name) * buf

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_dict(self):
        return {name: buf.copy() for name, buf in self.buffers.items()}

    def load_state_dict(self, state):
        for name, buf in state.items():
            if name in self.buffers:
                self.buffers[name] = np.asarray(buf, dtype=self.buffers[name].dtype).copy()
