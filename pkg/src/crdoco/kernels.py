"""Backend dispatch for the convolution kernels.

The compiled extension is preferred when importable; the pure-numpy
implementation is the fallback.  ``CRDOCO_KERNELS`` overrides the choice
(``compiled`` | ``numpy`` | ``auto``).  Both backends share one contract:

    conv2d_forward(x, w, b, stride, pad) -> out
    conv2d_backward(x, w, dout, stride, pad, need_dx, need_dw) -> (dx, dw, db)

with float32/float64 NCHW activations and OIHW weights.
"""

import os

import numpy as np

from . import _kernels_numpy

_choice = os.environ.get("CRDOCO_KERNELS", "auto")
_impl = None
if _choice in ("auto", "compiled"):
    try:
        from . import _convkernels as _impl
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "CRDOCO_KERNELS=compiled but the extension is not built; "
                "run `pip install -e .` or `python setup.py build_ext --inplace`"
            )
elif _choice != "numpy":
    raise ValueError(f"unknown CRDOCO_KERNELS value: {_choice!r}")

BACKEND = "compiled" if _impl is not None else "numpy"
if _impl is None:
    _impl = _kernels_numpy


def backend_name():
    return BACKEND


def _as4d(a, name):
    a = np.ascontiguousarray(a)
    if a.ndim != 4:
        raise ValueError(f"{name} must be 4-d (got shape {a.shape})")
    return a


def conv2d_forward(x, w, b=None, stride=1, pad=0):
    x = _as4d(x, "x")
    w = _as4d(w, "w")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"channel mismatch: x has {x.shape[1]}, w expects {w.shape[1]}")
    if x.dtype != w.dtype:
        raise ValueError(f"dtype mismatch: {x.dtype} vs {w.dtype}")
    if b is not None:
        b = np.ascontiguousarray(b, dtype=x.dtype)
    return _impl.conv2d_forward(x, w, b, stride, pad)


def conv2d_backward(x, w, dout, stride=1, pad=0, need_dx=True, need_dw=True):
    x = _as4d(x, "x")
    w = _as4d(w, "w")
    dout = np.ascontiguousarray(dout, dtype=x.dtype)
    return _impl.conv2d_backward(x, w, dout, stride, pad, need_dx, need_dw)
