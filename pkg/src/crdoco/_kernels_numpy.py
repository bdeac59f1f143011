"""Pure-numpy convolution kernels (fallback backend).

Forward and backward passes are implemented with an im2col lowering so the
inner loop runs inside BLAS.  Layout is NCHW with OIHW weights; strides and
zero padding are symmetric in both spatial directions.
"""

import numpy as np


def _out_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def _im2col(xp, kh, kw, stride, ho, wo):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[
                :, :,
                i : i + (ho - 1) * stride + 1 : stride,
                j : j + (wo - 1) * stride + 1 : stride,
            ]
    return cols


def conv2d_forward(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho, wo = _out_size(h, kh, stride, pad), _out_size(wd, kw, stride, pad)
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(xp, kh, kw, stride, ho, wo).reshape(n, c * kh * kw, ho * wo)
    out = np.matmul(w.reshape(co, -1), cols).reshape(n, co, ho, wo)
    if b is not None:
        out += b.reshape(1, co, 1, 1)
    return np.ascontiguousarray(out)


def conv2d_backward(x, w, dout, stride, pad, need_dx, need_dw):
    n, c, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho, wo = dout.shape[2], dout.shape[3]
    dout2 = dout.reshape(n, co, ho * wo)

    dx = dw = db = None
    if need_dw:
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        cols = _im2col(xp, kh, kw, stride, ho, wo).reshape(n, c * kh * kw, ho * wo)
        dw = np.matmul(dout2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
        db = dout.sum(axis=(0, 2, 3))
    if need_dx:
        dcols = np.matmul(w.reshape(co, -1).T, dout2)
        dcols = dcols.reshape(n, c, kh, kw, ho, wo)
        dxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[
                    :, :,
                    i : i + (ho - 1) * stride + 1 : stride,
                    j : j + (wo - 1) * stride + 1 : stride,
                ] += dcols[:, :, i, j]
        dx = np.ascontiguousarray(dxp[:, :, pad : pad + h, pad : pad + wd])
    return dx, dw, db
