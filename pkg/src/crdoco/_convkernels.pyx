# cython: boundscheck=False, wraparound=False, language_level=3
"""Compiled convolution kernels: Cython glue over the C loops in _conv_impl.c.

Same contract as ``_kernels_numpy``: NCHW activations, OIHW weights,
symmetric zero padding, single-threaded, run-to-run deterministic.
"""

import numpy as np


cdef extern from "_conv_impl.h":
    void crdoco_conv2d_fwd_float(const float* x, const float* w, float* out,
                                 long n, long c, long h, long wd, long co,
                                 long kh, long kw, long stride, long pad,
                                 long ho, long wo) nogil
    void crdoco_conv2d_dx_float(const float* w, const float* dout, float* dx,
                                long n, long c, long h, long wd, long co,
                                long kh, long kw, long stride, long pad,
                                long ho, long wo) nogil
    void crdoco_conv2d_dw_float(const float* x, const float* dout, float* dw, float* tmp,
                                long n, long c, long h, long wd, long co,
                                long kh, long kw, long stride, long pad,
                                long ho, long wo) nogil
    void crdoco_conv2d_fwd_double(const double* x, const double* w, double* out,
                                  long n, long c, long h, long wd, long co,
                                  long kh, long kw, long stride, long pad,
                                  long ho, long wo) nogil
    void crdoco_conv2d_dx_double(const double* w, const double* dout, double* dx,
                                 long n, long c, long h, long wd, long co,
                                 long kh, long kw, long stride, long pad,
                                 long ho, long wo) nogil
    void crdoco_conv2d_dw_double(const double* x, const double* dout, double* dw, double* tmp,
                                 long n, long c, long h, long wd, long co,
                                 long kh, long kw, long stride, long pad,
                                 long ho, long wo) nogil


def conv2d_forward(x, w, b, int stride, int pad):
    cdef long n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef long co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef long ho = (h + 2 * pad - kh) // stride + 1
    cdef long wo = (wd + 2 * pad - kw) // stride + 1

    out = np.zeros((n, co, ho, wo), dtype=x.dtype)
    if b is not None:
        out += b.reshape(1, co, 1, 1)

    cdef float[:, :, :, ::1] xf, wf, of
    cdef double[:, :, :, ::1] xd, wdv, od
    if x.dtype == np.float32:
        xf, wf, of = x, w, out
        with nogil:
            crdoco_conv2d_fwd_float(&xf[0, 0, 0, 0], &wf[0, 0, 0, 0], &of[0, 0, 0, 0],
                                    n, c, h, wd, co, kh, kw, stride, pad, ho, wo)
    else:
        xd, wdv, od = x, w, out
        with nogil:
            crdoco_conv2d_fwd_double(&xd[0, 0, 0, 0], &wdv[0, 0, 0, 0], &od[0, 0, 0, 0],
                                     n, c, h, wd, co, kh, kw, stride, pad, ho, wo)
    return out


def conv2d_backward(x, w, dout, int stride, int pad, bint need_dx, bint need_dw):
    cdef long n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef long co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef long ho = dout.shape[2], wo = dout.shape[3]

    dx = np.zeros((n, c, h, wd), dtype=x.dtype) if need_dx else None
    dw = np.zeros((co, c, kh, kw), dtype=x.dtype) if need_dw else None
    db = dout.sum(axis=(0, 2, 3)) if need_dw else None
    tmp = np.zeros(3 * wo, dtype=x.dtype) if need_dw else None

    cdef float[:, :, :, ::1] xf, wf, gf, dxf, dwf
    cdef float[::1] tf
    cdef double[:, :, :, ::1] xd, wdv, gd, dxd, dwd
    cdef double[::1] td
    if x.dtype == np.float32:
        xf, wf, gf = x, w, dout
        if need_dx:
            dxf = dx
            with nogil:
                crdoco_conv2d_dx_float(&wf[0, 0, 0, 0], &gf[0, 0, 0, 0], &dxf[0, 0, 0, 0],
                                       n, c, h, wd, co, kh, kw, stride, pad, ho, wo)
        if need_dw:
            dwf, tf = dw, tmp
            with nogil:
                crdoco_conv2d_dw_float(&xf[0, 0, 0, 0], &gf[0, 0, 0, 0], &dwf[0, 0, 0, 0], &tf[0],
                                       n, c, h, wd, co, kh, kw, stride, pad, ho, wo)
    else:
        xd, wdv, gd = x, w, dout
        if need_dx:
            dxd = dx
            with nogil:
                crdoco_conv2d_dx_double(&wdv[0, 0, 0, 0], &gd[0, 0, 0, 0], &dxd[0, 0, 0, 0],
                                        n, c, h, wd, co, kh, kw, stride, pad, ho, wo)
        if need_dw:
            dwd, td = dw, tmp
            with nogil:
                crdoco_conv2d_dw_double(&xd[0, 0, 0, 0], &gd[0, 0, 0, 0], &dwd[0, 0, 0, 0], &td[0],
                                        n, c, h, wd, co, kh, kw, stride, pad, ho, wo)
    return dx, dw, db
