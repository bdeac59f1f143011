#include "_conv_impl.h"

#define CRDOCO_REAL float
#define CRDOCO_FN(name) crdoco_##name##_f32
#include "_conv_body.h"
#undef CRDOCO_REAL
#undef CRDOCO_FN

#define CRDOCO_REAL double
#define CRDOCO_FN(name) crdoco_##name##_f64
#include "_conv_body.h"
#undef CRDOCO_REAL
#undef CRDOCO_FN

/* Exported wrappers (the template instantiations above are static). */

void crdoco_conv2d_fwd_float(const float* x, const float* w, float* out,
                             long n, long c, long h, long wd, long co,
                             long kh, long kw, long stride, long pad,
                             long ho, long wo)
{ crdoco_conv2d_fwd_f32(x, w, out, n, c, h, wd, co, kh, kw, stride, pad, ho, wo); }

void crdoco_conv2d_dx_float(const float* w, const float* dout, float* dx,
                            long n, long c, long h, long wd, long co,
                            long kh, long kw, long stride, long pad,
                            long ho, long wo)
{ crdoco_conv2d_dx_f32(w, dout, dx, n, c, h, wd, co, kh, kw, stride, pad, ho, wo); }

void crdoco_conv2d_dw_float(const float* x, const float* dout, float* dw, float* tmp,
                            long n, long c, long h, long wd, long co,
                            long kh, long kw, long stride, long pad,
                            long ho, long wo)
{ crdoco_conv2d_dw_f32(x, dout, dw, tmp, n, c, h, wd, co, kh, kw, stride, pad, ho, wo); }

void crdoco_conv2d_fwd_double(const double* x, const double* w, double* out,
                              long n, long c, long h, long wd, long co,
                              long kh, long kw, long stride, long pad,
                              long ho, long wo)
{ crdoco_conv2d_fwd_f64(x, w, out, n, c, h, wd, co, kh, kw, stride, pad, ho, wo); }

void crdoco_conv2d_dx_double(const double* w, const double* dout, double* dx,
                             long n, long c, long h, long wd, long co,
                             long kh, long kw, long stride, long pad,
                             long ho, long wo)
{ crdoco_conv2d_dx_f64(w, dout, dx, n, c, h, wd, co, kh, kw, stride, pad, ho, wo); }

void crdoco_conv2d_dw_double(const double* x, const double* dout, double* dw, double* tmp,
                             long n, long c, long h, long wd, long co,
                             long kh, long kw, long stride, long pad,
                             long ho, long wo)
{ crdoco_conv2d_dw_f64(x, dout, dw, tmp, n, c, h, wd, co, kh, kw, stride, pad, ho, wo); }
