#ifndef CRDOCO_CONV_IMPL_H
#define CRDOCO_CONV_IMPL_H

void crdoco_conv2d_fwd_float(const float* x, const float* w, float* out,
                             long n, long c, long h, long wd, long co,
                             long kh, long kw, long stride, long pad,
                             long ho, long wo);
void crdoco_conv2d_dx_float(const float* w, const float* dout, float* dx,
                            long n, long c, long h, long wd, long co,
                            long kh, long kw, long stride, long pad,
                            long ho, long wo);
void crdoco_conv2d_dw_float(const float* x, const float* dout, float* dw, float* tmp,
                            long n, long c, long h, long wd, long co,
                            long kh, long kw, long stride, long pad,
                            long ho, long wo);

void crdoco_conv2d_fwd_double(const double* x, const double* w, double* out,
                              long n, long c, long h, long wd, long co,
                              long kh, long kw, long stride, long pad,
                              long ho, long wo);
void crdoco_conv2d_dx_double(const double* w, const double* dout, double* dx,
                             long n, long c, long h, long wd, long co,
                             long kh, long kw, long stride, long pad,
                             long ho, long wo);
void crdoco_conv2d_dw_double(const double* x, const double* dout, double* dw, double* tmp,
                             long n, long c, long h, long wd, long co,
                             long kh, long kw, long stride, long pad,
                             long ho, long wo);

#endif
