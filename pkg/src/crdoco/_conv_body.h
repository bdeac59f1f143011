/* Convolution kernel bodies, instantiated once per element type via
 * CRDOCO_REAL / CRDOCO_FN.  All arrays are C-contiguous NCHW / OIHW; the
 * caller zero-initializes (or bias-fills) every output buffer.
 *
 * The 3x3 / stride-1 / pad-1 case every network here leans on runs through
 * fused-tap unit-stride loops the compiler can vectorize; other shapes take
 * generic per-tap loops.  Summation order is fixed by the code, so results
 * are run-to-run deterministic.
 */

static void CRDOCO_FN(conv2d_fwd)(
    const CRDOCO_REAL* restrict x, const CRDOCO_REAL* restrict w,
    CRDOCO_REAL* restrict out,
    long n, long c, long h, long wd,
    long co, long kh, long kw, long stride, long pad,
    long ho, long wo)
{
    if (kh == 3 && kw == 3 && stride == 1 && pad == 1 && wd >= 2) {
        for (long nn = 0; nn < n; nn++)
        for (long o = 0; o < co; o++)
        for (long cc = 0; cc < c; cc++)
        for (long i = 0; i < 3; i++) {
            const CRDOCO_REAL* wt = w + ((o * c + cc) * 3 + i) * 3;
            CRDOCO_REAL w0 = wt[0], w1 = wt[1], w2 = wt[2];
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy - 1 + i;
                if (iy < 0 || iy >= h) continue;
                CRDOCO_REAL* restrict orow = out + ((nn * co + o) * ho + oy) * wo;
                const CRDOCO_REAL* restrict xr = x + ((nn * c + cc) * h + iy) * wd;
                orow[0] += w1 * xr[0] + w2 * xr[1];
                orow[wo - 1] += w0 * xr[wo - 2] + w1 * xr[wo - 1];
                for (long ox = 1; ox < wo - 1; ox++)
                    orow[ox] += w0 * xr[ox - 1] + w1 * xr[ox] + w2 * xr[ox + 1];
            }
        }
        return;
    }
    for (long nn = 0; nn < n; nn++)
    for (long o = 0; o < co; o++)
    for (long cc = 0; cc < c; cc++)
    for (long i = 0; i < kh; i++)
    for (long j = 0; j < kw; j++) {
        CRDOCO_REAL wv = w[((o * c + cc) * kh + i) * kw + j];
        if (wv == 0) continue;
        if (stride == 1) {
            long off = j - pad;
            long lo = off < 0 ? -off : 0;
            long hi = wd - off < wo ? wd - off : wo;
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy - pad + i;
                if (iy < 0 || iy >= h) continue;
                CRDOCO_REAL* restrict orow = out + ((nn * co + o) * ho + oy) * wo;
                const CRDOCO_REAL* restrict xrow = x + ((nn * c + cc) * h + iy) * wd + off;
                for (long ox = lo; ox < hi; ox++)
                    orow[ox] += wv * xrow[ox];
            }
        } else {
            long lo = pad <= j ? 0 : (pad - j + stride - 1) / stride;
            long hi = (wd - 1 + pad - j) / stride + 1;
            if (hi > wo) hi = wo;
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy * stride - pad + i;
                if (iy < 0 || iy >= h) continue;
                CRDOCO_REAL* restrict orow = out + ((nn * co + o) * ho + oy) * wo;
                const CRDOCO_REAL* restrict xrow = x + ((nn * c + cc) * h + iy) * wd;
                for (long ox = lo; ox < hi; ox++)
                    orow[ox] += wv * xrow[ox * stride - pad + j];
            }
        }
    }
}

static void CRDOCO_FN(conv2d_dx)(
    const CRDOCO_REAL* restrict w, const CRDOCO_REAL* restrict dout,
    CRDOCO_REAL* restrict dx,
    long n, long c, long h, long wd,
    long co, long kh, long kw, long stride, long pad,
    long ho, long wo)
{
    if (kh == 3 && kw == 3 && stride == 1 && pad == 1 && wd >= 2) {
        /* dx[iy][ix] += sum_j w[j] * dout[oy = iy + 1 - i][ox = ix + 1 - j] */
        for (long nn = 0; nn < n; nn++)
        for (long o = 0; o < co; o++)
        for (long cc = 0; cc < c; cc++)
        for (long i = 0; i < 3; i++) {
            const CRDOCO_REAL* wt = w + ((o * c + cc) * 3 + i) * 3;
            CRDOCO_REAL w0 = wt[0], w1 = wt[1], w2 = wt[2];
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy - 1 + i;
                if (iy < 0 || iy >= h) continue;
                CRDOCO_REAL* restrict drow = dx + ((nn * c + cc) * h + iy) * wd;
                const CRDOCO_REAL* restrict grow = dout + ((nn * co + o) * ho + oy) * wo;
                drow[0] += w1 * grow[0] + w0 * grow[1];
                drow[wd - 1] += w2 * grow[wo - 2] + w1 * grow[wo - 1];
                for (long ix = 1; ix < wd - 1; ix++)
                    drow[ix] += w2 * grow[ix - 1] + w1 * grow[ix] + w0 * grow[ix + 1];
            }
        }
        return;
    }
    for (long nn = 0; nn < n; nn++)
    for (long o = 0; o < co; o++)
    for (long cc = 0; cc < c; cc++)
    for (long i = 0; i < kh; i++)
    for (long j = 0; j < kw; j++) {
        CRDOCO_REAL wv = w[((o * c + cc) * kh + i) * kw + j];
        if (wv == 0) continue;
        if (stride == 1) {
            long off = j - pad;
            long lo = off < 0 ? -off : 0;
            long hi = wd - off < wo ? wd - off : wo;
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy - pad + i;
                if (iy < 0 || iy >= h) continue;
                CRDOCO_REAL* restrict drow = dx + ((nn * c + cc) * h + iy) * wd + off;
                const CRDOCO_REAL* restrict grow = dout + ((nn * co + o) * ho + oy) * wo;
                for (long ox = lo; ox < hi; ox++)
                    drow[ox] += wv * grow[ox];
            }
        } else {
            long lo = pad <= j ? 0 : (pad - j + stride - 1) / stride;
            long hi = (wd - 1 + pad - j) / stride + 1;
            if (hi > wo) hi = wo;
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy * stride - pad + i;
                if (iy < 0 || iy >= h) continue;
                CRDOCO_REAL* restrict drow = dx + ((nn * c + cc) * h + iy) * wd;
                const CRDOCO_REAL* restrict grow = dout + ((nn * co + o) * ho + oy) * wo;
                for (long ox = lo; ox < hi; ox++)
                    drow[ox * stride - pad + j] += wv * grow[ox];
            }
        }
    }
}

/* tmp has 3 * wo elements.  Per-tap elementwise products accumulate into the
 * tmp rows (vectorizable, fixed order) and collapse to scalars at the end. */
static void CRDOCO_FN(conv2d_dw)(
    const CRDOCO_REAL* restrict x, const CRDOCO_REAL* restrict dout,
    CRDOCO_REAL* restrict dw, CRDOCO_REAL* restrict tmp,
    long n, long c, long h, long wd,
    long co, long kh, long kw, long stride, long pad,
    long ho, long wo)
{
    if (kh == 3 && kw == 3 && stride == 1 && pad == 1 && wd >= 2) {
        CRDOCO_REAL* restrict t0 = tmp;
        CRDOCO_REAL* restrict t1 = tmp + wo;
        CRDOCO_REAL* restrict t2 = tmp + 2 * wo;
        for (long o = 0; o < co; o++)
        for (long cc = 0; cc < c; cc++)
        for (long i = 0; i < 3; i++) {
            for (long ox = 0; ox < wo; ox++) { t0[ox] = 0; t1[ox] = 0; t2[ox] = 0; }
            for (long nn = 0; nn < n; nn++)
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy - 1 + i;
                if (iy < 0 || iy >= h) continue;
                const CRDOCO_REAL* restrict grow = dout + ((nn * co + o) * ho + oy) * wo;
                const CRDOCO_REAL* restrict xr = x + ((nn * c + cc) * h + iy) * wd;
                t1[0] += grow[0] * xr[0];
                t2[0] += grow[0] * xr[1];
                t0[wo - 1] += grow[wo - 1] * xr[wo - 2];
                t1[wo - 1] += grow[wo - 1] * xr[wo - 1];
                for (long ox = 1; ox < wo - 1; ox++) {
                    CRDOCO_REAL g = grow[ox];
                    t0[ox] += g * xr[ox - 1];
                    t1[ox] += g * xr[ox];
                    t2[ox] += g * xr[ox + 1];
                }
            }
            CRDOCO_REAL a0 = 0, a1 = 0, a2 = 0;
            for (long ox = 0; ox < wo; ox++) { a0 += t0[ox]; a1 += t1[ox]; a2 += t2[ox]; }
            CRDOCO_REAL* wt = dw + ((o * c + cc) * 3 + i) * 3;
            wt[0] += a0; wt[1] += a1; wt[2] += a2;
        }
        return;
    }
    for (long o = 0; o < co; o++)
    for (long cc = 0; cc < c; cc++)
    for (long i = 0; i < kh; i++)
    for (long j = 0; j < kw; j++) {
        if (stride == 1) {
            long off = j - pad;
            long lo = off < 0 ? -off : 0;
            long hi = wd - off < wo ? wd - off : wo;
            for (long ox = 0; ox < wo; ox++) tmp[ox] = 0;
            for (long nn = 0; nn < n; nn++)
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy - pad + i;
                if (iy < 0 || iy >= h) continue;
                const CRDOCO_REAL* restrict grow = dout + ((nn * co + o) * ho + oy) * wo;
                const CRDOCO_REAL* restrict xrow = x + ((nn * c + cc) * h + iy) * wd + off;
                for (long ox = lo; ox < hi; ox++)
                    tmp[ox] += grow[ox] * xrow[ox];
            }
            CRDOCO_REAL acc = 0;
            for (long ox = 0; ox < wo; ox++) acc += tmp[ox];
            dw[((o * c + cc) * kh + i) * kw + j] += acc;
        } else {
            long lo = pad <= j ? 0 : (pad - j + stride - 1) / stride;
            long hi = (wd - 1 + pad - j) / stride + 1;
            if (hi > wo) hi = wo;
            CRDOCO_REAL acc = 0;
            for (long nn = 0; nn < n; nn++)
            for (long oy = 0; oy < ho; oy++) {
                long iy = oy * stride - pad + i;
                if (iy < 0 || iy >= h) continue;
                const CRDOCO_REAL* restrict grow = dout + ((nn * co + o) * ho + oy) * wo;
                const CRDOCO_REAL* restrict xrow = x + ((nn * c + cc) * h + iy) * wd;
                for (long ox = lo; ox < hi; ox++)
                    acc += grow[ox] * xrow[ox * stride - pad + j];
            }
            dw[((o * c + cc) * kh + i) * kw + j] += acc;
        }
    }
}
