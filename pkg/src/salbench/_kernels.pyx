# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the tensor core.

Every routine takes C-contiguous float64 arrays laid out (n, c, h, w) and
accumulates in a fixed loop order, so results are bitwise reproducible.
Forward convolution adds the taps of each output element in row-major
(in_channel, ky, kx) order and the bias last, which is the order of the
naive six-loop reference.
"""

import numpy as np

from libc.math cimport floor


cdef inline Py_ssize_t _lo(Py_ssize_t off, Py_ssize_t stride) nogil:
    # smallest o >= 0 with o*stride + off >= 0
    if off >= 0:
        return 0
    return (-off + stride - 1) // stride


cdef inline Py_ssize_t _hi(Py_ssize_t off, Py_ssize_t stride, Py_ssize_t size, Py_ssize_t out) nogil:
    # one past the largest o < out with o*stride + off <= size - 1
    cdef Py_ssize_t last = size - 1 - off
    if last < 0:
        return 0
    last = last // stride + 1
    return last if last < out else out


def conv2d_forward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                   const double[::1] b, Py_ssize_t stride, Py_ssize_t pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, oc, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t i, o, ci, ky, kx, oy, ox, oy0, oy1, ox0, ox1, iy, xoff
    cdef double wv, bv
    cdef double *py
    cdef const double *px
    with nogil:
        for i in range(n):
            for o in range(oc):
                for ci in range(c):
                    for ky in range(kh):
                        oy0 = _lo(ky - pad, stride)
                        oy1 = _hi(ky - pad, stride, h, oh)
                        for kx in range(kw):
                            wv = w[o, ci, ky, kx]
                            ox0 = _lo(kx - pad, stride)
                            ox1 = _hi(kx - pad, stride, wd, ow)
                            xoff = kx - pad
                            if stride == 1:
                                for oy in range(oy0, oy1):
                                    iy = oy + ky - pad
                                    py = &y[i, o, oy, 0]
                                    px = &x[i, ci, iy, xoff]
                                    for ox in range(ox0, ox1):
                                        py[ox] += wv * px[ox]
                            else:
                                for oy in range(oy0, oy1):
                                    iy = oy * stride + ky - pad
                                    for ox in range(ox0, ox1):
                                        y[i, o, oy, ox] += wv * x[i, ci, iy, ox * stride + xoff]
                bv = b[o]
                for oy in range(oh):
                    for ox in range(ow):
                        y[i, o, oy, ox] += bv
    return out


def conv2d_backward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                    const double[:, :, :, ::1] dy, Py_ssize_t stride, Py_ssize_t pad,
                    bint need_dx=True):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = dy.shape[2], ow = dy.shape[3]
    dx_arr = np.zeros((n, c, h, wd), dtype=np.float64)
    dw_arr = np.zeros((oc, c, kh, kw), dtype=np.float64)
    db_arr = np.zeros(oc, dtype=np.float64)
    row_arr = np.zeros(max(ow, 1), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef double[::1] row = row_arr
    cdef Py_ssize_t i, o, ci, ky, kx, oy, ox, oy0, oy1, ox0, ox1, iy, xoff
    cdef double wv, acc
    cdef double *prow
    cdef const double *pdy
    cdef const double *px
    cdef double *pdx
    with nogil:
        for o in range(oc):
            acc = 0.0
            for i in range(n):
                for oy in range(oh):
                    for ox in range(ow):
                        acc = acc + dy[i, o, oy, ox]
            db[o] = acc
        prow = &row[0]
        for i in range(n):
            for o in range(oc):
                for ci in range(c):
                    for ky in range(kh):
                        oy0 = _lo(ky - pad, stride)
                        oy1 = _hi(ky - pad, stride, h, oh)
                        for kx in range(kw):
                            ox0 = _lo(kx - pad, stride)
                            ox1 = _hi(kx - pad, stride, wd, ow)
                            if ox1 <= ox0 or oy1 <= oy0:
                                continue
                            xoff = kx - pad
                            wv = w[o, ci, ky, kx]
                            # dw: per-column partial sums over rows, then a row-major reduction
                            for ox in range(ox0, ox1):
                                prow[ox] = 0.0
                            for oy in range(oy0, oy1):
                                iy = oy * stride + ky - pad
                                pdy = &dy[i, o, oy, 0]
                                if stride == 1:
                                    px = &x[i, ci, iy, xoff]
                                    for ox in range(ox0, ox1):
                                        prow[ox] += pdy[ox] * px[ox]
                                else:
                                    for ox in range(ox0, ox1):
                                        prow[ox] += pdy[ox] * x[i, ci, iy, ox * stride + xoff]
                            acc = 0.0
                            for ox in range(ox0, ox1):
                                acc = acc + prow[ox]
                            dw[o, ci, ky, kx] += acc
                            if not need_dx:
                                continue
                            for oy in range(oy0, oy1):
                                iy = oy * stride + ky - pad
                                pdy = &dy[i, o, oy, 0]
                                if stride == 1:
                                    pdx = &dx[i, ci, iy, xoff]
                                    for ox in range(ox0, ox1):
                                        pdx[ox] += wv * pdy[ox]
                                else:
                                    for ox in range(ox0, ox1):
                                        dx[i, ci, iy, ox * stride + xoff] += wv * pdy[ox]
    return dx_arr, dw_arr, db_arr


def maxpool2_forward(const double[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t oh = h // 2, ow = wd // 2
    out = np.empty((n, c, oh, ow), dtype=np.float64)
    idx = np.empty((n, c, oh, ow), dtype=np.int64)
    cdef double[:, :, :, ::1] y = out
    cdef long long[:, :, :, ::1] am = idx
    cdef Py_ssize_t i, ch, oy, ox, dyy, dxx, best
    cdef double v, m
    with nogil:
        for i in range(n):
            for ch in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        m = x[i, ch, 2 * oy, 2 * ox]
                        best = (2 * oy) * wd + 2 * ox
                        for dyy in range(2):
                            for dxx in range(2):
                                v = x[i, ch, 2 * oy + dyy, 2 * ox + dxx]
                                if v > m:
                                    m = v
                                    best = (2 * oy + dyy) * wd + 2 * ox + dxx
                        y[i, ch, oy, ox] = m
                        am[i, ch, oy, ox] = best
    return out, idx


cdef inline void _src_coord(Py_ssize_t d, Py_ssize_t insize, Py_ssize_t outsize,
                            Py_ssize_t *i0, Py_ssize_t *i1, double *frac) nogil:
    cdef double s = (d + 0.5) * (<double>insize / <double>outsize) - 0.5
    if s < 0.0:
        s = 0.0
    if s > insize - 1:
        s = insize - 1
    i0[0] = <Py_ssize_t>floor(s)
    i1[0] = i0[0] + 1 if i0[0] + 1 < insize else insize - 1
    frac[0] = s - i0[0]


def upsample_bilinear_forward(const double[:, :, :, ::1] x, Py_ssize_t oh, Py_ssize_t ow):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    out = np.empty((n, c, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out
    y0_arr = np.empty(oh, dtype=np.intp); y1_arr = np.empty(oh, dtype=np.intp)
    x0_arr = np.empty(ow, dtype=np.intp); x1_arr = np.empty(ow, dtype=np.intp)
    ly_arr = np.empty(oh, dtype=np.float64); lx_arr = np.empty(ow, dtype=np.float64)
    cdef Py_ssize_t[::1] y0 = y0_arr, y1 = y1_arr, x0 = x0_arr, x1 = x1_arr
    cdef double[::1] ly = ly_arr, lx = lx_arr
    cdef Py_ssize_t i, ch, oy, ox
    cdef double top, bot, a, b2
    with nogil:
        for oy in range(oh):
            _src_coord(oy, h, oh, &y0[oy], &y1[oy], &ly[oy])
        for ox in range(ow):
            _src_coord(ox, wd, ow, &x0[ox], &x1[ox], &lx[ox])
        for i in range(n):
            for ch in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        a = x[i, ch, y0[oy], x0[ox]]
                        top = a + lx[ox] * (x[i, ch, y0[oy], x1[ox]] - a)
                        b2 = x[i, ch, y1[oy], x0[ox]]
                        bot = b2 + lx[ox] * (x[i, ch, y1[oy], x1[ox]] - b2)
                        y[i, ch, oy, ox] = top + ly[oy] * (bot - top)
    return out


def upsample_bilinear_backward(const double[:, :, :, ::1] dy, Py_ssize_t h, Py_ssize_t wd):
    cdef Py_ssize_t n = dy.shape[0], c = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    dx_arr = np.zeros((n, c, h, wd), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    y0_arr = np.empty(oh, dtype=np.intp); y1_arr = np.empty(oh, dtype=np.intp)
    x0_arr = np.empty(ow, dtype=np.intp); x1_arr = np.empty(ow, dtype=np.intp)
    ly_arr = np.empty(oh, dtype=np.float64); lx_arr = np.empty(ow, dtype=np.float64)
    cdef Py_ssize_t[::1] y0 = y0_arr, y1 = y1_arr, x0 = x0_arr, x1 = x1_arr
    cdef double[::1] ly = ly_arr, lx = lx_arr
    cdef Py_ssize_t i, ch, oy, ox
    cdef double g, gt, gb
    with nogil:
        for oy in range(oh):
            _src_coord(oy, h, oh, &y0[oy], &y1[oy], &ly[oy])
        for ox in range(ow):
            _src_coord(ox, wd, ow, &x0[ox], &x1[ox], &lx[ox])
        for i in range(n):
            for ch in range(c):
                for oy in range(oh):
                    for ox in range(ow):
                        g = dy[i, ch, oy, ox]
                        gt = g * (1.0 - ly[oy])
                        gb = g * ly[oy]
                        dx[i, ch, y0[oy], x0[ox]] += gt * (1.0 - lx[ox])
                        dx[i, ch, y0[oy], x1[ox]] += gt * lx[ox]
                        dx[i, ch, y1[oy], x0[ox]] += gb * (1.0 - lx[ox])
                        dx[i, ch, y1[oy], x1[ox]] += gb * lx[ox]
    return dx_arr
