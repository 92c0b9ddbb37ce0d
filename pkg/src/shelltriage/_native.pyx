# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Must stay numerically aligned with shelltriage.kernels._numpy: grid features
and resize are bit-identical (integer sums; same sample coordinates, same
multiply/add order, same rounding), cosine scores agree up to accumulation
order. Any change here needs the matching change there.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor
from libc.stdlib cimport free, malloc

cnp.import_array()


def resize_bilinear_u8(object src_obj, int out_h, int out_w):
    cdef const cnp.uint8_t[:, :, :] src = np.ascontiguousarray(src_obj, dtype=np.uint8)
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t nch = src.shape[2]
    if out_h == h and out_w == w:
        return np.asarray(src).copy()

    cdef double scale_y = (<double> h) / (<double> out_h)
    cdef double scale_x = (<double> w) / (<double> out_w)
    cdef Py_ssize_t y_cap = h - 2 if h >= 2 else 0
    cdef Py_ssize_t x_cap = w - 2 if w >= 2 else 0

    cdef Py_ssize_t *y0 = <Py_ssize_t *> malloc(out_h * sizeof(Py_ssize_t))
    cdef Py_ssize_t *y1 = <Py_ssize_t *> malloc(out_h * sizeof(Py_ssize_t))
    cdef double *fy = <double *> malloc(out_h * sizeof(double))
    cdef Py_ssize_t *x0 = <Py_ssize_t *> malloc(out_w * sizeof(Py_ssize_t))
    cdef Py_ssize_t *x1 = <Py_ssize_t *> malloc(out_w * sizeof(Py_ssize_t))
    cdef double *fx = <double *> malloc(out_w * sizeof(double))
    if y0 == NULL or y1 == NULL or fy == NULL or x0 == NULL or x1 == NULL or fx == NULL:
        free(y0); free(y1); free(fy); free(x0); free(x1); free(fx)
        raise MemoryError()

    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(out_h):
        s = ((<double> i) + 0.5) * scale_y - 0.5
        if s < 0.0:
            s = 0.0
        if s > <double> (h - 1):
            s = <double> (h - 1)
        y0[i] = <Py_ssize_t> s  # s >= 0, truncation == floor
        if y0[i] > y_cap:
            y0[i] = y_cap
        fy[i] = s - <double> y0[i]
        y1[i] = y0[i] + 1
        if y1[i] > h - 1:
            y1[i] = h - 1
    for j in range(out_w):
        s = ((<double> j) + 0.5) * scale_x - 0.5
        if s < 0.0:
            s = 0.0
        if s > <double> (w - 1):
            s = <double> (w - 1)
        x0[j] = <Py_ssize_t> s
        if x0[j] > x_cap:
            x0[j] = x_cap
        fx[j] = s - <double> x0[j]
        x1[j] = x0[j] + 1
        if x1[j] > w - 1:
            x1[j] = w - 1

    out_arr = np.empty((out_h, out_w, nch), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, :] out = out_arr
    cdef double top, bot, val
    cdef Py_ssize_t ia, ib, ja, jb
    cdef double wfx, wfy
    try:
        for i in range(out_h):
            ia = y0[i]
            ib = y1[i]
            wfy = fy[i]
            for j in range(out_w):
                ja = x0[j]
                jb = x1[j]
                wfx = fx[j]
                for k in range(nch):
                    top = (1.0 - wfx) * (<double> src[ia, ja, k]) + wfx * (<double> src[ia, jb, k])
                    bot = (1.0 - wfx) * (<double> src[ib, ja, k]) + wfx * (<double> src[ib, jb, k])
                    val = (1.0 - wfy) * top + wfy * bot
                    val = floor(val + 0.5)
                    if val < 0.0:
                        val = 0.0
                    if val > 255.0:
                        val = 255.0
                    out[i, j, k] = <cnp.uint8_t> val
    finally:
        free(y0); free(y1); free(fy); free(x0); free(x1); free(fx)
    return out_arr


def grid_features_u8(object img_obj, int grid):
    cdef const cnp.uint8_t[:, :, :] img = np.ascontiguousarray(img_obj, dtype=np.uint8)
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]

    feats_arr = np.zeros(grid * grid * 4, dtype=np.float64)
    cdef double[:] feats = feats_arr
    cdef Py_ssize_t gy, gx, y, x, ry0, ry1, cx0, cx1, ch, cw, base
    cdef long long sum_r, sum_g, sum_b, sdx, sdy, sa, sb
    cdef long long n_px, n_dx, n_dy
    cdef double tx, ty

    for gy in range(grid):
        ry0 = (gy * h) // grid
        ry1 = ((gy + 1) * h) // grid
        ch = ry1 - ry0
        for gx in range(grid):
            cx0 = (gx * w) // grid
            cx1 = ((gx + 1) * w) // grid
            cw = cx1 - cx0
            base = (gy * grid + gx) * 4

            sum_r = 0; sum_g = 0; sum_b = 0
            for y in range(ry0, ry1):
                for x in range(cx0, cx1):
                    sum_r += img[y, x, 0]
                    sum_g += img[y, x, 1]
                    sum_b += img[y, x, 2]
            n_px = ch * cw
            feats[base + 0] = (<double> sum_r) / (255.0 * (<double> n_px))
            feats[base + 1] = (<double> sum_g) / (255.0 * (<double> n_px))
            feats[base + 2] = (<double> sum_b) / (255.0 * (<double> n_px))

            tx = 0.0
            if cw > 1:
                sdx = 0
                for y in range(ry0, ry1):
                    for x in range(cx0, cx1 - 1):
                        sa = (<long long> img[y, x, 0]) + img[y, x, 1] + img[y, x, 2]
                        sb = (<long long> img[y, x + 1, 0]) + img[y, x + 1, 1] + img[y, x + 1, 2]
                        sdx += sb - sa if sb >= sa else sa - sb
                n_dx = (cw - 1) * ch
                tx = (<double> sdx) / (765.0 * (<double> n_dx))
            ty = 0.0
            if ch > 1:
                sdy = 0
                for y in range(ry0, ry1 - 1):
                    for x in range(cx0, cx1):
                        sa = (<long long> img[y, x, 0]) + img[y, x, 1] + img[y, x, 2]
                        sb = (<long long> img[y + 1, x, 0]) + img[y + 1, x, 1] + img[y + 1, x, 2]
                        sdy += sb - sa if sb >= sa else sa - sb
                n_dy = cw * (ch - 1)
                ty = (<double> sdy) / (765.0 * (<double> n_dy))
            feats[base + 3] = tx + ty
    return feats_arr


def cosine_scores(const double[:, :] mat, const double[:] norms, const double[:] query, double qnorm):
    cdef Py_ssize_t n = mat.shape[0]
    cdef Py_ssize_t d = mat.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] out = out_arr
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += mat[i, j] * query[j]
        out[i] = acc / (norms[i] * qnorm)
    return out_arr
