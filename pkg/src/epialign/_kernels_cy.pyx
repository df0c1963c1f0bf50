# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the per-pair epipolar kernels.

Mirrors ``_kernels_np`` exactly: mode 0 is the algebraic residual, mode 1 the
geometric point-to-line distance; lines with a vanishing normal are
degenerate (NaN residual, excluded from the sums); residuals below the
gradient dead zone keep their loss value but contribute a zero subgradient.
"""

from libc.math cimport fabs, sqrt, NAN

import numpy as np

LINE_NORMAL_EPS = 1e-12
GRAD_DEADZONE = 1e-9

MODE_ALGEBRAIC = 0
MODE_GEOMETRIC = 1

IMPL = "compiled"

cdef double C_LINE_EPS = 1e-12
cdef double C_DEADZONE = 1e-9


def pair_residuals(F, xy_i, xy_j, int mode):
    """Residuals of one pair; NaN marks degenerate geometric lines."""
    cdef double[:, ::1] Fv = np.ascontiguousarray(F, dtype=np.float64)
    cdef double[:, ::1] xi = np.ascontiguousarray(xy_i, dtype=np.float64)
    cdef double[:, ::1] xj = np.ascontiguousarray(xy_j, dtype=np.float64)
    cdef Py_ssize_t k = xi.shape[0]
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] e = out
    cdef Py_ssize_t n_deg = 0
    cdef Py_ssize_t m
    cdef double u, v, l0, l1, l2, s, n
    with nogil:
        for m in range(k):
            u = xi[m, 0]
            v = xi[m, 1]
            l0 = Fv[0, 0] * u + Fv[0, 1] * v + Fv[0, 2]
            l1 = Fv[1, 0] * u + Fv[1, 1] * v + Fv[1, 2]
            l2 = Fv[2, 0] * u + Fv[2, 1] * v + Fv[2, 2]
            s = xj[m, 0] * l0 + xj[m, 1] * l1 + l2
            if mode == 0:
                e[m] = fabs(s)
            else:
                n = sqrt(l0 * l0 + l1 * l1)
                if n < C_LINE_EPS:
                    e[m] = NAN
                    n_deg += 1
                else:
                    e[m] = fabs(s) / n
    return out, int(n_deg)


def pair_accumulate(F, xy_i, xy_j, w, int mode):
    """Weighted residual sum and its gradient w.r.t. F for one pair."""
    cdef double[:, ::1] Fv = np.ascontiguousarray(F, dtype=np.float64)
    cdef double[:, ::1] xi = np.ascontiguousarray(xy_i, dtype=np.float64)
    cdef double[:, ::1] xj = np.ascontiguousarray(xy_j, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t k = xi.shape[0]
    G_out = np.zeros((3, 3), dtype=np.float64)
    cdef double[:, ::1] G = G_out
    cdef double loss_sum = 0.0, weight_sum = 0.0
    cdef Py_ssize_t n_skipped = 0
    cdef Py_ssize_t m
    cdef double u, v, up, vp, l0, l1, l2, s, n, e, sgn, c1, c2, wk
    cdef double xph0, xph1
    with nogil:
        for m in range(k):
            u = xi[m, 0]
            v = xi[m, 1]
            up = xj[m, 0]
            vp = xj[m, 1]
            l0 = Fv[0, 0] * u + Fv[0, 1] * v + Fv[0, 2]
            l1 = Fv[1, 0] * u + Fv[1, 1] * v + Fv[1, 2]
            l2 = Fv[2, 0] * u + Fv[2, 1] * v + Fv[2, 2]
            s = up * l0 + vp * l1 + l2
            if mode == 0:
                n = 1.0
                e = fabs(s)
            else:
                n = sqrt(l0 * l0 + l1 * l1)
                if n < C_LINE_EPS:
                    n_skipped += 1
                    continue
                e = fabs(s) / n
            wk = wv[m]
            loss_sum += wk * e
            weight_sum += wk
            if e < C_DEADZONE:
                continue
            sgn = 1.0 if s > 0 else (-1.0 if s < 0 else 0.0)
            c1 = wk * sgn / n
            # term 1: c1 * x'_hom x_hom^T
            G[0, 0] += c1 * up * u
            G[0, 1] += c1 * up * v
            G[0, 2] += c1 * up
            G[1, 0] += c1 * vp * u
            G[1, 1] += c1 * vp * v
            G[1, 2] += c1 * vp
            G[2, 0] += c1 * u
            G[2, 1] += c1 * v
            G[2, 2] += c1
            if mode == 1:
                # term 2: -w |s| / n^3 * (l0, l1, 0)^T x_hom^T
                c2 = wk * fabs(s) / (n * n * n)
                G[0, 0] -= c2 * l0 * u
                G[0, 1] -= c2 * l0 * v
                G[0, 2] -= c2 * l0
                G[1, 0] -= c2 * l1 * u
                G[1, 1] -= c2 * l1 * v
                G[1, 2] -= c2 * l1
    return loss_sum, weight_sum, G_out, int(n_skipped)
