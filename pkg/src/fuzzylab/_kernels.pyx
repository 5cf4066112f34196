# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tensor-product cubic B-spline evaluation and the geodesic RK4 loop."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef enum:
    K = 3


cdef inline Py_ssize_t _span(const double[::1] t, double x) noexcept nogil:
    cdef Py_ssize_t lo = K, hi = t.shape[0] - K - 1, mid
    if x >= t[hi]:
        return hi - 1
    if x <= t[lo]:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x < t[mid]:
            hi = mid
        else:
            lo = mid
    return lo


cdef inline void _basis(const double[::1] t, Py_ssize_t l, double x, double* N) noexcept nogil:
    cdef double left[K + 1]
    cdef double right[K + 1]
    cdef double saved, temp
    cdef Py_ssize_t j, r
    N[0] = 1.0
    for j in range(1, K + 1):
        left[j] = x - t[l + 1 - j]
        right[j] = t[l + j] - x
        saved = 0.0
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved


cdef void _eval(const double[::1] tx, const double[::1] ty, const double[:, :, ::1] coef,
                double u, double v, double* out) noexcept nogil:
    cdef double bu[K + 1]
    cdef double bv[K + 1]
    cdef Py_ssize_t lu = _span(tx, u), lv = _span(ty, v)
    cdef Py_ssize_t c, i, j, iu = lu - K, iv = lv - K
    cdef double acc, row
    _basis(tx, lu, u, bu)
    _basis(ty, lv, v, bv)
    for c in range(coef.shape[0]):
        acc = 0.0
        for i in range(K + 1):
            row = 0.0
            for j in range(K + 1):
                row = row + coef[c, iu + i, iv + j] * bv[j]
            acc = acc + bu[i] * row
        out[c] = acc


def eval_spline(const double[::1] tx, const double[::1] ty, const double[:, :, ::1] coef, double u, double v):
    out = np.empty(coef.shape[0])
    cdef double[::1] o = out
    _eval(tx, ty, coef, u, v, &o[0])
    return out


cdef void _accel(const double[::1] tx, const double[::1] ty, const double[:, :, ::1] coef,
                 const double* y, double* dy, double* work) noexcept nogil:
    # y = (t, s1, s2, tdot, s1dot, s2dot); work holds the 27 Christoffel channels
    cdef Py_ssize_t a, b, c
    cdef double acc
    _eval(tx, ty, coef, y[1], y[2], work)
    for a in range(3):
        dy[a] = y[3 + a]
        acc = 0.0
        for b in range(3):
            for c in range(3):
                acc = acc + work[9 * a + 3 * b + c] * y[3 + b] * y[3 + c]
        dy[3 + a] = -acc


def integrate_rk4(const double[::1] tx, const double[::1] ty, const double[:, :, ::1] coef,
                  y0, double h, Py_ssize_t nsteps, lo, hi):
    """RK4 for ``y'' = -C(s) y' y'`` on the 3-component state; stops on leaving ``[lo, hi]``."""
    traj = np.zeros((nsteps + 1, 6))
    cdef double[:, ::1] tr = traj
    cdef double y[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double tmp[6]
    cdef double work[27]
    cdef double l1 = lo[0], l2 = lo[1], h1 = hi[0], h2 = hi[1]
    cdef Py_ssize_t n, m, done = 0
    for m in range(6):
        y[m] = y0[m]
        tr[0, m] = y[m]
    with nogil:
        for n in range(nsteps):
            _accel(tx, ty, coef, y, k1, work)
            for m in range(6):
                tmp[m] = y[m] + 0.5 * h * k1[m]
            _accel(tx, ty, coef, tmp, k2, work)
            for m in range(6):
                tmp[m] = y[m] + 0.5 * h * k2[m]
            _accel(tx, ty, coef, tmp, k3, work)
            for m in range(6):
                tmp[m] = y[m] + h * k3[m]
            _accel(tx, ty, coef, tmp, k4, work)
            for m in range(6):
                y[m] = y[m] + h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])
                tr[n + 1, m] = y[m]
            done = n + 1
            if y[1] < l1 or y[1] > h1 or y[2] < l2 or y[2] > h2:
                break
    return traj[: done + 1], done
