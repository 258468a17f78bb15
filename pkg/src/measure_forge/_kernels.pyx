# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

BACKEND = "cython"


cdef inline double _dot(const double[:, ::1] atoms, Py_ssize_t i,
                        const double[::1] g, Py_ssize_t d) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t j
    for j in range(d):
        s += atoms[i, j] * g[j]
    return s


cdef void _scores(const double[:, ::1] atoms, const double[::1] g,
                  double[::1] out) noexcept nogil:
    # row-major (n, d) is column-major (d, n); out = atoms @ g via dgemv('T')
    cdef int d = <int>atoms.shape[1], n = <int>atoms.shape[0], inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char trans = b'T'
    if n == 0:
        return
    if d == 0:
        out[:] = 0.0
        return
    dgemv(&trans, &d, &n, &one, <double*>&atoms[0, 0], &d, <double*>&g[0], &inc,
          &zero, &out[0], &inc)


def lmo_scan(const double[:, ::1] atoms, const double[::1] g, double rtol):
    cdef Py_ssize_t n = atoms.shape[0], i, idx = 0
    cdef double best, thresh
    cdef double[::1] scores = np.empty(n)
    with nogil:
        _scores(atoms, g, scores)
        best = scores[0]
        for i in range(1, n):
            if scores[i] < best:
                best = scores[i]
        thresh = best + rtol * (1.0 + fabs(best))
        for i in range(n):
            if scores[i] <= thresh:
                idx = i
                break
    return int(idx), float(scores[idx])


def correlate(const double[:, ::1] atoms, const double[::1] g):
    out = np.empty(atoms.shape[0])
    cdef double[::1] o = out
    with nogil:
        _scores(atoms, g, o)
    return out


def project_capped_simplex(a, double tau):
    cdef double[::1] x = np.array(a, dtype=float).ravel()
    cdef Py_ssize_t n = x.shape[0], i, rho = -1
    cdef double s = 0.0, css = 0.0, theta = 0.0
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        if x[i] > 0.0:
            s += x[i]
    if s <= tau:
        for i in range(n):
            o[i] = x[i] if x[i] > 0.0 else 0.0
        return out
    cdef double[::1] u = np.sort(np.asarray(x))[::-1].copy()
    for i in range(n):
        css += u[i]
        if u[i] - (css - tau) / (i + 1.0) > 0.0:
            rho = i
            theta = (css - tau) / (i + 1.0)
    for i in range(n):
        o[i] = x[i] - theta if x[i] > theta else 0.0
    return out


def dual_subgradient(const double[:, ::1] atoms, const double[::1] y,
                     double sigma, double tau, long iterations):
    cdef Py_ssize_t k = atoms.shape[0], d = y.shape[0], i, j, jbest
    cdef long it
    cdef double top, s, w, step, wsum = 0.0
    lam_arr = np.empty(d)
    avg_arr = np.zeros(d)
    cdef double[::1] lam = lam_arr
    cdef double[::1] avg = avg_arr
    cdef double[::1] g = np.empty(d)
    with nogil:
        for i in range(d):
            lam[i] = sigma * y[i]
        for it in range(iterations):
            for i in range(d):
                g[i] = y[i] - lam[i] / sigma
            if k > 0:
                jbest = 0
                top = _dot(atoms, 0, lam, d)
                for j in range(1, k):
                    s = _dot(atoms, j, lam, d)
                    if s > top:
                        top = s
                        jbest = j
                if top > 0.0:
                    for i in range(d):
                        g[i] -= tau * atoms[jbest, i]
            w = it + 1.0
            wsum += w
            step = 2.0 * sigma / (it + 2.0)
            for i in range(d):
                avg[i] += w * lam[i]
                lam[i] += step * g[i]
        for i in range(d):
            avg[i] /= wsum
    return avg_arr, lam_arr
