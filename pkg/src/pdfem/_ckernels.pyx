# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled bond-pair kernels.

Pairs are split into NBLOCKS fixed contiguous ranges. Each range scatters into
its own buffer and buffers are summed in block order, so the result does not
depend on how many threads execute the ranges.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, exp, floor, M_PI
from libc.stdlib cimport qsort, malloc, free

cnp.import_array()

BACKEND = "cython"
NBLOCKS = 16


cdef inline double _influence(double r, int jcode) noexcept nogil:
    if r >= 1.0:
        return 0.0
    if jcode == 0:
        return 1.0 - r
    return 1.0


cdef int _cmp_int(const void* a, const void* b) noexcept nogil:
    cdef int x = (<int*>a)[0]
    cdef int y = (<int*>b)[0]
    return (x > y) - (x < y)


def build_pairs(pos, double eps):
    """All pairs ``i < j`` with ``0 < |x_j - x_i| < eps``, sorted by (i, j)."""
    cdef const double[:, ::1] P = np.ascontiguousarray(pos, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0]
    if n == 0:
        return np.zeros(0, np.int32), np.zeros(0, np.int32)
    lo = np.asarray(P).min(axis=0)
    cdef double xlo = lo[0], ylo = lo[1]
    cell_np = np.floor((np.asarray(P) - lo) / eps).astype(np.int64)
    cdef long ncx = int(cell_np[:, 0].max()) + 1
    cdef long ncy = int(cell_np[:, 1].max()) + 1
    cid_np = cell_np[:, 1] * ncx + cell_np[:, 0]
    order_np = np.argsort(cid_np, kind="stable").astype(np.int32)
    starts_np = np.searchsorted(cid_np[order_np], np.arange(ncx * ncy + 1)).astype(np.int64)
    cdef long[::1] cx = np.ascontiguousarray(cell_np[:, 0])
    cdef long[::1] cy = np.ascontiguousarray(cell_np[:, 1])
    cdef int[::1] order = order_np
    cdef long[::1] starts = starts_np
    cdef double eps2 = eps * eps
    cdef long[::1] counts = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t i, k, a, b
    cdef long xx, yy, c
    cdef int j
    cdef double dx, dy, d2

    for i in range(n):
        for yy in range(max(cy[i] - 1, 0), min(cy[i] + 2, ncy)):
            for xx in range(max(cx[i] - 1, 0), min(cx[i] + 2, ncx)):
                c = yy * ncx + xx
                for k in range(starts[c], starts[c + 1]):
                    j = order[k]
                    if j <= i:
                        continue
                    dx = P[j, 0] - P[i, 0]
                    dy = P[j, 1] - P[i, 1]
                    d2 = dx * dx + dy * dy
                    if d2 < eps2 and d2 > 0.0:
                        counts[i] += 1

    offsets_np = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.asarray(counts), out=offsets_np[1:])
    cdef long[::1] off = offsets_np
    cdef long total = offsets_np[n]
    pi_np = np.empty(total, dtype=np.int32)
    pj_np = np.empty(total, dtype=np.int32)
    cdef int[::1] pi = pi_np
    cdef int[::1] pj = pj_np
    cdef long pos_k
    for i in range(n):
        pos_k = off[i]
        for yy in range(max(cy[i] - 1, 0), min(cy[i] + 2, ncy)):
            for xx in range(max(cx[i] - 1, 0), min(cx[i] + 2, ncx)):
                c = yy * ncx + xx
                for k in range(starts[c], starts[c + 1]):
                    j = order[k]
                    if j <= i:
                        continue
                    dx = P[j, 0] - P[i, 0]
                    dy = P[j, 1] - P[i, 1]
                    d2 = dx * dx + dy * dy
                    if d2 < eps2 and d2 > 0.0:
                        pi[pos_k] = <int>i
                        pj[pos_k] = j
                        pos_k += 1
        if off[i + 1] > off[i] + 1:
            qsort(&pj[off[i]], off[i + 1] - off[i], sizeof(int), _cmp_int)
    return pi_np, pj_np


cdef void _theta_range(const double[:, ::1] P, const double[:, ::1] U, const double[::1] W, const double[::1] OM,
                       const int[::1] pi, const int[::1] pj, const unsigned char[::1] intact,
                       double eps, int jcode, double c0, double[::1] buf,
                       Py_ssize_t start, Py_ssize_t stop) noexcept nogil:
    cdef Py_ssize_t k
    cdef int i, j
    cdef double dx, dy, d, ex, ey, sd, base
    for k in range(start, stop):
        if not intact[k]:
            continue
        i = pi[k]
        j = pj[k]
        dx = P[j, 0] - P[i, 0]
        dy = P[j, 1] - P[i, 1]
        d = sqrt(dx * dx + dy * dy)
        ex = dx / d
        ey = dy / d
        sd = (U[j, 0] - U[i, 0]) * ex + (U[j, 1] - U[i, 1]) * ey
        base = c0 * _influence(d / eps, jcode) * sd
        buf[i] += W[j] * OM[j] * base
        buf[j] += W[i] * OM[i] * base


def hydrostatic(pos, u, w, omega, pi, pj, intact, double eps, int jcode, int nthreads=1):
    cdef const double[:, ::1] P = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] OM = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const int[::1] I = np.ascontiguousarray(pi, dtype=np.int32)
    cdef const int[::1] J = np.ascontiguousarray(pj, dtype=np.int32)
    cdef const unsigned char[::1] A = np.ascontiguousarray(intact, dtype=np.uint8)
    cdef Py_ssize_t n = P.shape[0], npairs = I.shape[0], b, i
    cdef double[:, ::1] buf = np.zeros((NBLOCKS, n))
    cdef double c0 = 1.0 / (eps * eps * M_PI)
    cdef int nb = NBLOCKS
    cdef int nt = max(nthreads, 1)
    for b in prange(nb, nogil=True, num_threads=nt, schedule="static", chunksize=1):
        _theta_range(P, U, W, OM, I, J, A, eps, jcode, c0, buf[b], b * npairs // nb, (b + 1) * npairs // nb)
    out_np = np.zeros(n)
    cdef double[::1] out = out_np
    for i in range(n):
        for b in range(nb):
            out[i] += buf[b, i]
    return out_np


cdef void _force_range(const double[:, ::1] P, const double[:, ::1] U, const double[::1] GP, const double[::1] W, const double[::1] OM,
                       const int[::1] pi, const int[::1] pj, const unsigned char[::1] intact,
                       double eps, int jcode, double c, double beta, int linearized, double fpp0,
                       double cT, double cD, double[:, ::1] buf,
                       Py_ssize_t start, Py_ssize_t stop) noexcept nogil:
    cdef Py_ssize_t k
    cdef int i, j
    cdef double dx, dy, d, ex, ey, S, ft, coef, twocb = 2.0 * c * beta
    for k in range(start, stop):
        if not intact[k]:
            continue
        i = pi[k]
        j = pj[k]
        dx = P[j, 0] - P[i, 0]
        dy = P[j, 1] - P[i, 1]
        d = sqrt(dx * dx + dy * dy)
        ex = dx / d
        ey = dy / d
        S = ((U[j, 0] - U[i, 0]) * ex + (U[j, 1] - U[i, 1]) * ey) / d
        if linearized:
            ft = fpp0 * S
        else:
            ft = twocb * S * exp(-beta * d * S * S)
        coef = OM[i] * OM[j] * _influence(d / eps, jcode) * (cT * ft + cD * (GP[i] + GP[j]))
        buf[i, 0] += W[j] * coef * ex
        buf[i, 1] += W[j] * coef * ey
        buf[j, 0] -= W[i] * coef * ex
        buf[j, 1] -= W[i] * coef * ey


def force(pos, u, theta, w, omega, pi, pj, intact, double eps, int jcode, double c, double beta,
          int gcode, double gA, double gB, int linearized, double fpp0, double gpp0, int nthreads=1):
    """Force density per point; ``gA, gB`` are (Cbar, unused) or (c_g, beta_g)."""
    cdef const double[:, ::1] P = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] OM = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const int[::1] I = np.ascontiguousarray(pi, dtype=np.int32)
    cdef const int[::1] J = np.ascontiguousarray(pj, dtype=np.int32)
    cdef const unsigned char[::1] A = np.ascontiguousarray(intact, dtype=np.uint8)
    th = np.ascontiguousarray(theta, dtype=np.float64)
    if linearized:
        gp_np = gpp0 * th
    elif gcode == 0:
        gp_np = gA * th
    else:
        gp_np = 2.0 * gA * gB * th * np.exp(-gB * th * th)
    cdef const double[::1] GP = np.ascontiguousarray(gp_np)
    cdef Py_ssize_t n = P.shape[0], npairs = I.shape[0], b, i
    cdef double[:, :, ::1] buf = np.zeros((NBLOCKS, n, 2))
    cdef double c0 = 1.0 / (eps * eps * M_PI)
    cdef double cT = 2.0 * c0 / eps, cD = c0 / (eps * eps)
    cdef int nb = NBLOCKS
    cdef int nt = max(nthreads, 1)
    for b in prange(nb, nogil=True, num_threads=nt, schedule="static", chunksize=1):
        _force_range(P, U, GP, W, OM, I, J, A, eps, jcode, c, beta, linearized, fpp0, cT, cD, buf[b],
                     b * npairs // nb, (b + 1) * npairs // nb)
    out_np = np.zeros((n, 2))
    cdef double[:, ::1] out = out_np
    for i in range(n):
        for b in range(nb):
            out[i, 0] += buf[b, i, 0]
            out[i, 1] += buf[b, i, 1]
    return out_np


cdef void _energy_range(const double[:, ::1] P, const double[:, ::1] U, const double[::1] W, const double[::1] OM,
                        const int[::1] pi, const int[::1] pj, const unsigned char[::1] intact,
                        double eps, int jcode, double c, double beta, double cW, double[::1] buf,
                        Py_ssize_t start, Py_ssize_t stop) noexcept nogil:
    cdef Py_ssize_t k
    cdef int i, j
    cdef double dx, dy, d, S, val
    for k in range(start, stop):
        if not intact[k]:
            continue
        i = pi[k]
        j = pj[k]
        dx = P[j, 0] - P[i, 0]
        dy = P[j, 1] - P[i, 1]
        d = sqrt(dx * dx + dy * dy)
        S = ((U[j, 0] - U[i, 0]) * (dx / d) + (U[j, 1] - U[i, 1]) * (dy / d)) / d
        val = cW * OM[i] * OM[j] * _influence(d / eps, jcode) * c * (1.0 - exp(-beta * d * S * S))
        buf[i] += W[j] * val
        buf[j] += W[i] * val


def bond_energy(pos, u, w, omega, pi, pj, intact, double eps, int jcode, double c, double beta, int nthreads=1):
    cdef const double[:, ::1] P = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] OM = np.ascontiguousarray(omega, dtype=np.float64)
    cdef const int[::1] I = np.ascontiguousarray(pi, dtype=np.int32)
    cdef const int[::1] J = np.ascontiguousarray(pj, dtype=np.int32)
    cdef const unsigned char[::1] A = np.ascontiguousarray(intact, dtype=np.uint8)
    cdef Py_ssize_t n = P.shape[0], npairs = I.shape[0], b, i
    cdef double[:, ::1] buf = np.zeros((NBLOCKS, n))
    cdef double cW = 1.0 / (eps * eps * M_PI) / eps
    cdef int nb = NBLOCKS
    cdef int nt = max(nthreads, 1)
    for b in prange(nb, nogil=True, num_threads=nt, schedule="static", chunksize=1):
        _energy_range(P, U, W, OM, I, J, A, eps, jcode, c, beta, cW, buf[b], b * npairs // nb, (b + 1) * npairs // nb)
    out_np = np.zeros(n)
    cdef double[::1] out = out_np
    for i in range(n):
        for b in range(nb):
            out[i] += buf[b, i]
    return out_np


def damage(pos, u, pi, pj, intact, double r_plus):
    """Max over bonds of S / S_c^+ with S_c^+ = r_plus / sqrt(|xi|); floored at 0."""
    cdef const double[:, ::1] P = np.ascontiguousarray(pos, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(u, dtype=np.float64)
    cdef const int[::1] I = np.ascontiguousarray(pi, dtype=np.int32)
    cdef const int[::1] J = np.ascontiguousarray(pj, dtype=np.int32)
    cdef const unsigned char[::1] A = np.ascontiguousarray(intact, dtype=np.uint8)
    cdef Py_ssize_t n = P.shape[0], k
    out_np = np.zeros(n)
    cdef double[::1] Z = out_np
    cdef int i, j
    cdef double dx, dy, d, S, ratio
    for k in range(I.shape[0]):
        if not A[k]:
            continue
        i = I[k]
        j = J[k]
        dx = P[j, 0] - P[i, 0]
        dy = P[j, 1] - P[i, 1]
        d = sqrt(dx * dx + dy * dy)
        S = ((U[j, 0] - U[i, 0]) * (dx / d) + (U[j, 1] - U[i, 1]) * (dy / d)) / d
        ratio = S * sqrt(d) / r_plus
        if ratio > Z[i]:
            Z[i] = ratio
        if ratio > Z[j]:
            Z[j] = ratio
    return out_np
