# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels (see ``_kernels_py`` for the reference)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin

cnp.import_array()


def fps_indices(const double[:, ::1] points, Py_ssize_t n, Py_ssize_t seed):
    cdef Py_ssize_t N = points.shape[0]
    cdef Py_ssize_t i, j, best
    cdef double bx, by, bz, dx, dy, dz, d, bestd
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = out
    dist_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] dist = dist_arr
    idx[0] = seed
    bx = points[seed, 0]
    by = points[seed, 1]
    bz = points[seed, 2]
    for j in range(N):
        dx = points[j, 0] - bx
        dy = points[j, 1] - by
        dz = points[j, 2] - bz
        dist[j] = dx * dx + dy * dy + dz * dz
    for i in range(1, n):
        best = 0
        bestd = dist[0]
        for j in range(1, N):
            if dist[j] > bestd:
                bestd = dist[j]
                best = j
        idx[i] = best
        bx = points[best, 0]
        by = points[best, 1]
        bz = points[best, 2]
        for j in range(N):
            dx = points[j, 0] - bx
            dy = points[j, 1] - by
            dz = points[j, 2] - bz
            d = dx * dx + dy * dy + dz * dz
            if d < dist[j]:
                dist[j] = d
    return out


def cell_covariance(const double[:, ::1] cur, const double[:, ::1] rest, const cnp.int64_t[::1] cell_edge,
                    const cnp.int64_t[::1] cell_i, const cnp.int64_t[::1] cell_j, const double[::1] cell_w,
                    Py_ssize_t m):
    cdef Py_ssize_t r, i, j, k, K = cell_edge.shape[0]
    cdef double ex, ey, dx, dy, w
    a_arr = np.zeros(m, dtype=np.float64)
    b_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] a = a_arr
    cdef double[::1] b = b_arr
    for r in range(K):
        i = cell_i[r]
        j = cell_j[r]
        k = cell_edge[r]
        w = cell_w[r]
        ex = rest[j, 0] - rest[i, 0]
        ey = rest[j, 1] - rest[i, 1]
        dx = cur[j, 0] - cur[i, 0]
        dy = cur[j, 1] - cur[i, 1]
        a[k] += w * (ex * dx + ey * dy)
        b[k] += w * (ex * dy - ey * dx)
    return a_arr, b_arr


def _sweep(double[::1] phi, const double[::1] a, const double[::1] b, const cnp.int64_t[::1] nbr_ptr,
           const cnp.int64_t[::1] nbr_idx, const double[::1] nbr_w, const cnp.int64_t[::1] order,
           const cnp.int64_t[::1] color_ptr, double coupling):
    cdef Py_ssize_t c, q, k, p, l
    cdef Py_ssize_t n_colors = color_ptr.shape[0] - 1
    cdef double sc, ss
    cdef double[::1] cs = np.empty(phi.shape[0], dtype=np.float64)
    cdef double[::1] sn = np.empty(phi.shape[0], dtype=np.float64)
    if coupling == 0.0:
        for q in range(order.shape[0]):
            k = order[q]
            phi[k] = atan2(b[k], a[k])
        return
    for k in range(phi.shape[0]):
        cs[k] = cos(phi[k])
        sn[k] = sin(phi[k])
    for c in range(n_colors):
        for q in range(color_ptr[c], color_ptr[c + 1]):
            k = order[q]
            sc = 0.0
            ss = 0.0
            for p in range(nbr_ptr[k], nbr_ptr[k + 1]):
                l = nbr_idx[p]
                sc += nbr_w[p] * cs[l]
                ss += nbr_w[p] * sn[l]
            phi[k] = atan2(b[k] + coupling * ss, a[k] + coupling * sc)
        # a colour group only reads angles of other groups: refresh after it
        for q in range(color_ptr[c], color_ptr[c + 1]):
            k = order[q]
            cs[k] = cos(phi[k])
            sn[k] = sin(phi[k])


def rotation_sweep(phi, a, b, weights, double coupling):
    _sweep(phi, a, b, weights.nbr_ptr, weights.nbr_idx, weights.nbr_w,
           weights.color_order, weights.color_ptr, coupling)


def data_energy(const double[:, ::1] cur, const double[:, ::1] rest, const double[::1] phi,
                const cnp.int64_t[::1] cell_edge, const cnp.int64_t[::1] cell_i,
                const cnp.int64_t[::1] cell_j, const double[::1] cell_w):
    cdef Py_ssize_t r, i, j, k, K = cell_edge.shape[0], m = phi.shape[0]
    cdef double ex, ey, rx, ry, c, s, total = 0.0
    cdef double[::1] cs = np.empty(m, dtype=np.float64)
    cdef double[::1] sn = np.empty(m, dtype=np.float64)
    for k in range(m):
        cs[k] = cos(phi[k])
        sn[k] = sin(phi[k])
    for r in range(K):
        i = cell_i[r]
        j = cell_j[r]
        k = cell_edge[r]
        c = cs[k]
        s = sn[k]
        ex = rest[j, 0] - rest[i, 0]
        ey = rest[j, 1] - rest[i, 1]
        rx = (cur[j, 0] - cur[i, 0]) - (c * ex - s * ey)
        ry = (cur[j, 1] - cur[i, 1]) - (s * ex + c * ey)
        total += cell_w[r] * (rx * rx + ry * ry)
    return total


def global_rhs(const double[:, ::1] rest, const double[::1] phi, const cnp.int64_t[::1] cell_edge,
               const cnp.int64_t[::1] cell_i, const cnp.int64_t[::1] cell_j, const double[::1] cell_w,
               Py_ssize_t n):
    cdef Py_ssize_t r, i, j, k, K = cell_edge.shape[0], m = phi.shape[0]
    cdef double ex, ey, vx, vy, c, s, w
    out = np.zeros((n, 2), dtype=np.float64)
    cdef double[:, ::1] rhs = out
    cdef double[::1] cs = np.empty(m, dtype=np.float64)
    cdef double[::1] sn = np.empty(m, dtype=np.float64)
    for k in range(m):
        cs[k] = cos(phi[k])
        sn[k] = sin(phi[k])
    for r in range(K):
        i = cell_i[r]
        j = cell_j[r]
        k = cell_edge[r]
        w = cell_w[r]
        c = cs[k]
        s = sn[k]
        ex = rest[j, 0] - rest[i, 0]
        ey = rest[j, 1] - rest[i, 1]
        vx = w * (c * ex - s * ey)
        vy = w * (s * ex + c * ey)
        rhs[j, 0] += vx
        rhs[j, 1] += vy
        rhs[i, 0] -= vx
        rhs[i, 1] -= vy
    return out
