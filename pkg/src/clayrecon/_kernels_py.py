"""NumPy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable or when
``CLAYRECON_PURE_PYTHON=1`` is set. Signatures and results match the
compiled versions (up to floating-point summation order).
"""
from __future__ import annotations

import numpy as np


def fps_indices(points: np.ndarray, n: int, seed: int) -> np.ndarray:
    x = np.ascontiguousarray(points[:, 0])
    y = np.ascontiguousarray(points[:, 1])
    z = np.ascontiguousarray(points[:, 2])
    idx = np.empty(n, dtype=np.int64)
    idx[0] = seed
    dx = x - x[seed]
    dy = y - y[seed]
    dz = z - z[seed]
    dist = dx * dx + dy * dy + dz * dz
    for i in range(1, n):
        j = int(np.argmax(dist))
        idx[i] = j
        dx = x - x[j]
        dy = y - y[j]
        dz = z - z[j]
        np.minimum(dist, dx * dx + dy * dy + dz * dz, out=dist)
    return idx


def _cell_vectors(cur, rest, cell_i, cell_j):
    e = rest[cell_j] - rest[cell_i]
    d = cur[cell_j] - cur[cell_i]
    return e, d


def cell_covariance(cur, rest, cell_edge, cell_i, cell_j, cell_w, m):
    """Per edge cell, the symmetric and antisymmetric parts of the 2x2 covariance."""
    e, d = _cell_vectors(cur, rest, cell_i, cell_j)
    dot = cell_w * (e[:, 0] * d[:, 0] + e[:, 1] * d[:, 1])
    crs = cell_w * (e[:, 0] * d[:, 1] - e[:, 1] * d[:, 0])
    return (
        np.bincount(cell_edge, weights=dot, minlength=m),
        np.bincount(cell_edge, weights=crs, minlength=m),
    )


def rotation_sweep(phi, a, b, weights, coupling):
    """One Gauss-Seidel pass over the colour groups, updating ``phi`` in place."""
    for ks, rows, cols, w in weights.color_blocks:
        if len(ks) == 0:
            continue
        if coupling != 0.0:
            sc = np.bincount(rows, weights=w * np.cos(phi[cols]), minlength=len(ks))
            ss = np.bincount(rows, weights=w * np.sin(phi[cols]), minlength=len(ks))
            phi[ks] = np.arctan2(b[ks] + coupling * ss, a[ks] + coupling * sc)
        else:
            phi[ks] = np.arctan2(b[ks], a[ks])


def data_energy(cur, rest, phi, cell_edge, cell_i, cell_j, cell_w):
    e, d = _cell_vectors(cur, rest, cell_i, cell_j)
    c = np.cos(phi)[cell_edge]
    s = np.sin(phi)[cell_edge]
    rx = d[:, 0] - (c * e[:, 0] - s * e[:, 1])
    ry = d[:, 1] - (s * e[:, 0] + c * e[:, 1])
    return float(np.sum(cell_w * (rx * rx + ry * ry)))


def global_rhs(rest, phi, cell_edge, cell_i, cell_j, cell_w, n):
    e = rest[cell_j] - rest[cell_i]
    c = np.cos(phi)[cell_edge]
    s = np.sin(phi)[cell_edge]
    vx = cell_w * (c * e[:, 0] - s * e[:, 1])
    vy = cell_w * (s * e[:, 0] + c * e[:, 1])
    rhs = np.empty((n, 2))
    rhs[:, 0] = np.bincount(cell_j, weights=vx, minlength=n) - np.bincount(cell_i, weights=vx, minlength=n)
    rhs[:, 1] = np.bincount(cell_j, weights=vy, minlength=n) - np.bincount(cell_i, weights=vy, minlength=n)
    return rhs
