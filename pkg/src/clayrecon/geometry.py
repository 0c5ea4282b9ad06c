"""Planar computational-geometry core.

Point clouds and cross-sections are plain ``float64`` arrays of shape
``(N, 3)`` and ``(N, 2)`` in meters, expressed in the wheel frame (origin on
the rotation axis, z up). A cross-section point is ``(x, z)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.spatial import Delaunay, cKDTree

from . import kernels
from .errors import DegenerateGeometry, DegenerateInput, EmptyInput

TOL = 1e-9
MIN_TRIANGLE_AREA = 1e-14


def as_points(points, dim: int, *, allow_empty: bool = True) -> np.ndarray:
    """Validate and return ``points`` as a C-contiguous ``(N, dim)`` float array."""
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.size == 0:
        if not allow_empty:
            raise EmptyInput(f"expected at least one {dim}-D point")
        return arr.reshape(0, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected an (N, {dim}) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain NaN or inf")
    return arr


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area (positive for counterclockwise order)."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class ConvexPolygon2D:
    """Counterclockwise convex polygon with outward unit facet normals.

    Facet ``i`` runs from ``vertices[i]`` to ``vertices[i + 1]``; its
    supporting line is ``normals[i] . p == offsets[i]``.
    """

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_vertices(cls, vertices, tol: float = TOL) -> "ConvexPolygon2D":
        v = as_points(vertices, 2)
        if len(v) < 3:
            raise DegenerateInput("a polygon needs at least 3 vertices")
        if polygon_area(v) <= 0.0:
            raise DegenerateInput("polygon vertices must be counterclockwise with positive area")
        d = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(d[:, 0], d[:, 1])
        if np.any(lengths <= tol):
            raise DegenerateInput("polygon has coincident consecutive vertices")
        turn = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
        if np.any(turn < -tol * lengths * np.roll(lengths, -1)):
            raise DegenerateInput("polygon is not convex")
        normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
        offsets = np.einsum("ij,ij->i", normals, v)
        for a in (v, normals, offsets):
            a.setflags(write=False)
        return cls(v, normals, offsets)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    @property
    def centroid(self) -> np.ndarray:
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        a = cr.sum() / 2.0
        return np.array([((v[:, 0] + w[:, 0]) * cr).sum(), ((v[:, 1] + w[:, 1]) * cr).sum()]) / (6.0 * a)

    def signed_distances(self, points) -> np.ndarray:
        """Signed distance of every point to every facet line, shape ``(N, k)``.

        All entries are negative for a point strictly inside.
        """
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return p @ self.normals.T - self.offsets

    def contains(self, points, tol: float = TOL) -> np.ndarray:
        """Boolean mask: inside or within ``tol`` of the boundary."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(p) == 0:
            return np.zeros(0, dtype=bool)
        return self.signed_distances(p).max(axis=1) <= tol

    def transformed(self, theta: float, tx: float, tz: float) -> "ConvexPolygon2D":
        """Rotate counterclockwise by ``theta`` about the origin, then translate."""
        c, s = np.cos(theta), np.sin(theta)
        rot = np.array([[c, -s], [s, c]])
        v = self.vertices @ rot.T + np.array([tx, tz])
        n = self.normals @ rot.T
        n /= np.hypot(n[:, 0], n[:, 1])[:, None]
        off = np.einsum("ij,ij->i", n, v)
        for a in (v, n, off):
            a.setflags(write=False)
        return ConvexPolygon2D(v, n, off)

    def mirrored_x(self) -> "ConvexPolygon2D":
        """Reflection through the rotation axis (x -> -x), kept counterclockwise."""
        return ConvexPolygon2D.from_vertices(self.vertices[::-1] * np.array([-1.0, 1.0]))


def point_in_polygon(p, poly: ConvexPolygon2D) -> bool:
    """True iff ``p`` is inside ``poly`` or within 1e-9 m of its boundary."""
    return bool(poly.contains(np.asarray(p, dtype=np.float64).reshape(1, 2))[0])


def convex_hull_2d(points) -> ConvexPolygon2D:
    """Andrew's monotone chain; collinear boundary points are dropped.

    Raises
    ------
    DegenerateInput
        Fewer than three points, or all points collinear within 1e-9 m.
    """
    pts = as_points(points, 2)
    if len(pts) < 3:
        raise DegenerateInput(f"convex hull needs >= 3 points, got {len(pts)}")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    p = pts[order]

    def chain(seq):
        out: list[np.ndarray] = []
        for q in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                c = _cross(o, a, q)
                if c > 0:
                    # a near-collinear middle point goes only if it lies between o and q
                    span2 = (q[0] - o[0]) ** 2 + (q[1] - o[1]) ** 2
                    t = (a[0] - o[0]) * (q[0] - o[0]) + (a[1] - o[1]) * (q[1] - o[1])
                    if c > TOL * np.sqrt(span2) or not 0.0 <= t <= span2:
                        break
                out.pop()
            out.append(q)
        return out

    lower = chain(p)
    upper = chain(p[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3 or polygon_area(hull) <= TOL * TOL:
        raise DegenerateInput("all points are collinear")
    return ConvexPolygon2D.from_vertices(hull)


def simplify_convex_polygon(poly: ConvexPolygon2D, tolerance: float) -> ConvexPolygon2D:
    """Drop vertices lying within ``tolerance`` of the chord of their neighbours.

    The vertex with the smallest chord distance goes first; at least three
    vertices always remain. The result is convex but may no longer contain
    every point of the original polygon.
    """
    v = [np.asarray(x) for x in poly.vertices]
    while len(v) > 3:
        n = len(v)
        best, best_d = -1, tolerance
        for i in range(n):
            a, b, c = v[i - 1], v[i], v[(i + 1) % n]
            chord = np.hypot(c[0] - a[0], c[1] - a[1])
            d = abs(_cross(a, b, c)) / chord if chord > 0 else 0.0
            if d < best_d:
                best, best_d = i, d
        if best < 0:
            break
        del v[best]
    return ConvexPolygon2D.from_vertices(np.array(v))


def augment_interior_points(
    hull: ConvexPolygon2D,
    spacing: float,
    *,
    edge_spacing: float | None = None,
    clearance: float = 0.0,
) -> np.ndarray:
    """Hull vertices plus an axis-aligned grid of strictly interior points.

    The grid has pitch ``spacing`` and is anchored at the lower-left corner
    of the hull's bounding box. With ``edge_spacing`` the hull edges are also
    subdivided (points inserted at most ``edge_spacing`` apart), and with
    ``clearance`` grid points closer than that to the boundary are skipped.
    Both extras default to off.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if hull.area <= TOL * TOL:
        raise DegenerateInput("hull has zero area")
    parts = [np.array(hull.vertices)]
    if edge_spacing is not None:
        v = hull.vertices
        w = np.roll(v, -1, axis=0)
        for a, b in zip(v, w):
            k = int(np.ceil(np.hypot(*(b - a)) / edge_spacing - 1e-9))
            if k > 1:
                t = np.arange(1, k)[:, None] / k
                parts.append(a + t * (b - a))
    lo = hull.vertices.min(axis=0)
    hi = hull.vertices.max(axis=0)
    nx = int(np.floor((hi[0] - lo[0]) / spacing)) + 1
    nz = int(np.floor((hi[1] - lo[1]) / spacing)) + 1
    gx = lo[0] + np.arange(nx) * spacing
    gz = lo[1] + np.arange(nz) * spacing
    grid = np.column_stack([np.repeat(gx, nz), np.tile(gz, nx)])
    margin = max(clearance, TOL)
    inside = hull.signed_distances(grid).max(axis=1) < -margin
    parts.append(grid[inside])
    return np.concatenate(parts, axis=0)


# --------------------------------------------------------------------------
# Triangle meshes


@dataclass(frozen=True, eq=False)
class _Topology:
    edges: np.ndarray  # (m, 2), i < j, lexicographically sorted
    tri_edges: np.ndarray  # (t, 3), edge opposite corner a
    edge_tris: np.ndarray  # (m, 2), -1 padded

    @classmethod
    def build(cls, triangles: np.ndarray, n_vertices: int) -> "_Topology":
        t = len(triangles)
        # half-edge (corner a) joins vertices (a+1, a+2)
        a = triangles[:, [1, 2, 0]].reshape(-1)
        b = triangles[:, [2, 0, 1]].reshape(-1)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = lo.astype(np.int64) * n_vertices + hi
        uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise DegenerateInput("mesh is not manifold: an edge has more than two triangles")
        edges = np.column_stack([uniq // n_vertices, uniq % n_vertices]).astype(np.int64)
        tri_edges = inverse.reshape(t, 3).astype(np.int64)
        edge_tris = np.full((len(uniq), 2), -1, dtype=np.int64)
        tri_of = np.repeat(np.arange(t), 3)
        order = np.argsort(inverse, kind="stable")
        inv_sorted = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv_sorted[1:] != inv_sorted[:-1]
        edge_tris[inv_sorted[first], 0] = tri_of[order[first]]
        edge_tris[inv_sorted[~first], 1] = tri_of[order[~first]]
        for arr in (edges, tri_edges, edge_tris):
            arr.setflags(write=False)
        return cls(edges, tri_edges, edge_tris)


@dataclass(frozen=True, eq=False)
class MeshWeights:
    """Rest-geometry weights of the edge-based ARAP energy.

    Attributes
    ----------
    tri_cot : (t, 3) cotangent of the rest angle at each triangle corner.
    edge_c : (m,) per-edge cotan weight, half the sum of opposite cotangents.
    cell_edge, cell_i, cell_j, cell_w : flattened edge-cell terms. Row ``r``
        says that edge cell ``cell_edge[r]`` contains the directed edge
        ``cell_i[r] -> cell_j[r]`` with weight ``cell_w[r]`` (half the
        cotangent opposite that edge inside the one triangle it came from).
    nbr_ptr, nbr_idx, nbr_w : CSR list of the edges sharing a triangle with
        each edge, and the dual weight of each pair.
    color_order, color_ptr : edges grouped so that no two edges of one group
        are neighbours.
    laplacian : (n, n) sparse matrix of the global-step normal equations.
    mean_area : mean rest triangle area.
    """

    tri_cot: np.ndarray
    edge_c: np.ndarray
    cell_edge: np.ndarray
    cell_i: np.ndarray
    cell_j: np.ndarray
    cell_w: np.ndarray
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray
    nbr_w: np.ndarray
    color_order: np.ndarray
    color_ptr: np.ndarray
    laplacian: sparse.csr_matrix
    mean_area: float
    clamped: bool = False
    color_blocks: list = field(default_factory=list, repr=False)


@dataclass(frozen=True, eq=False)
class TriMesh2D:
    """Planar triangle mesh with rest (``rest``) and deformed (``current``) positions."""

    rest: np.ndarray
    current: np.ndarray
    triangles: np.ndarray
    weights: MeshWeights | None = None
    _topo: _Topology | None = field(default=None, repr=False)

    def __post_init__(self):
        rest = as_points(self.rest, 2)
        cur = as_points(self.current, 2)
        tri = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if rest.shape != cur.shape:
            raise ValueError("rest and current vertex arrays differ in size")
        if len(tri) and (tri.min() < 0 or tri.max() >= len(rest)):
            raise ValueError("triangle index out of range")
        if self._topo is None:
            p = rest[tri]
            cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
                p[:, 1, 1] - p[:, 0, 1]
            ) * (p[:, 2, 0] - p[:, 0, 0])
            if np.any(cross < 0):
                raise ValueError("triangles must be counterclockwise in the rest state")
            object.__setattr__(self, "_topo", _Topology.build(tri, len(rest)))
        for name, arr in (("rest", rest), ("current", cur), ("triangles", tri)):
            if arr.flags.writeable:
                arr = arr.copy()
                arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.rest)

    @property
    def edges(self) -> np.ndarray:
        return self._topo.edges

    @property
    def tri_edges(self) -> np.ndarray:
        return self._topo.tri_edges

    @property
    def edge_tris(self) -> np.ndarray:
        return self._topo.edge_tris

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tris[:, 1] < 0)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edges].reshape(-1))

    def with_current(self, current) -> "TriMesh2D":
        return TriMesh2D(self.rest, current, self.triangles, self.weights, self._topo)

    def triangle_areas(self, which: str = "rest") -> np.ndarray:
        p = (self.rest if which == "rest" else self.current)[self.triangles]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def _dedupe(points: np.ndarray, tol: float = TOL) -> np.ndarray:
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return points
    drop = np.zeros(len(points), dtype=bool)
    drop[np.maximum(pairs[:, 0], pairs[:, 1])] = True
    return points[~drop]


def _incircle(a, b, c, d) -> float:
    """Positive when ``d`` is inside the circumcircle of ccw ``(a, b, c)``."""
    m = np.array([[a[0] - d[0], a[1] - d[1]], [b[0] - d[0], b[1] - d[1]], [c[0] - d[0], c[1] - d[1]]])
    sq = (m ** 2).sum(axis=1)
    return float(
        m[0, 0] * (m[1, 1] * sq[2] - sq[1] * m[2, 1])
        - m[0, 1] * (m[1, 0] * sq[2] - sq[1] * m[2, 0])
        + sq[0] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


def _break_cocircular_ties(pts: np.ndarray, tris: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Flip every cocircular diagonal to the lexicographically smaller vertex pair.

    Each flip replaces an edge by a smaller one, so the loop terminates.
    """
    tris = [list(map(int, t)) for t in tris]
    edge_map: dict[tuple[int, int], list[int]] = {}

    def key(i, j):
        return (i, j) if i < j else (j, i)

    def register(ti):
        t = tris[ti]
        for a in range(3):
            edge_map.setdefault(key(t[(a + 1) % 3], t[(a + 2) % 3]), []).append(ti)

    def unregister(ti):
        t = tris[ti]
        for a in range(3):
            edge_map[key(t[(a + 1) % 3], t[(a + 2) % 3])].remove(ti)

    for ti in range(len(tris)):
        register(ti)

    queue = sorted(edge_map)
    while queue:
        e = queue.pop()
        owners = edge_map.get(e, [])
        if len(owners) != 2:
            continue
        t1, t2 = owners
        c = next(v for v in tris[t1] if v not in e)
        d = next(v for v in tris[t2] if v not in e)
        alt = key(c, d)
        if alt >= e:
            continue
        # orient so that (a, b, c) is ccw in t1
        t = tris[t1]
        k = t.index(c)
        a, b = t[(k + 1) % 3], t[(k + 2) % 3]
        pa, pb, pc, pd = pts[a], pts[b], pts[c], pts[d]
        scale = max(np.ptp(pts[[a, b, c, d]], axis=0).max(), 1e-300)
        if abs(_incircle(pa, pb, pc, pd)) > tol * scale ** 4:
            continue
        # the quad (c, a, d, b) must be strictly convex for the flip to be valid
        if _cross(pc, pa, pd) <= 0 or _cross(pd, pb, pc) <= 0:
            continue
        unregister(t1)
        unregister(t2)
        tris[t1] = [c, a, d]
        tris[t2] = [d, b, c]
        register(t1)
        register(t2)
        queue.extend([key(c, a), key(a, d), key(d, b), key(b, c)])
    return np.array(tris, dtype=np.int64)


def delaunay_triangulate(points) -> TriMesh2D:
    """Delaunay triangulation of a planar point set.

    Points closer than 1e-9 m to an earlier point are dropped first, and
    flat slivers along collinear hull points are discarded. Where
    four or more points are cocircular the shared diagonal is chosen as the
    lexicographically smallest vertex-index pair; either diagonal satisfies
    the empty-circumcircle test at tolerance.
    """
    pts = _dedupe(as_points(points, 2))
    convex_hull_2d(pts)  # raises DegenerateInput when collinear
    tri = Delaunay(pts).simplices.astype(np.int64)
    p = pts[tri]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
        p[:, 2, 0] - p[:, 0, 0]
    )
    flip = cross < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    # Qhull may close a run of collinear hull points with a flat sliver
    longest = np.max(np.sum((p - np.roll(p, 1, axis=1)) ** 2, axis=2), axis=1)
    tri = tri[np.abs(cross) > TOL * longest]
    tri = _break_cocircular_ties(pts, tri)
    tri = tri[np.lexsort(np.sort(tri, axis=1).T[::-1])]
    return TriMesh2D(pts, pts.copy(), tri)


def _greedy_edge_coloring(nbr_ptr: np.ndarray, nbr_idx: np.ndarray) -> np.ndarray:
    m = len(nbr_ptr) - 1
    color = np.full(m, -1, dtype=np.int64)
    for k in range(m):
        used = {int(color[l]) for l in nbr_idx[nbr_ptr[k] : nbr_ptr[k + 1]]}
        c = 0
        while c in used:
            c += 1
        color[k] = c
    return color


def compute_weights(mesh: TriMesh2D, *, clamp_negative: bool = False) -> TriMesh2D:
    """Attach cotan, edge-cell and dual weights computed on the rest geometry.

    ``clamp_negative`` clamps the primal cotan weights at zero; dual
    (edge-pair) weights are always clamped so the smoothness term is a
    penalty.

    Raises
    ------
    DegenerateGeometry
        A rest triangle has area below 1e-14 m^2.
    """
    rest = mesh.rest
    tri = mesh.triangles
    areas = mesh.triangle_areas("rest")
    if len(tri) == 0 or np.any(areas < MIN_TRIANGLE_AREA):
        raise DegenerateGeometry("rest triangle with (near) zero area")
    p = rest[tri]
    tri_cot = np.empty((len(tri), 3))
    for a in range(3):
        u = p[:, (a + 1) % 3] - p[:, a]
        v = p[:, (a + 2) % 3] - p[:, a]
        tri_cot[:, a] = (u * v).sum(axis=1) / (2.0 * areas)
    half = 0.5 * tri_cot
    if clamp_negative:
        half = np.maximum(half, 0.0)

    m = len(mesh.edges)
    te = mesh.tri_edges
    edge_c = np.bincount(te.reshape(-1), weights=half.reshape(-1), minlength=m)

    # edge cells: edge k together with every edge of its incident triangles
    rows_e, rows_t = [], []
    for s in range(2):
        t = mesh.edge_tris[:, s]
        ok = t >= 0
        rows_e.append(np.flatnonzero(ok))
        rows_t.append(t[ok])
    ce = np.concatenate(rows_e)
    ct = np.concatenate(rows_t)
    order = np.lexsort((ct, ce))
    ce, ct = ce[order], ct[order]
    cell_edge = np.repeat(ce, 3)
    corner = np.tile(np.arange(3), len(ce))
    tt = np.repeat(ct, 3)
    cell_i = tri[tt, (corner + 1) % 3]
    cell_j = tri[tt, (corner + 2) % 3]
    cell_w = half[tt, corner]

    # dual weights: edges l, k of one triangle meet at the corner opposite the third edge
    pk, pl, pw = [], [], []
    dual = np.maximum(0.5 * tri_cot, 0.0)
    for a in range(3):
        e1 = te[:, (a + 1) % 3]
        e2 = te[:, (a + 2) % 3]
        w = dual[:, a]
        pk += [e1, e2]
        pl += [e2, e1]
        pw += [w, w]
    pk = np.concatenate(pk)
    pl = np.concatenate(pl)
    pw = np.concatenate(pw)
    order = np.lexsort((pl, pk))
    pk, pl, pw = pk[order], pl[order], pw[order]
    nbr_ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(pk, minlength=m), out=nbr_ptr[1:])
    nbr_idx = pl.astype(np.int64)
    nbr_w = pw

    color = _greedy_edge_coloring(nbr_ptr, nbr_idx)
    color_order = np.argsort(color, kind="stable").astype(np.int64)
    n_colors = int(color.max()) + 1
    color_ptr = np.zeros(n_colors + 1, dtype=np.int64)
    np.cumsum(np.bincount(color, minlength=n_colors), out=color_ptr[1:])
    blocks = []
    for c in range(n_colors):
        ks = color_order[color_ptr[c] : color_ptr[c + 1]]
        counts = nbr_ptr[ks + 1] - nbr_ptr[ks]
        rows = np.repeat(np.arange(len(ks)), counts)
        sel = np.concatenate([np.arange(nbr_ptr[k], nbr_ptr[k + 1]) for k in ks]) if len(ks) else np.zeros(0, int)
        blocks.append((ks, rows, nbr_idx[sel], nbr_w[sel]))

    n = mesh.n_vertices
    ii = np.concatenate([cell_i, cell_j, cell_i, cell_j])
    jj = np.concatenate([cell_j, cell_i, cell_i, cell_j])
    vv = np.concatenate([-cell_w, -cell_w, cell_w, cell_w])
    lap = sparse.csr_matrix((vv, (ii, jj)), shape=(n, n))
    lap.sum_duplicates()

    arrays = (tri_cot, edge_c, cell_edge, cell_i, cell_j, cell_w, nbr_ptr, nbr_idx, nbr_w, color_order, color_ptr)
    arrays = tuple(np.ascontiguousarray(a) for a in arrays)
    for a in arrays:
        a.setflags(write=False)
    weights = MeshWeights(
        *arrays,
        laplacian=lap,
        mean_area=float(areas.mean()),
        clamped=clamp_negative,
        color_blocks=blocks,
    )
    return TriMesh2D(mesh.rest, mesh.current, mesh.triangles, weights, mesh._topo)


def cotan_laplacian(mesh: TriMesh2D) -> sparse.csr_matrix:
    """Standard cotan Laplacian ``L_ij = -c_ij``, ``L_ii = sum_j c_ij``."""
    if mesh.weights is None:
        mesh = compute_weights(mesh)
    e = mesh.edges
    c = mesh.weights.edge_c
    n = mesh.n_vertices
    ii = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    jj = np.concatenate([e[:, 1], e[:, 0], e[:, 0], e[:, 1]])
    vv = np.concatenate([-c, -c, c, c])
    return sparse.csr_matrix((vv, (ii, jj)), shape=(n, n))


def farthest_point_downsample(cloud, n: int, seed_index: int = 0) -> np.ndarray:
    """Greedy farthest-point sampling of a 3-D cloud down to ``n`` points.

    Clouds with at most ``n`` points are returned unchanged. Otherwise the
    selection starts at ``seed_index`` and each further point maximises its
    distance to the points already chosen (first index wins ties).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = as_points(cloud, 3, allow_empty=False)
    if len(pts) <= n:
        return pts
    if not 0 <= seed_index < len(pts):
        raise IndexError("seed_index out of range")
    idx = kernels.fps_indices(pts, int(n), int(seed_index))
    return pts[idx]
