"""Edge-based as-rigid-as-possible deformation with rotation smoothing.

Every mesh edge ``k`` owns a planar rotation angle ``phi[k]`` and an *edge
cell*: the edge together with all edges of its (at most two) incident
triangles. The energy minimised is

    sum_k [ sum_{(i,j) in cell k} c_ijk |x_j - x_i - R_k (X_j - X_i)|^2
            + lam * A * sum_{l ~ k} w_kl |R_k - R_l|_F^2 ]

with ``X`` the rest and ``x`` the current positions, ``c_ijk`` the cotan
weight of edge ``ij`` restricted to the triangles of cell ``k``, ``A`` the
mean rest triangle area, and ``w_kl`` the dual cotan weight of two edges
sharing a triangle. Rotations are angles; ``|R_k - R_l|_F^2`` equals
``4 (1 - cos(phi_k - phi_l))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from . import kernels
from .errors import DegenerateGeometry, NoConstraints, SingularSystem
from .geometry import TriMesh2D, compute_weights

logger = logging.getLogger(__name__)

SOURCES = ("fit", "contact", "wheel")  # increasing precedence


@dataclass(frozen=True)
class SolverParams:
    lam: float = 0.01
    max_iters: int = 100
    energy_tol: float = 1e-6

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.energy_tol > 0:
            raise ValueError("energy_tol must be > 0")


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Hard positional constraints: vertex index -> target, with a source tag.

    Indices are unique. :meth:`merge` resolves clashes by precedence
    ``wheel > contact > fit`` (later sets win among equal tags).
    """

    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    targets: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    tags: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype="<U7"))

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        tgt = np.asarray(self.targets, dtype=np.float64).reshape(-1, 2)
        tags = np.asarray(self.tags, dtype="<U7").reshape(-1)
        if tags.size == 1 and idx.size != 1:
            tags = np.repeat(tags, idx.size)
        if not (len(idx) == len(tgt) == len(tags)):
            raise ValueError("indices, targets and tags must have equal length")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("duplicate constraint index; use ConstraintSet.merge")
        bad = set(tags.tolist()) - set(SOURCES)
        if bad:
            raise ValueError(f"unknown constraint source(s) {sorted(bad)}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "targets", tgt)
        object.__setattr__(self, "tags", tags)

    @classmethod
    def of(cls, indices, targets, tag: str) -> "ConstraintSet":
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        return cls(idx, np.asarray(targets, dtype=np.float64).reshape(-1, 2), np.full(len(idx), tag, dtype="<U7"))

    def __len__(self) -> int:
        return len(self.indices)

    def as_dict(self) -> dict[int, tuple[np.ndarray, str]]:
        return {int(i): (t, str(s)) for i, t, s in zip(self.indices, self.targets, self.tags)}

    @staticmethod
    def merge(*sets: "ConstraintSet") -> "ConstraintSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            return ConstraintSet()
        idx = np.concatenate([s.indices for s in sets])
        tgt = np.concatenate([s.targets for s in sets])
        tags = np.concatenate([s.tags for s in sets])
        rank = np.array([SOURCES.index(t) for t in tags])
        pos = np.arange(len(idx))
        # last entry of each index after sorting by (index, rank, position) wins
        order = np.lexsort((pos, rank, idx))
        idx_s = idx[order]
        keep = np.ones(len(order), dtype=bool)
        keep[:-1] = idx_s[1:] != idx_s[:-1]
        sel = order[keep]
        return ConstraintSet(idx[sel], tgt[sel], tags[sel])


def _ensure_weights(mesh: TriMesh2D) -> TriMesh2D:
    return mesh if mesh.weights is not None else compute_weights(mesh)


class ArapSolver:
    """Local/global machinery for one mesh and one constrained index set.

    The reduced Laplacian is factored once on construction and reused by
    every :meth:`global_step`.
    """

    def __init__(self, mesh: TriMesh2D, fixed_indices=None, lam: float = 0.0):
        mesh = _ensure_weights(mesh)
        self.mesh = mesh
        self.w = mesh.weights
        self.lam = float(lam)
        self.coupling = 4.0 * self.lam * self.w.mean_area
        n = mesh.n_vertices
        fixed = np.zeros(n, dtype=bool)
        if fixed_indices is not None:
            fixed[np.asarray(fixed_indices, dtype=np.int64)] = True
        self.fixed = np.flatnonzero(fixed)
        self.free = np.flatnonzero(~fixed)
        self._rest = np.ascontiguousarray(mesh.rest)
        rest_vec = self._rest[self.w.cell_j] - self._rest[self.w.cell_i]
        self._cell_scale = np.bincount(
            self.w.cell_edge, weights=np.abs(self.w.cell_w) * (rest_vec ** 2).sum(axis=1), minlength=len(mesh.edges)
        )
        rows = np.repeat(np.arange(len(mesh.edges)), np.diff(self.w.nbr_ptr))
        self._pair_rows = rows
        self._factor = None
        if fixed_indices is not None and len(self.free):
            lap = self.w.laplacian.tocsr()
            l_ff = lap[self.free][:, self.free].tocsc()
            self._l_fc = lap[self.free][:, self.fixed].tocsr()
            self._check_anchored(l_ff)
            try:
                self._factor = splu(l_ff)
            except RuntimeError as exc:
                raise SingularSystem(f"constrained Laplacian is singular: {exc}") from exc

    def _check_anchored(self, l_ff):
        n_comp, labels = csgraph.connected_components(l_ff, directed=False)
        if len(self.fixed) == 0:
            raise SingularSystem("no constrained vertex: the system is singular")
        touches = np.asarray(abs(self._l_fc).sum(axis=1)).reshape(-1) > 0
        anchored = np.zeros(n_comp, dtype=bool)
        anchored[labels[touches]] = True
        if not anchored.all():
            raise SingularSystem(f"{int((~anchored).sum())} free component(s) carry no constraint")

    def _cell_size(self, cur: np.ndarray) -> np.ndarray:
        w = self.w
        d = cur[w.cell_j] - cur[w.cell_i]
        return np.bincount(w.cell_edge, weights=np.abs(w.cell_w) * (d ** 2).sum(axis=1), minlength=len(self.mesh.edges))

    def collapsed(self, current: np.ndarray) -> bool:
        """Whether some edge cell has all its edges at zero length."""
        return bool(np.any(self._cell_size(np.asarray(current, dtype=np.float64)) <= 1e-24 * self._cell_scale))

    def local_step(self, current: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Best-fitting rotation angle of every edge cell.

        Edges are visited colour group by colour group, each group using the
        freshest neighbour angles, so every update is an exact minimisation
        of the total energy over that group.
        """
        w = self.w
        cur = np.ascontiguousarray(current, dtype=np.float64)
        a, b = kernels.cell_covariance(cur, self._rest, w.cell_edge, w.cell_i, w.cell_j, w.cell_w, len(phi))
        weak = np.hypot(a, b) <= 1e-12 * self._cell_scale
        if np.any(weak):
            # a vanishing covariance is only an error when the cell's edges all collapsed;
            # otherwise every rotation fits the cell equally well
            if np.any(self._cell_size(cur)[weak] <= 1e-24 * self._cell_scale[weak]):
                raise DegenerateGeometry("an edge cell collapsed: all its edges have zero length")
        out = np.array(phi, dtype=np.float64)
        kernels.rotation_sweep(out, a, b, w, self.coupling)
        return out

    def global_step(self, phi: np.ndarray, fixed_positions: np.ndarray) -> np.ndarray:
        """Least-squares vertex positions for fixed rotations."""
        w = self.w
        n = self.mesh.n_vertices
        rhs = kernels.global_rhs(self._rest, np.ascontiguousarray(phi, dtype=np.float64),
                                 w.cell_edge, w.cell_i, w.cell_j, w.cell_w, n)
        out = np.empty((n, 2))
        fixed_positions = np.asarray(fixed_positions, dtype=np.float64).reshape(-1, 2)
        out[self.fixed] = fixed_positions
        if self._factor is not None:
            b = rhs[self.free] - self._l_fc @ fixed_positions
            out[self.free] = self._factor.solve(b)
        return out

    def energy(self, current: np.ndarray, phi: np.ndarray) -> float:
        w = self.w
        cur = np.ascontiguousarray(current, dtype=np.float64)
        phi = np.ascontiguousarray(phi, dtype=np.float64)
        e = kernels.data_energy(cur, self._rest, phi, w.cell_edge, w.cell_i, w.cell_j, w.cell_w)
        if self.lam > 0 and len(w.nbr_idx):
            d = phi[self._pair_rows] - phi[w.nbr_idx]
            e += self.lam * w.mean_area * float(np.sum(w.nbr_w * 4.0 * (1.0 - np.cos(d))))
        return e


def energy(mesh: TriMesh2D, rotations, lam: float) -> float:
    """ARAP energy of ``mesh.current`` against ``mesh.rest`` for given rotations."""
    solver = ArapSolver(mesh, None, lam)
    return solver.energy(solver.mesh.current, np.asarray(rotations, dtype=np.float64))


def local_step(mesh: TriMesh2D, rotations, lam: float) -> np.ndarray:
    solver = ArapSolver(mesh, None, lam)
    return solver.local_step(solver.mesh.current, np.asarray(rotations, dtype=np.float64))


def global_step(mesh: TriMesh2D, rotations, constraints: ConstraintSet) -> TriMesh2D:
    if len(constraints) == 0:
        raise NoConstraints("the global step needs at least one constraint")
    solver = ArapSolver(mesh, constraints.indices)
    cur = solver.global_step(np.asarray(rotations, dtype=np.float64), constraints.targets[np.argsort(constraints.indices)])
    return solver.mesh.with_current(cur)


@dataclass
class ArapResult:
    mesh: TriMesh2D
    rotations: np.ndarray
    energies: list[float]

    @property
    def iterations(self) -> int:
        return len(self.energies) - 1


def arap_solve(mesh: TriMesh2D, constraints: ConstraintSet, params: SolverParams = SolverParams()) -> ArapResult:
    """Alternate local and global steps from identity rotations.

    Stops when the relative energy decrease of an iteration falls below
    ``params.energy_tol`` or after ``params.max_iters`` iterations.
    ``energies[0]`` is the energy of the starting configuration (constrained
    vertices already at their targets); one entry follows per iteration.
    If snapping to the targets collapses a cell, the start is instead the
    global solve under identity rotations.
    """
    if len(constraints) == 0:
        raise NoConstraints("ARAP needs at least one positional constraint")
    mesh = _ensure_weights(mesh)
    order = np.argsort(constraints.indices)
    fixed_idx = constraints.indices[order]
    targets = constraints.targets[order]
    solver = ArapSolver(mesh, fixed_idx, params.lam)
    cur = np.array(mesh.current)
    cur[fixed_idx] = targets
    phi = np.zeros(len(mesh.edges))
    if solver.collapsed(cur):
        # vertices stacked on one point carry no rotation: start from the identity fit
        cur = solver.global_step(phi, targets)
    energies = [solver.energy(cur, phi)]
    for _ in range(params.max_iters):
        phi = solver.local_step(cur, phi)
        cur = solver.global_step(phi, targets)
        e = solver.energy(cur, phi)
        prev = energies[-1]
        energies.append(e)
        if prev <= 0.0 or prev - e <= params.energy_tol * prev:
            break
    logger.debug("arap: %d iterations, energy %.3e -> %.3e", len(energies) - 1, energies[0], energies[-1])
    return ArapResult(mesh.with_current(cur), phi, energies)


def arap_update(mesh: TriMesh2D, constraints: ConstraintSet, params: SolverParams = SolverParams()) -> TriMesh2D:
    """Deform ``mesh`` so that constrained vertices hit their targets exactly."""
    return arap_solve(mesh, constraints, params).mesh
