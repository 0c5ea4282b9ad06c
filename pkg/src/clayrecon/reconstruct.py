"""Per-frame recovery of an occluded clay cross-section.

A planar mesh of the initial cross-section is kept in step with the clay:
each frame, boundary vertices are pulled onto visible surface points,
vertices the tool has entered are pushed out of it, the bottom row stays
on the wheel, and an ARAP solve carries the rest of the mesh along.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .arap import ConstraintSet, SolverParams, arap_update
from .errors import DegenerateInput, NoBaseVertices, NoKinematicAdapter
from .geometry import (
    ConvexPolygon2D,
    TriMesh2D,
    as_points,
    augment_interior_points,
    compute_weights,
    convex_hull_2d,
    delaunay_triangulate,
    simplify_convex_polygon,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReconParams:
    """Pipeline parameters (meters).

    ``spacing`` is the interior grid pitch; hull edges are subdivided at the
    same pitch and grid points closer than ``clearance`` (a fraction of the
    pitch) to the hull are skipped. ``hull_tolerance`` drops noisy hull
    vertices lying within that distance of their neighbours' chord.
    ``recontact_rounds`` bounds the extra contact/ARAP rounds run when the
    solve drags a free vertex back into the tool.

    The clay is radially symmetric, so its section through the axis is
    symmetric too. ``mirror_observations`` adds the reflection ``x -> -x``
    of every observed section point, and ``mirror_contact`` also pushes
    vertices out of the reflected tool (the spinning tool carves a ring).
    """

    t_thresh: float = 0.005
    fit_radius: float = 0.004
    contact_margin: float = 0.0002
    base_band: float = 0.001
    spacing: float = 0.003
    clearance: float = 0.4
    hull_tolerance: float = 0.0005
    recontact_rounds: int = 3
    mirror_contact: bool = True
    mirror_observations: bool = True
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        for name in ("t_thresh", "fit_radius", "spacing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("contact_margin", "base_band", "clearance", "hull_tolerance"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.recontact_rounds < 0:
            raise ValueError("recontact_rounds must be >= 0")


@dataclass(frozen=True)
class AblationFlags:
    use_contact: bool = True
    use_arap: bool = True


@dataclass(frozen=True)
class TrajectoryFrame:
    """One observation: a partial cloud and where the tool was.

    Exactly one of ``tool_pose`` (``theta, tx, tz``) and ``joint_vector``
    is given; the latter needs a kinematic adapter.
    """

    timestamp: float
    observed_cloud: np.ndarray
    tool_pose: tuple[float, float, float] | None = None
    joint_vector: np.ndarray | None = None

    def __post_init__(self):
        if (self.tool_pose is None) == (self.joint_vector is None):
            raise ValueError("give exactly one of tool_pose and joint_vector")


@dataclass(frozen=True)
class ReconstructionState:
    mesh: TriMesh2D
    params: ReconParams = field(default_factory=ReconParams)
    flags: AblationFlags = field(default_factory=AblationFlags)
    frame_index: int = 0


# --------------------------------------------------------------------------
# Kinematics


class PlanarChain:
    """Serial chain of revolute joints in the ``x-z`` plane.

    The base sits at ``base`` with joint angles measured counterclockwise
    from the x-axis; the tool pose is the frame of the last link's tip,
    rotated by the summed joint angles plus ``tool_angle``.
    """

    def __init__(self, links, base=(0.0, 0.0), tool_angle: float = 0.0):
        self.links = [float(v) for v in links]
        self.base = np.asarray(base, dtype=np.float64).reshape(2)
        self.tool_angle = float(tool_angle)

    def __call__(self, q) -> tuple[float, float, float]:
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if len(q) < len(self.links):
            raise ValueError(f"need {len(self.links)} joint angles, got {len(q)}")
        x, z = self.base
        a = 0.0
        for length, qi in zip(self.links, q):
            a += qi
            x += length * math.cos(a)
            z += length * math.sin(a)
        return a + self.tool_angle, x, z


KinematicAdapter = Callable[[np.ndarray], tuple[float, float, float]]


def compute_finger_points(frame: TrajectoryFrame, tool_shape: ConvexPolygon2D, adapter: KinematicAdapter | None = None) -> ConvexPolygon2D:
    """Tool polygon at the frame's pose (normals follow the rotation)."""
    if frame.tool_pose is not None:
        pose = frame.tool_pose
    else:
        if adapter is None:
            raise NoKinematicAdapter("joint-space frame given without a kinematic adapter")
        pose = adapter(frame.joint_vector)
    theta, tx, tz = (float(v) for v in pose)
    return tool_shape.transformed(theta, tx, tz)


# --------------------------------------------------------------------------
# Pipeline pieces


def cross_section(cloud, t_thresh: float) -> np.ndarray:
    """``(x, z)`` of the points within ``t_thresh`` of the ``y = 0`` plane."""
    p = as_points(cloud, 3)
    return p[np.abs(p[:, 1]) < t_thresh][:, [0, 2]]


def initialize_mesh(cloud, params: ReconParams = ReconParams(), flags: AblationFlags = AblationFlags()) -> ReconstructionState:
    """Mesh the convex hull of the cloud's cross-section.

    Raises
    ------
    DegenerateInput
        Fewer than three usable, non-collinear cross-section points.
    """
    cs = cross_section(cloud, params.t_thresh)
    if len(cs) < 3:
        raise DegenerateInput(f"only {len(cs)} points within {params.t_thresh} m of the section plane")
    hull = convex_hull_2d(cs)
    if params.hull_tolerance > 0:
        hull = simplify_convex_polygon(hull, params.hull_tolerance)
    pts = augment_interior_points(hull, params.spacing, edge_spacing=params.spacing, clearance=params.clearance * params.spacing)
    mesh = compute_weights(delaunay_triangulate(pts), clamp_negative=True)
    logger.debug("initial mesh: %d vertices, %d triangles", mesh.n_vertices, len(mesh.triangles))
    return ReconstructionState(mesh, params, flags, 0)


def preprocess_frame(cloud, tool: ConvexPolygon2D | None, t_thresh: float) -> np.ndarray:
    """Cross-section of the points not covered by the tool."""
    p = as_points(cloud, 3)
    if tool is not None and len(p):
        p = p[~tool.contains(p[:, [0, 2]])]
    return cross_section(p, t_thresh)


def move_vertices_to_fit(state: ReconstructionState, observed) -> ConstraintSet:
    """Pin boundary vertices to their nearest observed point within the fit radius.

    When several vertices share a nearest point only the closest one is
    pinned to it.
    """
    obs = as_points(observed, 2)
    if len(obs) == 0:
        return ConstraintSet()
    mesh = state.mesh
    bv = mesh.boundary_vertices
    d, j = cKDTree(obs).query(mesh.current[bv], distance_upper_bound=state.params.fit_radius)
    hit = np.flatnonzero(np.isfinite(d))
    # an observed point serves only its closest vertex, so no two vertices merge
    order = hit[np.lexsort((d[hit], j[hit]))]
    first = np.ones(len(order), dtype=bool)
    first[1:] = j[order][1:] != j[order][:-1]
    keep = np.sort(order[first])
    return ConstraintSet.of(bv[keep], obs[j[keep]], "fit")


def displace_contact_vertices(state: ReconstructionState, tool: ConvexPolygon2D) -> ConstraintSet:
    """Push vertices inside the tool out through the nearest facet.

    A vertex at depth ``delta`` behind its nearest facet moves by
    ``delta + contact_margin`` along that facet's outward normal. Vertices
    within 1e-9 m of the boundary are left alone.
    """
    cur = state.mesh.current
    sd = tool.signed_distances(cur)
    inside = sd.max(axis=1) < -1e-9
    idx = np.flatnonzero(inside)
    if len(idx) == 0:
        return ConstraintSet()
    k = sd[idx].argmax(axis=1)
    depth = -sd[idx, k]
    targets = cur[idx] + (depth + state.params.contact_margin)[:, None] * tool.normals[k]
    return ConstraintSet.of(idx, targets, "contact")


def wheel_attachment_constraints(state: ReconstructionState) -> ConstraintSet:
    """Pin every vertex whose rest height is within the base band of the lowest one."""
    rest = state.mesh.rest
    z0 = rest[:, 1].min()
    idx = np.flatnonzero(rest[:, 1] <= z0 + state.params.base_band)
    if len(idx) == 0:
        raise NoBaseVertices("no vertex in the wheel band")
    return ConstraintSet.of(idx, rest[idx], "wheel")


def _contact(state: ReconstructionState, tool: ConvexPolygon2D) -> ConstraintSet:
    sets = [displace_contact_vertices(state, tool)]
    if state.params.mirror_contact:
        sets.append(displace_contact_vertices(state, tool.mirrored_x()))
    return ConstraintSet.merge(*sets)


def _distinct_targets(c: ConstraintSet, mesh: TriMesh2D) -> ConstraintSet:
    """Keep one vertex per target (the one moved least) so the solve cannot collapse cells."""
    if len(c) < 2:
        return c
    key = np.round(c.targets / 1e-9).astype(np.int64)
    move = np.hypot(*(c.targets - mesh.current[c.indices]).T)
    order = np.lexsort((move, key[:, 1], key[:, 0]))
    first = np.ones(len(order), dtype=bool)
    first[1:] = np.any(key[order][1:] != key[order][:-1], axis=1)
    keep = np.sort(order[first])
    return ConstraintSet(c.indices[keep], c.targets[keep], c.tags[keep])


def _apply(mesh: TriMesh2D, constraints: ConstraintSet, params: ReconParams, use_arap: bool) -> TriMesh2D:
    if use_arap:
        return arap_update(mesh, _distinct_targets(constraints, mesh), params.solver)
    cur = np.array(mesh.current)
    cur[constraints.indices] = constraints.targets
    return mesh.with_current(cur)


def step(state: ReconstructionState, frame: TrajectoryFrame, tool_shape: ConvexPolygon2D,
         adapter: KinematicAdapter | None = None) -> ReconstructionState:
    """Advance the reconstruction by one observed frame."""
    params, flags = state.params, state.flags
    tool = compute_finger_points(frame, tool_shape, adapter) if flags.use_contact else None
    observed = preprocess_frame(frame.observed_cloud, tool, params.t_thresh)
    if params.mirror_observations and len(observed):
        observed = np.concatenate([observed, observed * (-1.0, 1.0)])
    fit = move_vertices_to_fit(state, observed)
    wheel = wheel_attachment_constraints(state)
    contact = _contact(state, tool) if tool is not None else ConstraintSet()
    constraints = ConstraintSet.merge(fit, contact, wheel)
    mesh = _apply(state.mesh, constraints, params, flags.use_arap)
    if tool is not None and flags.use_arap:
        # the solve may drag free vertices into the tool: push those out too
        for _ in range(params.recontact_rounds):
            extra = _contact(replace(state, mesh=mesh), tool)
            if len(extra) == 0:
                break
            constraints = ConstraintSet.merge(constraints, extra, wheel)
            mesh = _apply(state.mesh, constraints, params, True)
        leftover = _contact(replace(state, mesh=mesh), tool)
        if len(leftover):
            keep = ConstraintSet.merge(leftover, wheel)
            mesh = _apply(mesh, keep, params, False)
    return replace(state, mesh=mesh, frame_index=state.frame_index + 1)


def run_trajectory(initial_cloud, frames, tool_shape: ConvexPolygon2D, params: ReconParams = ReconParams(),
                   flags: AblationFlags = AblationFlags(), adapter: KinematicAdapter | None = None) -> TriMesh2D:
    """Initialize from ``initial_cloud`` and fold :func:`step` over ``frames``."""
    state = initialize_mesh(initial_cloud, params, flags)
    for frame in frames:
        state = step(state, frame, tool_shape, adapter)
    return state.mesh
