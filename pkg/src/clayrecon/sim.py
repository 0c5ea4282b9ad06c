"""Synthetic pottery wheel: ground-truth clay, scripted tool passes, partial views.

The clay is radially symmetric and described by its profile, a polyline of
``(r, z)`` points running over the free surface from the rotation axis down
to the wheel. The closed cross-section is the polyline plus the segments it
leaves open along the axis and the wheel. The tool is a convex polygon in
the ``x-z`` plane; because the clay spins, the tool carves a ring, so a tool
that reaches across the axis also acts at ``r = -x``.

Units are meters throughout.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Polygon, box

from .errors import DegenerateInput, ToolSwallowsClay
from .geometry import ConvexPolygon2D
from .registration import MarkerObservation

logger = logging.getLogger(__name__)

DENSITY = 1900.0  # kg/m^3, wet throwing clay
SPACING = 1e-3  # profile resampling pitch
MASSES_G = (250.0, 300.0, 350.0)
GOALS = {"wide": (0.100, 0.060), "tall": (0.070, 0.070)}  # outer diameter, height
FLOOR = 0.008
_EPS = 1e-9
_BIG = 10.0


def _normalize(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


DEFAULT_CAMERAS = (_normalize([-1.0, 0.0, 0.3]), np.array([0.0, 0.0, 1.0]))


# --------------------------------------------------------------------------
# Profiles


def _closed(points: np.ndarray) -> np.ndarray:
    if points[0, 0] <= _EPS and points[0, 1] > _EPS:
        return np.vstack([points, [[0.0, 0.0]]])
    return points


def _area_moments(closed: np.ndarray) -> tuple[float, float]:
    """Absolute area and first moment about the axis of a closed polygon."""
    x, y = closed[:, 0], closed[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    mx = ((x + xn) * cr).sum() / 6.0
    sign = 1.0 if a >= 0 else -1.0
    return sign * a, sign * mx


@dataclass(frozen=True, eq=False)
class ClayProfile:
    """Free-surface polyline of a radially symmetric clay body.

    ``points`` runs from the axis (or the inner foot of a ring) to the outer
    foot on the wheel. ``mass`` (kg) and ``density`` (kg/m^3) fix the volume
    the simulator conserves.
    """

    points: np.ndarray
    mass: float
    density: float = DENSITY

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(p) < 2 or np.any(p[:, 0] < -_EPS) or np.any(p[:, 1] < -_EPS):
            raise DegenerateInput("profile needs >= 2 points with r >= 0 and z >= 0")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def closed(self) -> np.ndarray:
        return _closed(self.points)

    @property
    def area(self) -> float:
        return _area_moments(self.closed)[0]

    @property
    def volume(self) -> float:
        """Revolved volume (Pappus)."""
        return 2.0 * math.pi * _area_moments(self.closed)[1]

    @property
    def target_volume(self) -> float:
        return self.mass / self.density

    @property
    def outer_diameter(self) -> float:
        return 2.0 * float(self.points[:, 0].max())

    @property
    def height(self) -> float:
        return float(self.points[:, 1].max())

    def normals(self) -> np.ndarray:
        """Outward unit normals at the profile points (central differences)."""
        p = self.points
        t = np.empty_like(p)
        t[1:-1] = p[2:] - p[:-2]
        t[0] = p[1] - p[0]
        t[-1] = p[-1] - p[-2]
        t /= np.maximum(np.hypot(t[:, 0], t[:, 1]), 1e-15)[:, None]
        ccw = _area_moments_signed(self.closed) > 0
        n = np.column_stack([t[:, 1], -t[:, 0]]) if ccw else np.column_stack([-t[:, 1], t[:, 0]])
        return n

    def cross_section(self) -> np.ndarray:
        """Both halves of the cross-section through the axis, as ``(x, z)``."""
        mirror = self.points[self.points[:, 0] > _EPS] * np.array([-1.0, 1.0])
        return np.vstack([self.points, mirror])


def _area_moments_signed(closed: np.ndarray) -> float:
    x, y = closed[:, 0], closed[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _resample(chain: np.ndarray, step: float = SPACING) -> np.ndarray:
    seg = np.hypot(*np.diff(chain, axis=0).T)
    keep = np.concatenate([[True], seg > 1e-12])
    chain, seg = chain[keep], seg[seg > 1e-12]
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = max(1, int(math.ceil(s[-1] / step - 1e-9)))
    t = np.linspace(0.0, s[-1], n + 1)
    out = np.column_stack([np.interp(t, s, chain[:, 0]), np.interp(t, s, chain[:, 1])])
    out[0], out[-1] = chain[0], chain[-1]
    return out


def generate_initial_clay(mass_g: float, density: float = DENSITY, aspect: float = 1.0) -> ClayProfile:
    """Solid cylinder of the given mass with height ``aspect`` times its radius."""
    if not mass_g > 0:
        raise ValueError("mass must be positive")
    if not density > 0 or not aspect > 0:
        raise ValueError("density and aspect must be positive")
    volume = mass_g * 1e-3 / density
    r = (volume / (math.pi * aspect)) ** (1.0 / 3.0)
    h = aspect * r
    chain = np.array([[0.0, h], [r, h], [r, 0.0]])
    return ClayProfile(_resample(chain), mass_g * 1e-3, density)


# --------------------------------------------------------------------------
# Tool


SCENE_TOOL_HEIGHT = 0.120


def default_tool(width: float = 0.010, height: float = 0.040, corner: float = 0.0015, arc_points: int = 4) -> ConvexPolygon2D:
    """Rounded rectangle centered on the origin, long side vertical."""
    hw, hh = width / 2.0, height / 2.0
    if not 0 <= corner < min(hw, hh):
        raise ValueError("corner radius must be below half the shorter side")
    if corner == 0:
        return ConvexPolygon2D.from_vertices([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
    pts = []
    centers = [(hw - corner, -hh + corner), (hw - corner, hh - corner), (-hw + corner, hh - corner), (-hw + corner, -hh + corner)]
    for q, (cx, cz) in enumerate(centers):
        a0 = -math.pi / 2 + q * math.pi / 2
        for a in np.linspace(a0, a0 + math.pi / 2, arc_points + 1):
            pts.append((cx + corner * math.cos(a), cz + corner * math.sin(a)))
    return ConvexPolygon2D.from_vertices(np.array(pts))


def scene_tool() -> ConvexPolygon2D:
    """Finger used by the scripted scenes: long enough to reach over a 70 mm wall."""
    return default_tool(height=SCENE_TOOL_HEIGHT)


def _cutter(tool: ConvexPolygon2D):
    """Region of the ``(r, z)`` half-plane swept by the spinning tool."""
    poly = Polygon(tool.vertices)
    right = poly.intersection(box(0.0, -_BIG, _BIG, _BIG))
    left = poly.intersection(box(-_BIG, -_BIG, 0.0, _BIG))
    if not left.is_empty:
        left = shapely.transform(left, lambda c: c * np.array([-1.0, 1.0]))
        return right.union(left)
    return right


def _largest_polygon(geom):
    if geom.is_empty:
        return None
    if geom.geom_type == "Polygon":
        return geom
    polys = [g for g in getattr(geom, "geoms", []) if g.geom_type == "Polygon"]
    if not polys:
        polys = [g for sub in geom.geoms if hasattr(sub, "geoms") for g in sub.geoms if g.geom_type == "Polygon"]
    if not polys:
        return None
    if len(polys) > 1:
        logger.debug("clay split into %d pieces; keeping the largest", len(polys))
    return max(polys, key=lambda g: g.area)


def _extract_chain(poly) -> np.ndarray:
    """Free-surface chain of a clay polygon: its boundary minus axis and wheel."""
    c = np.asarray(poly.exterior.coords)[:-1]
    n = len(c)
    d = np.roll(c, -1, axis=0)
    support = ((c[:, 0] <= _EPS) & (d[:, 0] <= _EPS)) | ((c[:, 1] <= _EPS) & (d[:, 1] <= _EPS))
    if support.all() or not support.any():
        raise DegenerateInput("clay polygon does not rest on the wheel")
    # longest circular run of free edges
    best_len, best_start = 0, 0
    for start in np.flatnonzero(support & ~np.roll(support, -1)):
        s = (start + 1) % n
        k = 0
        while not support[(s + k) % n]:
            k += 1
        if k > best_len:
            best_len, best_start = k, s
    idx = (best_start + np.arange(best_len + 1)) % n
    chain = c[idx]
    # run from the axis (or inner foot) to the outer foot
    if chain[0, 1] <= _EPS and (chain[-1, 1] > _EPS or chain[-1, 0] < chain[0, 0]):
        chain = chain[::-1]
    return chain


def _push_out(points: np.ndarray, tools: list[ConvexPolygon2D]) -> np.ndarray:
    """Move points lying inside a tool onto its nearest facet."""
    out = points.copy()
    for t in tools:
        sd = t.signed_distances(out)
        inside = sd.max(axis=1) < 0
        if inside.any():
            k = sd[inside].argmax(axis=1)
            depth = -sd[inside, k]
            out[inside] += (depth + 1e-12)[:, None] * t.normals[k]
    out[:, 0] = np.maximum(out[:, 0], 0.0)
    return out


def _measure(points: np.ndarray, conserve: str) -> float:
    a, mx = _area_moments(_closed(points))
    return 2.0 * math.pi * mx if conserve == "volume" else a


def _cut(points: np.ndarray, cutter, tools) -> np.ndarray | None:
    poly = shapely.make_valid(Polygon(_closed(points)))
    poly = poly.intersection(box(0.0, 0.0, _BIG, _BIG)).difference(cutter)
    poly = _largest_polygon(poly)
    if poly is None:
        return None
    return _push_out(_resample(_extract_chain(poly)), tools)


def deform_step(
    profile: ClayProfile,
    tool: ConvexPolygon2D,
    *,
    motion=None,
    spread: float = 0.010,
    reach: float = 0.060,
    base_band: float = 1e-3,
    conserve: str = "volume",
    rtol: float = 5e-4,
    max_rounds: int = 8,
) -> ClayProfile:
    """Quasi-static response of the clay to one tool pose.

    Material inside the (spinning) tool is removed, which leaves the surface
    on the tool facets. The lost amount is put back on the free surface:

    * when the tool moves (``motion``, the ``(dx, dz)`` since the previous
      pose), the clay in front of it is pushed along. Free surface ahead of
      the tool that faces the direction of motion is offset along it, in
      proportion to how squarely it faces it and with a cosine taper that
      vanishes ``reach`` away from the tool;
    * otherwise, when nothing ahead faces the motion (a plunge, a press), or
      when pushed clay keeps running back into the tool, free surface within ``spread`` of the tool is thickened along its
      outward normal with a cosine taper in the distance to the tool.

    Points within ``base_band`` of the wheel stick to it and do not move.
    ``conserve`` selects the measure kept constant: ``"volume"`` (revolved
    volume, equal to mass / density) or ``"area"`` (cross-section area of
    the input profile).

    Raises
    ------
    ToolSwallowsClay
        The tool covers the whole profile.
    """
    if conserve not in ("volume", "area"):
        raise ValueError("conserve must be 'volume' or 'area'")
    c = tool.centroid
    clay = Polygon(profile.closed)
    cutter = _cutter(tool)
    overlap = clay.intersection(cutter).area
    if overlap <= 1e-12:
        return profile
    if overlap >= clay.area * (1.0 - 1e-9):
        raise ToolSwallowsClay("the tool covers the entire clay profile")
    tools = [tool]
    if tool.vertices[:, 0].min() < 0:
        tools.append(tool.mirrored_x())
    target = profile.target_volume if conserve == "volume" else profile.area
    push = None
    if motion is not None and np.hypot(*motion) > 0:
        v = np.asarray(motion, dtype=np.float64) / np.hypot(*motion)
        push = (v, np.array([abs(c[0]), c[1]]))
    pts = _cut(profile.points, cutter, tools)
    if pts is None:
        raise ToolSwallowsClay("nothing of the clay survives the tool")
    for _ in range(max_rounds):
        deficit = target - _measure(pts, conserve)
        if abs(deficit) <= rtol * target:
            break
        moved = _refill(pts, cutter, tools, deficit, spread, reach, base_band, conserve, push)
        if moved is None:
            if push is None:
                break
            push = None
            continue
        if push is not None and abs(target - _measure(moved, conserve)) > 0.5 * abs(deficit):
            # pushed clay ran back into the tool: thicken near it instead
            push = None
        pts = moved
    return ClayProfile(pts, profile.mass, profile.density)


def _taper(dist, length):
    return np.where(dist < length, 0.5 * (1.0 + np.cos(np.pi * np.minimum(dist / length, 1.0))), 0.0)


def _refill(pts, cutter, tools, deficit, spread, reach, base_band, conserve, push):
    normals = ClayProfile(pts, 1.0).normals()
    normals[pts[:, 0] <= _EPS, 0] = 0.0
    dist = shapely.distance(shapely.points(pts), cutter)
    free = dist > 1e-6
    if not free.any():
        return None
    on_wheel = pts[:, 1] <= base_band
    offset = None
    if push is not None:
        v, c = push
        facing = np.maximum(normals @ v, 0.0) * ((pts - c) @ v > 0) * free * _taper(dist, reach)
        if facing.sum() > 1e-9:
            offset = facing[:, None] * v
            offset[pts[:, 0] <= _EPS, 0] = 0.0
    base = _measure(pts, conserve)
    h = 1e-5
    if offset is not None:
        offset[on_wheel] = 0.0
        slope = (_measure(pts + h * offset, conserve) - base) / h
        if slope * deficit <= 0:
            offset = None  # the push cannot make up this deficit
    if offset is None:
        w = _taper(dist, spread) * free
        if w.sum() == 0:
            w = free.astype(np.float64)
        offset = w[:, None] * normals
        # clay on the wheel sticks to it
        offset[on_wheel] = 0.0
        slope = (_measure(pts + h * offset, conserve) - base) / h
    if abs(slope) < 1e-15:
        return None
    # move no point by more than 5 mm per round
    cap = 5e-3 / max(float(np.hypot(offset[:, 0], offset[:, 1]).max()), 1e-12)
    d = float(np.clip(deficit / slope, -cap, cap))
    return _cut(pts + d * offset, cutter, tools)


# --------------------------------------------------------------------------
# Observations


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def revolve(profile: ClayProfile, n_angles: int = 64, sigma: float = 0.0, seed=0, *, return_normals: bool = False):
    """Sweep every profile point to ``n_angles`` evenly spaced angles.

    Gaussian noise of standard deviation ``sigma`` is added per coordinate.
    Points are ordered angle-major. With ``return_normals`` the revolved
    outward profile normals are returned as well.
    """
    if n_angles < 3:
        raise ValueError("n_angles must be >= 3")
    pts = profile.points if isinstance(profile, ClayProfile) else np.asarray(profile, dtype=np.float64)
    ang = 2.0 * np.pi * np.arange(n_angles) / n_angles
    c, s = np.cos(ang)[:, None], np.sin(ang)[:, None]
    r, z = pts[:, 0][None, :], pts[:, 1][None, :]
    cloud = np.stack([c * r, s * r, np.broadcast_to(z, (n_angles, len(pts)))], axis=-1).reshape(-1, 3)
    if sigma > 0:
        cloud = cloud + _rng(seed).normal(0.0, sigma, cloud.shape)
    if not return_normals:
        return cloud
    n = profile.normals()
    nr, nz = n[:, 0][None, :], n[:, 1][None, :]
    normals = np.stack([c * nr, s * nr, np.broadcast_to(nz, (n_angles, len(pts)))], axis=-1).reshape(-1, 3)
    return cloud, normals


def heuristic_normals(cloud: np.ndarray) -> np.ndarray:
    """Radial normals, pointing up for points near the top of the cloud."""
    p = np.asarray(cloud, dtype=np.float64)
    r = np.hypot(p[:, 0], p[:, 1])
    n = np.zeros_like(p)
    ok = r > _EPS
    n[ok, 0] = p[ok, 0] / r[ok]
    n[ok, 1] = p[ok, 1] / r[ok]
    top = p[:, 2] >= p[:, 2].max() - 2e-3
    n[top] = (0.0, 0.0, 1.0)
    n[~ok & ~top] = (0.0, 0.0, 1.0)
    return n


def render_partial(full, tool: ConvexPolygon2D | None, cameras=DEFAULT_CAMERAS, normals=None, min_dot: float = 0.1):
    """Points a camera can see and the tool does not hide.

    A point is seen by a camera when its outward normal has a dot product
    above ``min_dot`` with the direction towards that camera; there is no
    hidden-surface removal. ``normals`` default to :func:`heuristic_normals`
    of the cloud, which treat the inside of a bowl as facing outward too.
    Points whose ``(x, z)`` projection falls inside the tool are dropped.
    """
    p = np.asarray(full, dtype=np.float64).reshape(-1, 3)
    n = heuristic_normals(p) if normals is None else np.asarray(normals, dtype=np.float64)
    seen = np.zeros(len(p), dtype=bool)
    for cam in cameras:
        seen |= n @ _normalize(cam) > min_dot
    if tool is not None:
        seen &= ~tool.contains(p[:, [0, 2]], tol=0.0)
    return p[seen]


# --------------------------------------------------------------------------
# Trajectories


def inner_radius(goal: str, mass_g: float = 300.0, density: float = DENSITY, floor: float = FLOOR) -> float:
    """Inner wall radius that makes a flat-floored bowl of the goal size hold the clay."""
    diameter, height = GOALS[goal]
    R = diameter / 2.0
    volume = mass_g * 1e-3 / density
    hollow = math.pi * R * R * height - volume
    if hollow <= 0:
        raise ValueError(f"{mass_g} g of clay does not fit a hollow {goal} bowl")
    return math.sqrt(hollow / (math.pi * (height - floor)))


def column_aspect(goal: str, mass_g: float, density: float = DENSITY) -> float:
    """Height/radius ratio of a cylinder of the given mass as tall as the goal bowl."""
    height = GOALS[goal][1]
    r = math.sqrt(mass_g * 1e-3 / density / (math.pi * height))
    return height / r


N_FRAMES = 150
AIR = 0.1
SWEEP = 3.0


def _keyframes(goal: str, r_i: float, tool: ConvexPolygon2D, floor: float, passes: int, top: float):
    """Keyframe poses with a frame-density weight for the move into each one.

    ``top`` is the height of the starting clay. Moves through the air are
    cheap; the center sweep pushes the most clay per millimetre and is
    sampled densest.
    """
    diameter, height = GOALS[goal]
    R = diameter / 2.0
    lo = tool.vertices.min(axis=0)
    hi = tool.vertices.max(axis=0)
    clear = max(height, top) + 10e-3 - lo[1]  # tool bottom above the rim
    gap = 8e-3
    x_in = r_i - hi[0]  # right face on the inner wall
    x_out = R - lo[0]  # left face on the outer wall
    z_floor = floor - lo[1]
    z_base = -1e-3 - lo[1]  # bottom face just below the wheel surface
    z_top = top + 2e-3 - lo[1]  # bottom face just above the starting clay
    z_wall = height - lo[1]  # bottom face level with the goal rim
    flat = math.pi / 2  # lying tool; its bottom face is then -hi[0] below the center
    x_rim = 0.5 * (r_i + R)
    z_rim = height + hi[0]
    phase1 = [
        ((0.0, 0.0, clear), None),
        ((0.0, 0.0, z_top), AIR),
        ((0.0, 0.0, z_floor), 1.0),
        ((0.0, x_in, z_floor), SWEEP),
    ]
    phase2 = [((0.0, x_in, z_floor), None)]
    for k in range(passes):
        if k:
            phase2 += [
                ((0.0, x_in - gap, clear), AIR),
                ((0.0, x_in - gap, z_floor), AIR),
                ((0.0, x_in, z_floor), 1.0),
            ]
        phase2 += [
            ((0.0, x_in, z_wall), 1.0),
            ((0.0, x_in, clear), AIR),
            ((0.0, x_out + gap, clear), AIR),
            ((0.0, x_out + gap, z_base), AIR),
            ((0.0, x_out, z_base), 1.0),
            ((0.0, x_out, z_wall), 1.0),
            ((0.0, x_out, clear), AIR),
            ((flat, x_rim, clear), AIR),
            ((flat, x_rim, z_rim + 5e-3), AIR),
            ((flat, x_rim, z_rim), 1.0),
            ((flat, x_rim, clear), AIR),
        ]
    return phase1, phase2


def _sample(keys, n: int) -> np.ndarray:
    poses = np.array([k[0] for k in keys])
    weights = np.array([k[1] for k in keys[1:]])
    seg = np.hypot(*np.diff(poses[:, 1:], axis=0).T) * weights
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = s[-1] * np.arange(1, n + 1) / n
    return np.column_stack([np.interp(t, s, poses[:, j]) for j in range(3)])


def script_trajectory(
    goal: str,
    n_frames: int = N_FRAMES,
    *,
    mass_g: float = 300.0,
    density: float = DENSITY,
    tool: ConvexPolygon2D | None = None,
    floor: float = FLOOR,
    passes: int = 3,
    calibrate: bool = True,
) -> np.ndarray:
    """Tool poses ``(theta, tx, tz)`` that throw the clay into the goal bowl.

    Phase one plunges the tool on the axis down to the floor and sweeps it
    out to the inner wall radius. Phase two alternates passes up the inside
    and up the outside of the wall, each followed by pressing the rim down
    to the goal height with the tool lying flat. Wall passes approach
    through the air, move into the wall at its foot and then rise.

    Frames are spread along the path by length, with moves through the air
    counted at a tenth and the center sweep three times over, so that the
    clay changes by a similar amount each frame. The last frame of each
    phase is its endpoint.

    The inner wall radius starts from the volume of a flat-floored bowl.
    With ``calibrate`` the script is rehearsed on the simulator (starting
    from a cylinder as tall as the goal, see :func:`column_aspect`) and the
    radius corrected by a few secant steps on the final outer diameter.
    """
    if goal not in GOALS:
        raise ValueError(f"unknown goal {goal!r}; expected one of {sorted(GOALS)}")
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    tool = scene_tool() if tool is None else tool
    r_i = inner_radius(goal, mass_g, density, floor)
    if calibrate:
        r_i = _calibrated_radius(goal, n_frames, float(mass_g), float(density), tool.vertices.tobytes(), floor, passes)
    return _poses(goal, r_i, n_frames, tool, floor, passes, _start(goal, mass_g, density).height)


def _poses(goal, r_i, n_frames, tool, floor, passes, top) -> np.ndarray:
    phase1, phase2 = _keyframes(goal, r_i, tool, floor, passes, top)
    len1 = _path_length(phase1)
    len2 = _path_length(phase2)
    n1 = min(n_frames - 1, max(1, int(round(n_frames * len1 / (len1 + len2)))))
    return np.vstack([_sample(phase1, n1), _sample(phase2, n_frames - n1)])


def throw(profile: ClayProfile, tool: ConvexPolygon2D, poses: np.ndarray, **kwargs) -> list[ClayProfile]:
    """Ground-truth profile after each pose, with the motion taken from consecutive poses."""
    out = []
    for i, pose in enumerate(poses):
        motion = pose[1:] - poses[i - 1, 1:] if i else None
        profile = deform_step(profile, tool.transformed(*pose), motion=motion, **kwargs)
        out.append(profile)
    return out


@functools.lru_cache(maxsize=64)
def _calibrated_radius(goal, n_frames, mass_g, density, tool_bytes, floor, passes, iters: int = 4) -> float:
    tool = ConvexPolygon2D.from_vertices(np.frombuffer(tool_bytes).reshape(-1, 2))
    diameter, height = GOALS[goal]
    R = diameter / 2.0
    start = _start(goal, mass_g, density)

    def err(r):
        try:
            final = throw(start, tool, _poses(goal, r, n_frames, tool, floor, passes, start.height))[-1]
        except (DegenerateInput, ToolSwallowsClay):
            return None  # this radius tears the clay apart
        return final.outer_diameter - diameter

    r0 = inner_radius(goal, mass_g, density, floor)
    e0 = err(r0)
    if e0 is None:
        return r0
    best = (abs(e0), r0)
    # slope of the flat-floored-bowl diameter in the inner radius
    slope = 2.0 * r0 * (height - floor) / (height * R)
    r1 = r0 - e0 / slope
    for _ in range(iters):
        if abs(e0) < 2.5e-4:
            break
        r1 = float(np.clip(r1, 0.3 * R, R - 2e-3))
        e1 = err(r1)
        if e1 is None:
            r1 = 0.5 * (r0 + r1)
            continue
        best = min(best, (abs(e1), r1))
        if abs(e1 - e0) < 1e-12:
            break
        r0, e0, r1 = r1, e1, r1 - e1 * (r1 - r0) / (e1 - e0)
    logger.debug("calibrated inner radius for %s/%g g: %.2f mm (diameter error %.2f mm)", goal, mass_g, best[1] * 1e3, best[0] * 1e3)
    return best[1]


def _start(goal: str, mass_g: float, density: float) -> ClayProfile:
    return generate_initial_clay(mass_g, density, column_aspect(goal, mass_g, density))


def _path_length(keys) -> float:
    poses = np.array([k[0] for k in keys])
    weights = np.array([k[1] for k in keys[1:]])
    return float((np.hypot(*np.diff(poses[:, 1:], axis=0).T) * weights).sum())


# --------------------------------------------------------------------------
# Scenes


@dataclass(frozen=True)
class Rates:
    frame_hz: float = 25.0
    spin_hz: float = 3.0


@dataclass(frozen=True)
class MarkerRig:
    radius: float = 0.15
    occlusion: float = math.radians(20.0)  # half-width of the blind cone around the tool
    sigma: float = 0.0


@dataclass(eq=False)
class SimScene:
    """Everything observed and known about one synthetic throwing session.

    The first ``n_preroll`` frames show the untouched clay spinning with the
    tool parked away; the scripted poses follow. ``profiles[i]`` is the
    ground truth after frame ``i``. Full clouds are regenerated on demand
    from the per-frame seed, so they equal the clouds the partial views were
    rendered from.
    """

    goal: str
    mass_g: float
    seed: int
    sigma: float
    rates: Rates
    n_angles: int
    tool_shape: ConvexPolygon2D
    poses: np.ndarray
    n_preroll: int
    timestamps: np.ndarray
    profiles: list[ClayProfile]
    partial_clouds: list[np.ndarray]
    markers: list[MarkerObservation]
    wheel_angles: np.ndarray
    cameras: tuple = field(default=DEFAULT_CAMERAS)

    @property
    def n_frames(self) -> int:
        return len(self.profiles)

    @property
    def name(self) -> str:
        return f"{self.goal}_{int(round(self.mass_g))}g_s{self.seed}"

    def tool_state(self, i: int) -> ConvexPolygon2D:
        return self.tool_shape.transformed(*self.poses[i])

    def full_cloud(self, i: int) -> np.ndarray:
        i = range(self.n_frames)[i]
        return revolve(self.profiles[i], self.n_angles, self.sigma, _frame_rng(self.seed, i))

    def truth_cross_section(self, i: int = -1) -> np.ndarray:
        return self.profiles[i].cross_section()


def _frame_rng(seed: int, i: int, channel: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(i), int(channel)])


PARKED = (0.0, 0.25, 0.10)


def simulate_scene(
    goal: str,
    mass_g: float,
    seed: int,
    rates: Rates = Rates(),
    *,
    sigma: float = 5e-4,
    n_frames: int = N_FRAMES,
    n_angles: int = 64,
    density: float = DENSITY,
    tool: ConvexPolygon2D | None = None,
    markers: MarkerRig = MarkerRig(),
    cameras=DEFAULT_CAMERAS,
) -> SimScene:
    """Run the scripted trajectory and record what the sensors would see.

    The clay starts as a cylinder as tall as the goal bowl (see
    :func:`column_aspect`); opening it pushes the wall outward. Partial
    views use :func:`heuristic_normals` of the noise-free cloud.
    """
    if not mass_g > 0:
        raise ValueError("mass must be positive")
    if int(seed) < 0:
        raise ValueError("seed must be >= 0")
    tool = scene_tool() if tool is None else tool
    poses_traj = script_trajectory(goal, n_frames, mass_g=mass_g, density=density, tool=tool)
    n_pre = int(math.ceil(rates.frame_hz / rates.spin_hz)) + 1
    poses = np.vstack([np.tile(PARKED, (n_pre, 1)), poses_traj])
    t = np.arange(len(poses)) / rates.frame_hz
    angles = 2.0 * math.pi * rates.spin_hz * t
    profile = _start(goal, mass_g, density)
    profiles = throw(profile, tool, poses)
    partials, obs = [], []
    mrng = _frame_rng(seed, 0, 2)
    for i, pose in enumerate(poses):
        state = tool.transformed(*pose)
        profile = profiles[i]
        cloud = revolve(profile, n_angles, 0.0)
        n = heuristic_normals(cloud)
        if sigma > 0:
            cloud = cloud + _frame_rng(seed, i).normal(0.0, sigma, cloud.shape)
        partials.append(render_partial(cloud, state, cameras, n))
        obs.append(_markers(t[i], angles[i], markers, mrng))
    logger.info("scene %s/%g g: OD %.1f mm, height %.1f mm", goal, mass_g, profile.outer_diameter * 1e3, profile.height * 1e3)
    return SimScene(goal, float(mass_g), int(seed), float(sigma), rates, n_angles, tool, poses, n_pre, t,
                    profiles, partials, obs, angles, tuple(cameras))


def _markers(t: float, angle: float, rig: MarkerRig, rng) -> MarkerObservation:
    pos = {}
    for name, offset in (("a", 0.0), ("b", math.pi)):
        a = angle + offset
        visible = abs(math.remainder(a, 2.0 * math.pi)) > rig.occlusion
        p = rig.radius * np.array([math.cos(a), math.sin(a)])
        if rig.sigma > 0:
            p = p + rng.normal(0.0, rig.sigma, 2)
        pos[name] = p if visible else None
    return MarkerObservation(float(t), pos["a"], pos["b"])
