"""Plain-text file formats.

Every reader accepts what the matching writer produces. Floats are written
with 17 significant digits so a write/read round trip is exact and reruns
give identical bytes.

* point cloud ``.xyz``: header ``# frame t=<seconds> unit=<m|mm>``, then
  ``x y z`` per line.
* cross-section ``.xz``: header ``# section t=<seconds> unit=<m|mm>``, then
  ``x z`` per line.
* trajectory CSV: ``t,pose_theta,pose_tx,pose_tz`` or ``t,q1,...,qk``.
* tool polygon ``.poly``: one counterclockwise ``x z`` vertex per line.
* markers CSV: ``t,ax,ay,a_visible,bx,by,b_visible``; hidden markers are
  written as ``nan`` with the flag 0.
* mesh ``.mesh``: ``r x z`` rest vertices, ``v x z`` current vertices,
  ``f i j k`` zero-based counterclockwise triangles.
* key-value manifest: ``key = value`` per line, ``#`` comments, strings
  quoted (see :func:`clayrecon.config.parse_kv`).
"""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import ConvexPolygon2D, TriMesh2D, compute_weights
from .registration import MarkerObservation

logger = logging.getLogger(__name__)

FMT = "%.17g"
_HEADER = re.compile(r"#\s*(\w+)\s+t=(\S+)\s+unit=(m|mm)\s*$")
_UNIT = {"m": 1.0, "mm": 1e-3}


def _fmt(x: float) -> str:
    return FMT % x


def _rows(path, arr: np.ndarray, header: str | None = None) -> None:
    with open(path, "w") as f:
        if header is not None:
            f.write(header + "\n")
        for row in arr:
            f.write(" ".join(_fmt(v) for v in row) + "\n")


def _read_table(path, ncols: int, kind: str) -> tuple[float, np.ndarray]:
    path = Path(path)
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    m = _HEADER.match(lines[0])
    if m is None or m.group(1) != kind:
        raise ValueError(f"{path}: expected header '# {kind} t=<seconds> unit=<m|mm>'")
    t, scale = float(m.group(2)), _UNIT[m.group(3)]
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        arr = np.array([[float(v) for v in ln.split()] for ln in body], dtype=np.float64).reshape(-1, ncols)
    except ValueError as exc:
        raise ValueError(f"{path}: expected {ncols} numbers per line") from exc
    return t, arr * scale


def write_cloud(path, cloud, t: float = 0.0, unit: str = "m") -> None:
    """Write an ``(N, 3)`` cloud given in meters, stored in ``unit``."""
    p = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    _rows(path, p / _UNIT[unit], f"# frame t={_fmt(t)} unit={unit}")


def read_cloud(path) -> tuple[float, np.ndarray]:
    """``(t, points)`` with points converted to meters."""
    return _read_table(path, 3, "frame")


def write_section(path, section, t: float = 0.0, unit: str = "m") -> None:
    p = np.asarray(section, dtype=np.float64).reshape(-1, 2)
    _rows(path, p / _UNIT[unit], f"# section t={_fmt(t)} unit={unit}")


def read_section(path) -> tuple[float, np.ndarray]:
    return _read_table(path, 2, "section")


# --------------------------------------------------------------------------
# Trajectories, tools, markers


@dataclass(frozen=True)
class Trajectory:
    """Timestamps plus either planar poses ``(theta, tx, tz)`` or joint vectors."""

    times: np.ndarray
    poses: np.ndarray | None = None
    joints: np.ndarray | None = None

    def __post_init__(self):
        if (self.poses is None) == (self.joints is None):
            raise ValueError("give exactly one of poses and joints")

    def __len__(self) -> int:
        return len(self.times)


def write_trajectory(path, times, poses=None, joints=None) -> None:
    traj = Trajectory(np.asarray(times, dtype=np.float64), poses, joints)
    if traj.poses is not None:
        header = ["t", "pose_theta", "pose_tx", "pose_tz"]
        data = np.asarray(traj.poses, dtype=np.float64).reshape(-1, 3)
    else:
        data = np.asarray(traj.joints, dtype=np.float64)
        data = data.reshape(len(data), -1)
        header = ["t"] + [f"q{i + 1}" for i in range(data.shape[1])]
    if len(data) != len(traj.times):
        raise ValueError("one pose per timestamp")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for t, row in zip(traj.times, data):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def read_trajectory(path) -> Trajectory:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty trajectory")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64).reshape(-1, len(header))
    if header == ["t", "pose_theta", "pose_tx", "pose_tz"]:
        return Trajectory(data[:, 0], poses=data[:, 1:])
    if header[0] == "t" and len(header) > 1 and header[1:] == [f"q{i + 1}" for i in range(len(header) - 1)]:
        return Trajectory(data[:, 0], joints=data[:, 1:])
    raise ValueError(f"{path}: unrecognised trajectory header {','.join(header)}")


def write_tool(path, tool: ConvexPolygon2D) -> None:
    _rows(path, tool.vertices)


def read_tool(path) -> ConvexPolygon2D:
    with open(path) as f:
        rows = [ln.split() for ln in f if ln.strip() and not ln.lstrip().startswith("#")]
    return ConvexPolygon2D.from_vertices(np.array(rows, dtype=np.float64).reshape(-1, 2))


def write_markers(path, observations) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "ax", "ay", "a_visible", "bx", "by", "b_visible"])
        for o in observations:
            row = [_fmt(o.timestamp)]
            for m in (o.marker_a, o.marker_b):
                row += ["nan", "nan", "0"] if m is None else [_fmt(m[0]), _fmt(m[1]), "1"]
            w.writerow(row)


def read_markers(path) -> list[MarkerObservation]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        out = []
        for r in reader:
            a = (float(r["ax"]), float(r["ay"])) if int(r["a_visible"]) else None
            b = (float(r["bx"]), float(r["by"])) if int(r["b_visible"]) else None
            out.append(MarkerObservation(float(r["t"]), a, b))
    return out


# --------------------------------------------------------------------------
# Meshes


def write_mesh(path, mesh: TriMesh2D) -> None:
    with open(path, "w") as f:
        f.write(f"# mesh vertices={mesh.n_vertices} faces={len(mesh.triangles)} unit=m\n")
        for tag, arr in (("r", mesh.rest), ("v", mesh.current)):
            for x, z in arr:
                f.write(f"{tag} {_fmt(x)} {_fmt(z)}\n")
        for a, b, c in mesh.triangles:
            f.write(f"f {a} {b} {c}\n")


def read_mesh(path) -> TriMesh2D:
    rest, cur, tri = [], [], []
    with open(path) as f:
        for ln in f:
            parts = ln.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "r":
                rest.append([float(parts[1]), float(parts[2])])
            elif parts[0] == "v":
                cur.append([float(parts[1]), float(parts[2])])
            elif parts[0] == "f":
                tri.append([int(v) for v in parts[1:4]])
            else:
                raise ValueError(f"{path}: unknown record {parts[0]!r}")
    if not rest:
        rest = cur
    return compute_weights(TriMesh2D(np.array(rest).reshape(-1, 2), np.array(cur).reshape(-1, 2),
                                     np.array(tri, dtype=np.int64).reshape(-1, 3)), clamp_negative=True)


# --------------------------------------------------------------------------
# Manifests


def _value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        if not v:
            return '""'
        if len(v) == 1:
            return _value(v[0]) + ","
        return ", ".join(_value(x) for x in v)
    return '"' + str(v) + '"'


def write_manifest(path, items: dict) -> None:
    """Write a flat ``key -> value`` mapping in key order."""
    with open(path, "w") as f:
        for k in sorted(items):
            f.write(f"{k} = {_value(items[k])}\n")


def read_manifest(path) -> dict:
    from .config import parse_kv

    with open(path) as f:
        return parse_kv(f.read(), source=str(path))


# --------------------------------------------------------------------------
# Scene bundles


SCENE_MANIFEST = "scene.toml"
TRUTH_SECTION = "truth_cs.xz"


@dataclass
class SceneBundle:
    """A scene as read back from disk.

    ``full_clouds`` maps frame index to cloud for the frames that were
    written; ``truth_cs`` is the final ground-truth cross-section if present.
    """

    manifest: dict
    partial_clouds: list[np.ndarray]
    timestamps: np.ndarray
    trajectory: Trajectory
    markers: list[MarkerObservation]
    tool_shape: ConvexPolygon2D
    full_clouds: dict[int, np.ndarray]
    truth_cs: np.ndarray | None = None

    @property
    def n_frames(self) -> int:
        return len(self.partial_clouds)

    @property
    def n_preroll(self) -> int:
        return int(self.manifest["n_preroll"])

    @property
    def n_angles(self) -> int:
        return int(self.manifest.get("n_angles", 64))

    @property
    def name(self) -> str:
        return str(self.manifest.get("name", "scene"))

    @property
    def goal(self) -> str:
        return str(self.manifest.get("goal", ""))

    @property
    def mass_g(self) -> float:
        return float(self.manifest.get("mass_g", 0.0))

    @property
    def poses(self) -> np.ndarray:
        if self.trajectory.poses is None:
            raise ValueError("trajectory holds joint vectors; convert them to poses first")
        return self.trajectory.poses

    def full_cloud(self, i: int) -> np.ndarray:
        i = i % self.n_frames
        if i not in self.full_clouds:
            raise FileNotFoundError(f"full cloud of frame {i} was not written")
        return self.full_clouds[i]

    def truth_cross_section(self, i: int = -1) -> np.ndarray:
        if i not in (-1, self.n_frames - 1) or self.truth_cs is None:
            raise FileNotFoundError("only the final ground-truth cross-section is stored")
        return self.truth_cs


def write_scene_bundle(scene, directory, full_frames: str = "all") -> Path:
    """Write a simulated scene; ``full_frames`` is ``"all"`` or ``"last"``."""
    if full_frames not in ("all", "last"):
        raise ValueError("full_frames must be 'all' or 'last'")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_manifest(d / SCENE_MANIFEST, {
        "name": scene.name, "goal": scene.goal, "mass_g": scene.mass_g, "seed": scene.seed,
        "sigma_mm": scene.sigma * 1e3, "rates.frame_hz": scene.rates.frame_hz,
        "rates.spin_hz": scene.rates.spin_hz, "n_angles": scene.n_angles,
        "n_preroll": scene.n_preroll, "n_frames": scene.n_frames,
    })
    last = scene.n_frames - 1
    for i in range(scene.n_frames):
        t = float(scene.timestamps[i])
        write_cloud(d / f"partial_{i:04d}.xyz", scene.partial_clouds[i], t)
        if full_frames == "all" or i == last:
            write_cloud(d / f"full_{i:04d}.xyz", scene.full_cloud(i), t)
    write_markers(d / "markers.csv", scene.markers)
    write_trajectory(d / "trajectory.csv", scene.timestamps, poses=scene.poses)
    write_tool(d / "tool.poly", scene.tool_shape)
    write_section(d / TRUTH_SECTION, scene.truth_cross_section(-1), float(scene.timestamps[-1]))
    logger.info("wrote scene %s (%d frames) to %s", scene.name, scene.n_frames, d)
    return d


def read_scene_bundle(directory) -> SceneBundle:
    d = Path(directory)
    if not (d / SCENE_MANIFEST).is_file():
        raise FileNotFoundError(f"{d / SCENE_MANIFEST}: no scene manifest")
    manifest = read_manifest(d / SCENE_MANIFEST)
    n = int(manifest["n_frames"])
    times, partials, full = [], [], {}
    for i in range(n):
        t, p = read_cloud(d / f"partial_{i:04d}.xyz")
        times.append(t)
        partials.append(p)
        fp = d / f"full_{i:04d}.xyz"
        if fp.is_file():
            full[i] = read_cloud(fp)[1]
    truth = read_section(d / TRUTH_SECTION)[1] if (d / TRUTH_SECTION).is_file() else None
    traj = read_trajectory(d / "trajectory.csv")
    if len(traj) != n:
        raise ValueError(f"{d / 'trajectory.csv'}: {len(traj)} rows for {n} frames")
    return SceneBundle(manifest, partials, np.array(times), traj, read_markers(d / "markers.csv"),
                       read_tool(d / "tool.poly"), full, truth)


