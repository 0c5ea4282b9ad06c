"""Chamfer distances and the reconstruction ablation protocol.

Distances are computed in meters and reported in millimeters. Both scores
are unidirectional from the ground truth to the mesh: the mesh carries
interior vertices that no camera could see, so only "is every true surface
point explained by some mesh vertex" is measured.
"""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyInput, EmptyReport
from .reconstruct import AblationFlags, ReconParams, TrajectoryFrame, run_trajectory
from .registration import merge_revolution, track_angles

logger = logging.getLogger(__name__)

METHODS = ("reference_cs", "mesh_wo_contact", "mesh_wo_arap", "mesh_full")
FLAGS = {
    "mesh_wo_contact": AblationFlags(use_contact=False, use_arap=True),
    "mesh_wo_arap": AblationFlags(use_contact=True, use_arap=False),
    "mesh_full": AblationFlags(use_contact=True, use_arap=True),
}
CSV_COLUMNS = ("method", "scene", "mass_g", "goal", "cs_cd_mm", "fp_cd_mm")


def _pair(source, target):
    s = np.asarray(source, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if s.ndim != 2 or t.ndim != 2 or len(s) == 0 or len(t) == 0:
        raise EmptyInput("chamfer distance needs two non-empty point sets")
    if s.shape[1] != t.shape[1]:
        raise ValueError(f"dimension mismatch: {s.shape[1]} vs {t.shape[1]}")
    return s, t


def nearest_distances(source, target) -> np.ndarray:
    """Distance from every source point to its nearest target point."""
    s, t = _pair(source, target)
    d, _ = cKDTree(t).query(s, k=1)
    return d


def ucd(source, target) -> float:
    """Mean over ``source`` of the distance to the nearest ``target`` point."""
    return float(np.mean(nearest_distances(source, target)))


def bcd(a, b) -> float:
    """Average of the two unidirectional distances."""
    return 0.5 * (ucd(a, b) + ucd(b, a))


def revolve_section(section, n_angles: int) -> np.ndarray:
    """Sweep a cross-section about the z-axis, using ``|x|`` as the radius."""
    p = np.asarray(section, dtype=np.float64).reshape(-1, 2)
    if n_angles < 3:
        raise ValueError("n_angles must be >= 3")
    ang = 2.0 * np.pi * np.arange(n_angles) / n_angles
    r = np.abs(p[:, 0])[None, :]
    z = np.broadcast_to(p[:, 1][None, :], (n_angles, len(p)))
    return np.stack([np.cos(ang)[:, None] * r, np.sin(ang)[:, None] * r, z], axis=-1).reshape(-1, 3)


def evaluate_reconstruction(mesh_vertices, truth_cs, truth_full, n_angles: int = 64) -> tuple[float, float]:
    """``(cs_cd, fp_cd)`` in meters for a reconstructed cross-section.

    ``mesh_vertices`` may be a :class:`TriMesh2D` (its current positions are
    used) or an ``(N, 2)`` array.
    """
    v = getattr(mesh_vertices, "current", mesh_vertices)
    v = np.asarray(v, dtype=np.float64).reshape(-1, 2)
    if len(v) == 0:
        raise EmptyInput("mesh has no vertices")
    return ucd(truth_cs, v), ucd(truth_full, revolve_section(v, n_angles))


# --------------------------------------------------------------------------
# Scenes -> pipeline input


def scene_inputs(scene):
    """Initial merged cloud and trajectory frames of a simulated scene.

    The wheel angle comes from the marker track; the first revolution of
    partial views (tool parked) is merged into the initial observation.
    """
    n = scene.n_preroll
    angles = track_angles(scene.markers[:n])
    initial = merge_revolution(list(zip(scene.partial_clouds[:n], angles)))
    frames = [
        TrajectoryFrame(float(scene.timestamps[i]), scene.partial_clouds[i], tuple(float(v) for v in scene.poses[i]))
        for i in range(n, scene.n_frames)
    ]
    return initial, frames


@dataclass(frozen=True)
class EvalRow:
    method: str
    scene: str
    mass_g: float
    goal: str
    cs_cd: float  # meters
    fp_cd: float

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.cs_cd >= 0 and self.fp_cd >= 0):
            raise ValueError("distances must be non-negative")


def evaluate_scene(scene, params: ReconParams = ReconParams(), methods=METHODS) -> list[EvalRow]:
    """Score every method on the final frame of one scene."""
    truth_cs = scene.truth_cross_section(-1)
    truth_full = scene.full_cloud(scene.n_frames - 1)
    rows = []
    inputs = None
    for method in methods:
        if method == "reference_cs":
            cs, fp = 0.0, ucd(truth_full, revolve_section(truth_cs, scene.n_angles))
        else:
            if inputs is None:
                inputs = scene_inputs(scene)
            mesh = run_trajectory(inputs[0], inputs[1], scene.tool_shape, params, FLAGS[method])
            cs, fp = evaluate_reconstruction(mesh, truth_cs, truth_full, scene.n_angles)
        rows.append(EvalRow(method, scene.name, scene.mass_g, scene.goal, cs, fp))
        logger.info("%-16s %-18s cs %.2f mm  fp %.2f mm", method, scene.name, cs * 1e3, fp * 1e3)
    return rows


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def methods(self) -> list[str]:
        present = {r.method for r in self.rows}
        return [m for m in METHODS if m in present]

    def scenes(self) -> list[str]:
        return list(dict.fromkeys(r.scene for r in self.rows))

    def table(self, metric: str = "cs_cd") -> dict[str, dict[str, float]]:
        """``method -> scene -> value`` in meters."""
        out: dict[str, dict[str, float]] = {}
        for r in self.rows:
            out.setdefault(r.method, {})[r.scene] = getattr(r, metric)
        return out

    def summary(self) -> list[dict]:
        """Mean and median per method, in millimeters."""
        if not self.rows:
            raise EmptyReport("report has no rows")
        out = []
        for m in self.methods():
            cs = np.array([r.cs_cd for r in self.rows if r.method == m]) * 1e3
            fp = np.array([r.fp_cd for r in self.rows if r.method == m]) * 1e3
            out.append({
                "method": m, "n_scenes": len(cs),
                "cs_cd_mean_mm": float(cs.mean()), "cs_cd_median_mm": float(np.median(cs)),
                "fp_cd_mean_mm": float(fp.mean()), "fp_cd_median_mm": float(np.median(fp)),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.method, r.scene, f"{r.mass_g:g}", r.goal, f"{r.cs_cd * 1e3:.6f}", f"{r.fp_cd * 1e3:.6f}"])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys = ("method", "n_scenes", "cs_cd_mean_mm", "cs_cd_median_mm", "fp_cd_mean_mm", "fp_cd_median_mm")
        w.writerow(keys)
        for s in self.summary():
            w.writerow([s["method"], s["n_scenes"]] + [f"{s[k]:.6f}" for k in keys[2:]])
        return buf.getvalue()

    def ordering_fraction(self) -> float:
        """Share of scenes with full <= w/o ARAP <= w/o contact in cs_cd."""
        t = self.table("cs_cd")
        scenes = self.scenes()
        ok = [t["mesh_full"][s] <= t["mesh_wo_arap"][s] <= t["mesh_wo_contact"][s] for s in scenes]
        return float(np.mean(ok))

    def arap_reduction(self) -> float:
        """Relative reduction of the mean cs_cd from w/o ARAP to full."""
        t = self.table("cs_cd")
        full = np.mean(list(t["mesh_full"].values()))
        wo = np.mean(list(t["mesh_wo_arap"].values()))
        return float(1.0 - full / wo)


def _scene_job(args):
    from .sim import simulate_scene

    spec, params, methods, sim_kwargs = args
    goal, mass, seed = spec
    return evaluate_scene(simulate_scene(goal, mass, seed, **sim_kwargs), params, methods)


def ablation_report(scene_specs, params: ReconParams = ReconParams(), methods=METHODS, jobs: int = 1, **sim_kwargs) -> EvalReport:
    """Simulate and score every ``(goal, mass_g, seed)`` scene.

    Scenes are independent and may run in ``jobs`` worker processes; rows
    come back in input order either way.
    """
    specs = [tuple(s) for s in scene_specs]
    if not specs:
        raise ValueError("need at least one scene")
    work = [(s, params, tuple(methods), sim_kwargs) for s in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scene_job, work))
    else:
        results = [_scene_job(w) for w in work]
    return EvalReport([r for rows in results for r in rows])


def default_scene_specs(n: int = 20, seed: int = 0) -> list[tuple[str, float, int]]:
    """``n`` scenes cycling over both goals and the three clay masses."""
    from .sim import GOALS, MASSES_G

    combos = [(g, m) for g in sorted(GOALS) for m in MASSES_G]
    return [(combos[i % len(combos)][0], combos[i % len(combos)][1], seed + i) for i in range(n)]
