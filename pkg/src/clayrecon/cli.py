"""Command-line driver.

``clayrecon MODE [options]`` with MODE one of ``sim-gen``, ``register``,
``reconstruct``, ``evaluate`` and ``ablate``. Settings come from
``--config`` (see :mod:`clayrecon.config`) and are overridden by flags;
``--set key=value`` reaches any configuration key. Artifacts go under the
output directory (``--output``, else ``$CLAYRECON_OUT``, else
``./clayrecon_out``) together with ``run.toml``, a manifest holding the
resolved configuration and the library version.

Exit status: 0 on success, 1 when a requested assertion fails, 2 on a
configuration error, 3 on any other error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import __version__
from .config import MODES, PipelineConfig, load_config, parse_kv
from .errors import ClayReconError, ConfigError, EmptyReport
from .io import (
    read_mesh,
    read_scene_bundle,
    read_trajectory,
    write_cloud,
    write_manifest,
    write_mesh,
    write_scene_bundle,
    write_section,
)
from .metrics import (
    FLAGS,
    EvalReport,
    EvalRow,
    ablation_report,
    default_scene_specs,
    evaluate_reconstruction,
    evaluate_scene,
    revolve_section,
)
from .reconstruct import PlanarChain, TrajectoryFrame, run_trajectory
from .registration import TWO_PI, merge_revolution, track_angles
from .sim import Rates, simulate_scene

logger = logging.getLogger("clayrecon")

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3


def print_run_summary(report: EvalReport, file=None) -> str:
    """Print per-method mean and median distances (mm) as an aligned table.

    Returns the printed text.

    Raises
    ------
    EmptyReport
        The report has no rows.
    """
    if not len(report):
        raise EmptyReport("nothing to summarise: the report is empty")
    head = ("method", "scenes", "cs_cd mean", "cs_cd median", "fp_cd mean", "fp_cd median")
    rows = [head]
    for s in report.summary():
        rows.append((s["method"], str(s["n_scenes"]))
                    + tuple(f"{s[k]:.2f}" for k in ("cs_cd_mean_mm", "cs_cd_median_mm", "fp_cd_mean_mm", "fp_cd_median_mm")))
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    text = "\n".join(lines) + "\n" + "(distances in mm)\n"
    print(text, end="", file=sys.stdout if file is None else file)
    return text


# --------------------------------------------------------------------------
# Modes


def _merge_span(angles) -> int:
    """Number of leading frames needed to cover one full turn."""
    a = np.asarray(angles)
    k = np.flatnonzero(a - a[0] >= TWO_PI)
    if len(k) == 0:
        raise ClayReconError(f"marker track spans only {a[-1] - a[0]:.2f} rad, less than one revolution")
    return int(k[0]) + 1


def _registered(bundle):
    """Wheel angles and the merged first-revolution cloud of a bundle."""
    angles = track_angles(bundle.markers)
    n = bundle.n_preroll if "n_preroll" in bundle.manifest else _merge_span(angles)
    return angles, n, merge_revolution(list(zip(bundle.partial_clouds[:n], angles[:n])))


def _write_report(cfg: PipelineConfig, report: EvalReport) -> None:
    (cfg.output / "report.csv").write_text(report.to_csv())
    (cfg.output / "summary.csv").write_text(report.summary_csv())
    print_run_summary(report)


def _sim_gen(cfg: PipelineConfig) -> int:
    s = cfg.sim
    scene = simulate_scene(s.goal, s.mass_g, cfg.seed, Rates(s.frame_hz, s.spin_hz), sigma=s.sigma,
                           n_frames=s.n_frames, n_angles=s.n_angles)
    write_scene_bundle(scene, cfg.output / "scene", s.full_frames)
    return EXIT_OK


def _register(cfg: PipelineConfig) -> int:
    bundle = read_scene_bundle(cfg.scene)
    angles, n, merged = _registered(bundle)
    with open(cfg.output / "angles.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "theta"])
        for t, a in zip(bundle.timestamps, angles):
            w.writerow([f"{t:.17g}", f"{a:.17g}"])
    write_cloud(cfg.output / "merged.xyz", merged, float(bundle.timestamps[n - 1]))
    logger.info("registered %d frames; merged %d frames into %d points", len(angles), n, len(merged))
    return EXIT_OK


def _adapter(cfg: PipelineConfig):
    k = cfg.kinematics
    if not k.get("links"):
        return None
    return PlanarChain(k["links"], k.get("base", (0.0, 0.0)), k.get("tool_angle", 0.0))


def _reconstruct(cfg: PipelineConfig) -> int:
    bundle = read_scene_bundle(cfg.scene)
    traj = read_trajectory(cfg.trajectory) if cfg.trajectory is not None else bundle.trajectory
    if len(traj) != bundle.n_frames:
        raise ClayReconError(f"trajectory has {len(traj)} rows for {bundle.n_frames} frames")
    _, n, initial = _registered(bundle)
    frames = []
    for i in range(n, bundle.n_frames):
        if traj.poses is not None:
            frames.append(TrajectoryFrame(float(traj.times[i]), bundle.partial_clouds[i], tuple(traj.poses[i])))
        else:
            frames.append(TrajectoryFrame(float(traj.times[i]), bundle.partial_clouds[i], joint_vector=traj.joints[i]))
    mesh = run_trajectory(initial, frames, bundle.tool_shape, cfg.recon, cfg.flags, _adapter(cfg))
    t = float(bundle.timestamps[-1])
    write_mesh(cfg.output / "mesh.mesh", mesh)
    write_section(cfg.output / "section.xz", mesh.current, t)
    write_cloud(cfg.output / "revolved.xyz", revolve_section(mesh.current, cfg.sim.n_angles), t)
    return EXIT_OK


def _flags_method(cfg: PipelineConfig) -> str:
    for name, flags in FLAGS.items():
        if flags == cfg.flags:
            return name
    raise ConfigError("flags: use_contact = false with use_arap = false is not an evaluated method")


def _evaluate(cfg: PipelineConfig) -> int:
    bundle = read_scene_bundle(cfg.scene)
    if cfg.mesh is not None:
        truth_cs = bundle.truth_cross_section(-1)
        truth_full = bundle.full_cloud(-1)
        cs, fp = evaluate_reconstruction(read_mesh(cfg.mesh), truth_cs, truth_full, bundle.n_angles)
        report = EvalReport([EvalRow(_flags_method(cfg), bundle.name, bundle.mass_g, bundle.goal, cs, fp)])
    else:
        report = EvalReport(evaluate_scene(bundle, cfg.recon, cfg.methods))
    _write_report(cfg, report)
    return EXIT_OK


def _ablate(cfg: PipelineConfig) -> int:
    s = cfg.sim
    specs = default_scene_specs(cfg.n_scenes, cfg.seed)
    report = ablation_report(specs, cfg.recon, cfg.methods, cfg.jobs, rates=Rates(s.frame_hz, s.spin_hz),
                             sigma=s.sigma, n_frames=s.n_frames, n_angles=s.n_angles)
    _write_report(cfg, report)
    if cfg.assert_ordering:
        needed = {"mesh_wo_contact", "mesh_wo_arap", "mesh_full"}
        if not needed <= set(cfg.methods):
            raise ConfigError("assert.ordering: needs methods " + ", ".join(sorted(needed)))
        frac = report.ordering_fraction()
        if frac < cfg.min_fraction:
            print(f"ordering assertion FAILED: full <= w/o ARAP <= w/o contact on {frac:.0%} of scenes "
                  f"(need {cfg.min_fraction:.0%})")
            return EXIT_ASSERT
        print(f"ordering assertion passed on {frac:.0%} of scenes")
    return EXIT_OK


_RUNNERS = {"sim-gen": _sim_gen, "register": _register, "reconstruct": _reconstruct,
            "evaluate": _evaluate, "ablate": _ablate}


def write_run_manifest(cfg: PipelineConfig) -> None:
    items = {k: ("" if v is None else v) for k, v in cfg.values.items()}
    items["output"] = str(cfg.output)
    items["clayrecon.version"] = __version__  # the running library, whatever the config said
    write_manifest(cfg.output / "run.toml", items)


def run_pipeline(cfg: PipelineConfig) -> int:
    """Run the configured mode and return the exit status.

    Configuration and IO problems raise; a failed ``--assert-ordering``
    check returns 1.
    """
    cfg.output.mkdir(parents=True, exist_ok=True)
    write_run_manifest(cfg)
    logger.info("clayrecon %s: %s -> %s", __version__, cfg.mode, cfg.output)
    return _RUNNERS[cfg.mode](cfg)


# --------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clayrecon", description="Occluded clay cross-section reconstruction.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="base random seed")
    p.add_argument("--jobs", type=int, help="parallel scene workers")
    p.add_argument("--assert-ordering", action="store_true",
                   help="ablate: exit 1 unless full <= w/o ARAP <= w/o contact on enough scenes")
    p.add_argument("--output", metavar="DIR", help="output directory")
    p.add_argument("--scene", metavar="DIR", help="scene bundle directory")
    p.add_argument("--trajectory", metavar="CSV", help="trajectory file replacing the bundle's")
    p.add_argument("--mesh", metavar="FILE", help="evaluate: mesh file to score")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _overrides(args) -> dict:
    out = {"mode": args.mode}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item}: expected KEY=VALUE")
        out.update(parse_kv(item, source="--set"))
    for key in ("seed", "jobs", "output", "scene", "trajectory", "mesh"):
        v = getattr(args, key)
        if v is not None:
            out[key] = v
    if args.assert_ordering:
        out["assert.ordering"] = True
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        return run_pipeline(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ClayReconError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
