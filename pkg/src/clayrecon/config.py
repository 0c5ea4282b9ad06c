"""Pipeline configuration: a flat key-value file with dotted sections.

One ``key = value`` per line; ``#`` starts a comment. A ``[section]`` line
prefixes the keys that follow with ``section.``. Values are booleans
(``true``/``false``), numbers, quoted or bare strings, or comma-separated
lists. Length keys are stored in meters and may also be given in
millimeters with an ``_mm`` suffix, e.g. ``recon.t_thresh_mm = 5``.

Example::

    mode = ablate
    seed = 0
    [sim]
    sigma_mm = 0.5
    [solver]
    lam = 0.01
"""
from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .arap import SolverParams
from .errors import ConfigError
from .reconstruct import AblationFlags, ReconParams

MODES = ("sim-gen", "register", "reconstruct", "evaluate", "ablate")
OUTPUT_ENV = "CLAYRECON_OUT"
DEFAULT_OUTPUT = "clayrecon_out"
_METHODS = ("reference_cs", "mesh_wo_contact", "mesh_wo_arap", "mesh_full")


def _scalar(s: str):
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] == '"':
        return s[1:-1]
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def _parse_value(raw: str):
    s = raw.strip()
    fields = next(csv.reader([s], skipinitialspace=True)) if s else []
    if len(fields) > 1:
        return [_scalar(f) for f in fields if f.strip()]
    return _scalar(s)


_LINE = re.compile(r"^([A-Za-z_][\w.\-]*)\s*=\s*(.*)$")
_SECTION = re.compile(r"^\[([A-Za-z_][\w.\-]*)\]$")


def parse_kv(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse key-value text into a flat ``{dotted.key: value}`` dict."""
    out: dict[str, Any] = {}
    prefix = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        m = _SECTION.match(s)
        if m:
            prefix = m.group(1) + "."
            continue
        m = _LINE.match(s)
        if m is None:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {s!r}")
        value = m.group(2)
        if not value.lstrip().startswith('"'):
            value = value.split("#", 1)[0]
        key = prefix + m.group(1)
        if key in out:
            raise ConfigError(f"{source}:{lineno}: {key}: given twice")
        out[key] = _parse_value(value)
    return out


# --------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class _Key:
    kind: type
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    length: bool = False  # meters; accepts a _mm twin


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


_r, _s, _f = ReconParams(), SolverParams(), AblationFlags()

SCHEMA: dict[str, _Key] = {
    "mode": _Key(str, "ablate", lambda v: v in MODES, "one of " + ", ".join(MODES)),
    "output": _Key(str, ""),
    "scene": _Key(str, ""),
    "trajectory": _Key(str, ""),
    "mesh": _Key(str, ""),
    "seed": _Key(int, 0, _nonneg, ">= 0"),
    "jobs": _Key(int, 1, lambda v: v >= 1, ">= 1"),
    "sim.goal": _Key(str, "wide", lambda v: v in ("wide", "tall"), "wide or tall"),
    "sim.mass_g": _Key(float, 300.0, _pos, "> 0"),
    "sim.sigma": _Key(float, 5e-4, lambda v: 0 <= v <= 0.01, "in [0, 10] mm", True),
    "sim.n_angles": _Key(int, 64, lambda v: v >= 3, ">= 3"),
    "sim.n_frames": _Key(int, 150, lambda v: v >= 1, ">= 1"),
    "sim.frame_hz": _Key(float, 25.0, _pos, "> 0"),
    "sim.spin_hz": _Key(float, 3.0, _pos, "> 0"),
    "sim.full_frames": _Key(str, "all", lambda v: v in ("all", "last"), "all or last"),
    "recon.t_thresh": _Key(float, _r.t_thresh, lambda v: 0 < v <= 0.05, "in (0, 50] mm", True),
    "recon.fit_radius": _Key(float, _r.fit_radius, lambda v: 0 < v <= 0.05, "in (0, 50] mm", True),
    "recon.contact_margin": _Key(float, _r.contact_margin, lambda v: 0 <= v <= 0.01, "in [0, 10] mm", True),
    "recon.base_band": _Key(float, _r.base_band, lambda v: 0 <= v <= 0.02, "in [0, 20] mm", True),
    "recon.spacing": _Key(float, _r.spacing, lambda v: 5e-4 <= v <= 0.05, "in [0.5, 50] mm", True),
    "recon.clearance": _Key(float, _r.clearance, lambda v: 0 <= v < 1, "in [0, 1)"),
    "recon.hull_tolerance": _Key(float, _r.hull_tolerance, lambda v: 0 <= v <= 0.01, "in [0, 10] mm", True),
    "recon.recontact_rounds": _Key(int, _r.recontact_rounds, _nonneg, ">= 0"),
    "recon.mirror_contact": _Key(bool, _r.mirror_contact),
    "recon.mirror_observations": _Key(bool, _r.mirror_observations),
    "solver.lam": _Key(float, _s.lam, _nonneg, ">= 0"),
    "solver.max_iters": _Key(int, _s.max_iters, lambda v: 1 <= v <= 100000, "in [1, 100000]"),
    "solver.energy_tol": _Key(float, _s.energy_tol, lambda v: 0 < v < 1, "in (0, 1)"),
    "flags.use_contact": _Key(bool, _f.use_contact),
    "flags.use_arap": _Key(bool, _f.use_arap),
    "ablate.n_scenes": _Key(int, 20, lambda v: v >= 1, ">= 1"),
    "ablate.methods": _Key(list, list(_METHODS), lambda v: len(v) > 0 and all(m in _METHODS for m in v),
                           "non-empty subset of " + ", ".join(_METHODS)),
    "assert.ordering": _Key(bool, False),
    "assert.min_fraction": _Key(float, 0.9, lambda v: 0 <= v <= 1, "in [0, 1]"),
    "kinematics.links": _Key(list, [], lambda v: all(x > 0 for x in v), "positive lengths", True),
    "kinematics.base": _Key(list, [0.0, 0.0], lambda v: len(v) == 2, "two coordinates", True),
    "kinematics.tool_angle": _Key(float, 0.0),
    # echoed by run manifests; informational only
    "clayrecon.version": _Key(str, ""),
}


def _coerce(key: str, spec: _Key, value):
    try:
        if spec.kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if spec.kind is int:
            if isinstance(value, bool) or not float(value).is_integer():
                raise TypeError
            return int(value)
        if spec.kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if spec.kind is list:
            if value == "":
                return []
            items = value if isinstance(value, list) else [value]
            if key.startswith("kinematics."):
                return [float(x) for x in items]
            return [str(x) for x in items]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {spec.kind.__name__}, got {value!r}") from None


def _scale(value, factor):
    if isinstance(value, list):
        return [_scale(v, factor) for v in value]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value * factor
    return value


def resolve(raw: dict[str, Any]) -> dict[str, Any]:
    """Validate raw keys and return every schema key with its value in meters.

    Raises
    ------
    ConfigError
        Unknown key, wrong type, a value out of range, or a length given
        both in meters and millimeters. The message starts with the key.
    """
    out = {k: s.default for k, s in SCHEMA.items()}
    seen: dict[str, str] = {}
    for key, value in raw.items():
        canon, factor = key, 1.0
        if key.endswith("_mm") and key[:-3] in SCHEMA and SCHEMA[key[:-3]].length:
            canon, factor = key[:-3], 1e-3
        spec = SCHEMA.get(canon)
        if spec is None:
            raise ConfigError(f"{key}: unknown configuration key")
        if canon in seen:
            raise ConfigError(f"{key}: conflicts with {seen[canon]}")
        seen[canon] = key
        v = _coerce(key, spec, value)
        if factor != 1.0:
            v = _scale(v, factor)
        if spec.check is not None and not spec.check(v):
            raise ConfigError(f"{key}: must be {spec.rule} (got {value!r})")
        out[canon] = v
    if not out["output"]:
        out["output"] = os.environ.get(OUTPUT_ENV, "") or DEFAULT_OUTPUT
    return out


# --------------------------------------------------------------------------
# Typed view


@dataclass(frozen=True)
class SimSettings:
    goal: str = "wide"
    mass_g: float = 300.0
    sigma: float = 5e-4
    n_angles: int = 64
    n_frames: int = 150
    frame_hz: float = 25.0
    spin_hz: float = 3.0
    full_frames: str = "all"


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved configuration of one run (all lengths in meters)."""

    mode: str
    output: Path
    scene: Path | None = None
    trajectory: Path | None = None
    mesh: Path | None = None
    seed: int = 0
    jobs: int = 1
    sim: SimSettings = field(default_factory=SimSettings)
    recon: ReconParams = field(default_factory=ReconParams)
    flags: AblationFlags = field(default_factory=AblationFlags)
    n_scenes: int = 20
    methods: tuple[str, ...] = _METHODS
    assert_ordering: bool = False
    min_fraction: float = 0.9
    kinematics: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_values(cls, v: dict[str, Any]) -> "PipelineConfig":
        def sec(prefix):
            return {k[len(prefix):]: val for k, val in v.items() if k.startswith(prefix)}

        def path(key):
            return Path(v[key]) if v[key] else None

        solver = SolverParams(**sec("solver."))
        recon = ReconParams(solver=solver, **sec("recon."))
        cfg = cls(
            mode=v["mode"], output=Path(v["output"]), scene=path("scene"), trajectory=path("trajectory"),
            mesh=path("mesh"), seed=v["seed"], jobs=v["jobs"], sim=SimSettings(**sec("sim.")), recon=recon,
            flags=AblationFlags(**sec("flags.")), n_scenes=v["ablate.n_scenes"],
            methods=tuple(v["ablate.methods"]), assert_ordering=v["assert.ordering"],
            min_fraction=v["assert.min_fraction"], kinematics=sec("kinematics."), values=dict(v),
        )
        cfg.check_paths()
        return cfg

    def check_paths(self) -> None:
        needs_scene = self.mode in ("register", "reconstruct", "evaluate")
        if needs_scene and self.scene is None:
            raise ConfigError(f"scene: required for mode {self.mode}")
        for key in ("scene", "trajectory", "mesh"):
            p = getattr(self, key)
            if p is not None and not p.exists():
                raise ConfigError(f"{key}: {p} does not exist")
        if self.trajectory is not None and self.mode != "reconstruct":
            raise ConfigError(f"trajectory: only used by mode reconstruct, not {self.mode}")
        if self.assert_ordering and self.mode != "ablate":
            raise ConfigError("assert.ordering: only meaningful for mode ablate")


def load_config(path=None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Read ``path`` (optional), apply ``overrides`` and validate."""
    raw: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {p}: {exc.strerror}") from exc
        raw = parse_kv(text, source=str(p))
    for key, value in (overrides or {}).items():
        # an override replaces the key in either unit
        for twin in (key, key + "_mm", key[:-3] if key.endswith("_mm") else None):
            if twin is not None:
                raw.pop(twin, None)
        raw[key] = value
    return PipelineConfig.from_values(resolve(raw))
