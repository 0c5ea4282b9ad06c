"""Wheel angle tracking from two colored markers and one-revolution merging.

Markers sit on the wheel surface; their projection into the wheel plane,
relative to the wheel center, gives a direction vector whose rotation from
its first observation is the wheel angle. Angles are signed
(counterclockwise positive) and unwrapped into a continuous history so
that several revolutions can be told apart.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, InsufficientRotation, TrackingGap
from .geometry import as_points, farthest_point_downsample

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MERGED_POINTS = 1024


@dataclass(frozen=True)
class MarkerObservation:
    timestamp: float
    marker_a: np.ndarray | None = None
    marker_b: np.ndarray | None = None

    def __post_init__(self):
        if self.marker_a is None and self.marker_b is None:
            raise DegenerateInput(f"frame t={self.timestamp}: both markers occluded")
        for name in ("marker_a", "marker_b"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=np.float64).reshape(2))


def reference_vector(p_m, p_o=(0.0, 0.0)) -> np.ndarray:
    """Unit vector from the wheel center ``p_o`` to the marker ``p_m``."""
    d = np.asarray(p_m, dtype=np.float64).reshape(2) - np.asarray(p_o, dtype=np.float64).reshape(2)
    n = math.hypot(d[0], d[1])
    if n <= 1e-6:
        raise DegenerateInput("marker coincides with the wheel center")
    return d / n


def signed_angle(r0, rt) -> float:
    """Counterclockwise angle from ``r0`` to ``rt`` in ``(-pi, pi]``."""
    return math.atan2(r0[0] * rt[1] - r0[1] * rt[0], r0[0] * rt[0] + r0[1] * rt[1])


@dataclass
class OrientationTrack:
    """Sequential unwrapper of the wheel angle.

    Parameters
    ----------
    origin : wheel center in the marker plane.
    max_jump : largest per-frame rotation (radians) accepted when unwrapping.
        A frame whose implied jump exceeds it raises :class:`TrackingGap`.
        The implied jump is the smallest 2pi-equivalent step, or, once a spin
        rate is known, the rotation that rate predicts over the time gap,
        whichever is larger.
    """

    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))
    max_jump: float = math.pi
    r0_a: np.ndarray | None = None
    r0_b: np.ndarray | None = None
    angles: list[float] = field(default_factory=list)
    times: list[float] = field(default_factory=list)

    def _backdated(self, p, theta: float) -> np.ndarray:
        """Reference vector a marker seen now at angle ``theta`` had at angle 0."""
        r = reference_vector(p, self.origin)
        c, s = math.cos(-theta), math.sin(-theta)
        return np.array([c * r[0] - s * r[1], s * r[0] + c * r[1]])

    def rotation_angle(self, rt, reference) -> float:
        """Unwrap the raw angle of ``rt`` against the last tracked angle."""
        rt = np.asarray(rt, dtype=np.float64).reshape(2)
        if abs(math.hypot(rt[0], rt[1]) - 1.0) > 1e-6:
            raise ValueError("r_t must be a unit vector")
        raw = signed_angle(reference, rt)
        if not self.angles:
            return raw
        last = self.angles[-1]
        unwrapped = raw + TWO_PI * round((last - raw) / TWO_PI)
        jump = abs(unwrapped - last)
        if jump > self.max_jump:
            raise TrackingGap(f"per-frame rotation {jump:.3f} rad exceeds {self.max_jump:.3f}")
        return unwrapped

    def update(self, obs: MarkerObservation) -> float:
        """Consume one frame and return its unwrapped angle.

        Marker a is used whenever it is visible and referenced, marker b
        otherwise. A marker's reference vector is fixed at its first sighting,
        back-dated by the angle measured in that frame (the first frame
        defines angle 0).
        """
        if self.times and obs.timestamp <= self.times[-1]:
            raise ValueError("timestamps must be strictly increasing")
        self._check_gap(obs.timestamp)
        seen = {"a": obs.marker_a, "b": obs.marker_b}
        usable = [m for m in "ab" if seen[m] is not None and getattr(self, "r0_" + m) is not None]
        if usable:
            m = usable[0]
            theta = self.rotation_angle(reference_vector(seen[m], self.origin), getattr(self, "r0_" + m))
        else:
            # no referenced marker in view: extrapolate the spin
            theta = self.angles[-1] + self._rate() * (obs.timestamp - self.times[-1]) if self.angles else 0.0
        for m in "ab":
            if seen[m] is not None and getattr(self, "r0_" + m) is None:
                setattr(self, "r0_" + m, self._backdated(seen[m], theta))
        self.angles.append(theta)
        self.times.append(obs.timestamp)
        return theta

    def _rate(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return (self.angles[-1] - self.angles[-2]) / (self.times[-1] - self.times[-2])

    def _check_gap(self, t: float) -> None:
        if len(self.times) < 2:
            return
        rate = self._rate()
        predicted = abs(rate) * (t - self.times[-1])
        if predicted > self.max_jump:
            raise TrackingGap(
                f"gap of {t - self.times[-1]:.3f} s at {abs(rate):.2f} rad/s implies "
                f"{predicted:.3f} rad, too far to unwrap"
            )


def track_angles(observations, origin=(0.0, 0.0), max_jump: float = math.pi) -> np.ndarray:
    """Unwrapped wheel angle for every observation, starting at 0."""
    track = OrientationTrack(origin=np.asarray(origin, dtype=np.float64), max_jump=max_jump)
    return np.array([track.update(o) for o in observations])


def rotate_z(cloud, theta: float) -> np.ndarray:
    """Rotate a 3-D cloud counterclockwise by ``theta`` about the z-axis."""
    p = as_points(cloud, 3)
    c, s = math.cos(theta), math.sin(theta)
    out = np.empty_like(p)
    out[:, 0] = c * p[:, 0] - s * p[:, 1]
    out[:, 1] = s * p[:, 0] + c * p[:, 1]
    out[:, 2] = p[:, 2]
    return out


def merge_revolution(frames, n_points: int = MERGED_POINTS) -> np.ndarray:
    """Rotate partial clouds back to the start orientation and merge one turn.

    Parameters
    ----------
    frames : sequence of ``(cloud, theta)`` ordered by ``theta``.
    n_points : size of the farthest-point downsample (seed index 0).

    Frames with ``theta - theta_0 >= 2 pi`` are dropped.

    Raises
    ------
    InsufficientRotation
        The angles span less than a full revolution.
    DegenerateInput
        Fewer than ``n_points`` points survive the merge.
    """
    frames = list(frames)
    if not frames:
        raise InsufficientRotation("no frames to merge")
    thetas = np.array([float(t) for _, t in frames])
    if np.any(np.diff(thetas) < 0):
        raise ValueError("frames must be ordered by angle")
    span = thetas[-1] - thetas[0]
    if span < TWO_PI:
        raise InsufficientRotation(f"frames span {span:.3f} rad < 2 pi")
    keep = [rotate_z(c, -t) for c, t in frames if t - thetas[0] < TWO_PI]
    merged = np.concatenate(keep, axis=0)
    if len(merged) < n_points:
        raise DegenerateInput(f"only {len(merged)} points over one revolution, need {n_points}")
    logger.debug("merge_revolution: %d frames, %d points", len(keep), len(merged))
    return farthest_point_downsample(merged, n_points, seed_index=0)
