import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clayrecon.errors import DegenerateInput, InsufficientRotation, TrackingGap
from clayrecon.metrics import ucd
from clayrecon.registration import (
    MarkerObservation,
    OrientationTrack,
    merge_revolution,
    reference_vector,
    rotate_z,
    signed_angle,
    track_angles,
)

angles = st.floats(-math.pi, math.pi, allow_nan=False)


def test_reference_vector_examples():
    assert np.allclose(reference_vector((0.10, 0.0)), (1.0, 0.0))
    assert np.allclose(reference_vector((0.03, 0.04)), (0.6, 0.8))
    with pytest.raises(DegenerateInput):
        reference_vector((0.2, 0.3), (0.2, 0.3))


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_reference_vector_unit(x, y):
    if math.hypot(x, y) <= 1e-6:
        return
    assert abs(np.linalg.norm(reference_vector((x, y))) - 1.0) < 1e-12


def test_rotation_angle_examples():
    track = OrientationTrack()
    assert track.rotation_angle((1.0, 0.0), np.array([1.0, 0.0])) == 0.0
    assert track.rotation_angle((0.0, 1.0), np.array([1.0, 0.0])) == pytest.approx(math.pi / 2)


@given(angles, angles, angles)
def test_rotation_angle_equivariant_and_arccos(a0, at, shift):
    r0 = np.array([math.cos(a0), math.sin(a0)])
    rt = np.array([math.cos(at), math.sin(at)])
    theta = OrientationTrack().rotation_angle(rt, r0)
    assert -math.pi - 1e-12 <= theta <= math.pi + 1e-12
    assert abs(abs(theta) - math.acos(np.clip(r0 @ rt, -1, 1))) < 1e-6
    c, s = math.cos(shift), math.sin(shift)
    rot = np.array([[c, -s], [s, c]])
    theta2 = OrientationTrack().rotation_angle(rot @ rt, rot @ r0)
    assert abs(math.remainder(theta - theta2, 2 * math.pi)) < 1e-9


def test_rotation_angle_requires_unit():
    with pytest.raises(ValueError):
        OrientationTrack().rotation_angle((2.0, 0.0), np.array([1.0, 0.0]))


def spin_stream(n=60, rate=2 * math.pi * 3, hz=25.0, radius=0.15, occlude=None):
    obs = []
    for i in range(n):
        t = i / hz
        a = rate * t
        pa = radius * np.array([math.cos(a), math.sin(a)])
        pb = -pa
        if occlude is not None and occlude(i):
            pa = None
        obs.append(MarkerObservation(t, pa, pb))
    return obs


def test_unwrap_matches_accumulated_increments():
    obs = spin_stream()
    got = track_angles(obs)
    # oracle: accumulate the principal-value increments between frames
    raw = [math.atan2(o.marker_a[1], o.marker_a[0]) for o in obs]
    acc = [0.0]
    for a, b in zip(raw, raw[1:]):
        acc.append(acc[-1] + math.remainder(b - a, 2 * math.pi))
    assert np.allclose(got, acc, atol=1e-12)
    # crossing 180 degrees stays continuous
    k = np.flatnonzero((np.array(acc) > 2.9) & (np.array(acc) < 3.5))
    assert len(k) and np.all(np.diff(got) > 0)


def test_unwrap_affine_noise_free():
    obs = spin_stream(200)
    got = track_angles(obs)
    t = np.array([o.timestamp for o in obs])
    fit = np.polyfit(t, got, 1)
    assert np.abs(np.polyval(fit, t) - got).max() < 1e-6


def test_marker_b_fallback_while_a_hidden():
    obs = spin_stream(50, occlude=lambda i: 10 <= i < 20)
    got = track_angles(obs)
    want = 2 * math.pi * 3 * np.arange(50) / 25.0
    assert np.allclose(got, want, atol=1e-9)


def test_marker_a_first_seen_late():
    obs = spin_stream(30, occlude=lambda i: i < 5)
    got = track_angles(obs)
    want = 2 * math.pi * 3 * np.arange(30) / 25.0
    assert np.allclose(got, want, atol=1e-9)


def test_both_markers_hidden_is_invalid():
    with pytest.raises(DegenerateInput):
        MarkerObservation(0.0, None, None)


def test_tracking_gap():
    obs = spin_stream(10)
    track = OrientationTrack()
    for o in obs[:5]:
        track.update(o)
    late = obs[9]
    with pytest.raises(TrackingGap):
        track.update(MarkerObservation(late.timestamp + 0.2, late.marker_a, late.marker_b))


def test_timestamps_must_increase():
    obs = spin_stream(3)
    track = OrientationTrack()
    track.update(obs[1])
    with pytest.raises(ValueError):
        track.update(obs[0])


# ---------------------------------------------------------------- merging


def cylinder(n_ang=90, n_z=12, r=0.04, h=0.05):
    a = 2 * np.pi * np.arange(n_ang) / n_ang
    z = np.linspace(0, h, n_z)
    A, Z = np.meshgrid(a, z)
    return np.column_stack([r * np.cos(A.ravel()), r * np.sin(A.ravel()), Z.ravel()])


def test_merge_two_half_views_cover_cylinder():
    full = cylinder()
    half = full[full[:, 0] >= 0]  # the camera sees x >= 0
    # half a turn later the same camera sees what was the other side
    frames = [(half, 0.0), (half, math.pi), (half, 2 * math.pi)]
    merged = merge_revolution(frames)
    assert len(merged) == 1024
    assert ucd(merged, cylinder(720, 60)) < 1e-3
    sector = np.floor(np.mod(np.arctan2(merged[:, 1], merged[:, 0]), 2 * np.pi) / (np.pi / 6)).astype(int)
    assert set(sector) == set(range(12))


def test_merge_cardinality_and_drop_past_turn(rng):
    frames = [(rng.standard_normal((200, 3)), k * 0.7) for k in range(12)]
    merged = merge_revolution(frames)
    assert merged.shape == (1024, 3)
    # frames at or beyond one full turn from the first are not used
    kept = np.concatenate([rotate_z(c, -t) for c, t in frames if t < 2 * math.pi])
    assert all(np.any(np.all(kept == p, axis=1)) for p in merged[:50])


def test_merge_insufficient_rotation(rng):
    c = rng.standard_normal((2000, 3))
    with pytest.raises(InsufficientRotation):
        merge_revolution([(c, 0.0)])
    with pytest.raises(InsufficientRotation):
        merge_revolution([(c, 0.0), (c, 3.0), (c, 6.0)])


def test_merge_too_few_points(rng):
    frames = [(rng.standard_normal((10, 3)), k * 1.0) for k in range(8)]
    with pytest.raises(DegenerateInput):
        merge_revolution(frames)


def test_merge_invariant_to_start_frame():
    full = cylinder(128, 8)
    step = 2 * math.pi / 9
    frames = []
    for k in range(11):
        view = rotate_z(full, k * step)
        frames.append((view[view[:, 0] > 0], k * step))
    n = sum(len(c) for c, _ in frames[:9])  # everything inside one turn: no downsampling
    a = merge_revolution(frames, n_points=n)
    shifted = [(c, t - step) for c, t in frames[1:]]
    b = rotate_z(merge_revolution(shifted, n_points=n), -step)
    key = lambda p: p[np.lexsort(np.round(p, 9).T[::-1])]  # noqa: E731
    assert np.allclose(key(a), key(b), atol=1e-12)


def test_signed_angle_sign():
    assert signed_angle((1, 0), (0, 1)) > 0
    assert signed_angle((1, 0), (0, -1)) < 0
