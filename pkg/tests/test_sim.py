import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clayrecon.errors import DegenerateInput, ToolSwallowsClay
from clayrecon.geometry import ConvexPolygon2D
from clayrecon.sim import (
    DENSITY,
    GOALS,
    ClayProfile,
    MarkerRig,
    Rates,
    default_tool,
    deform_step,
    generate_initial_clay,
    render_partial,
    revolve,
    script_trajectory,
    simulate_scene,
)


def test_initial_cylinder_300g():
    clay = generate_initial_clay(300.0)
    r = (0.3 / DENSITY / math.pi) ** (1 / 3)
    # 157.89 cm^3 with h = r gives r = 36.90 mm (36.88 is a rounding)
    assert r == pytest.approx(0.03688, abs=3e-5)
    assert clay.outer_diameter == pytest.approx(2 * r, rel=1e-12)
    assert clay.height == pytest.approx(r, rel=1e-12)
    assert clay.volume == pytest.approx(clay.target_volume, rel=1e-12)
    assert clay.area == pytest.approx(r * r, rel=1e-12)
    tall = generate_initial_clay(300.0, aspect=2.0)
    assert tall.height == pytest.approx(2 * tall.outer_diameter / 2)
    with pytest.raises(ValueError):
        generate_initial_clay(0.0)


def test_profile_validation():
    with pytest.raises(DegenerateInput):
        ClayProfile(np.array([[0.0, 0.0]]), 0.3)
    with pytest.raises(DegenerateInput):
        ClayProfile(np.array([[-0.01, 0.0], [0.01, 0.0]]), 0.3)


def test_cross_section_is_mirrored():
    clay = generate_initial_clay(300.0)
    cs = clay.cross_section()
    assert np.allclose(np.sort(cs[:, 0]), np.sort(-cs[:, 0]))


def test_deform_without_contact_is_identity():
    clay = generate_initial_clay(300.0)
    far = default_tool().transformed(0.0, 0.5, 0.5)
    assert deform_step(clay, far) is clay


def test_flat_press_conserves_volume():
    clay = generate_initial_clay(300.0)
    r, h = clay.outer_diameter / 2, clay.height
    # the tool lying flat over the axis, 5 mm into the top
    tool = default_tool().transformed(math.pi / 2, 0.0, h + 0.005 - 0.005)
    out = deform_step(clay, tool)
    axis = out.points[out.points[:, 0] < 0.015]
    assert axis[:, 1].max() <= h - 0.005 + 1e-9
    assert out.volume == pytest.approx(clay.target_volume, rel=0.02)
    assert out.outer_diameter >= 2 * r - 1e-9
    area = deform_step(clay, tool, conserve="area")
    assert area.area == pytest.approx(clay.area, rel=0.02)
    with pytest.raises(ValueError):
        deform_step(clay, tool, conserve="mass")


def test_push_moves_clay_with_tool():
    clay = generate_initial_clay(300.0)
    r = clay.outer_diameter / 2
    # the tool slides up the outer wall, 1 mm into it
    tool = default_tool().transformed(0.0, r + 0.004, 0.025)
    out = deform_step(clay, tool, motion=(0.0, 0.002))
    assert out.volume == pytest.approx(clay.target_volume, rel=0.02)
    assert out.height > clay.height


@given(st.floats(-0.5, 0.5), st.floats(2e-4, 3e-3), st.booleans(), st.floats(0, 1),
       st.one_of(st.none(), st.tuples(st.floats(-4e-3, 4e-3), st.floats(-4e-3, 4e-3))))
def test_deform_conserves_volume(tilt, depth, on_top, where, motion):
    clay = generate_initial_clay(300.0)
    r, h = clay.outer_diameter / 2, clay.height
    if on_top:
        pose = (tilt + math.pi / 2, where * r, h + 0.005 - depth)
    else:
        pose = (tilt, r + 0.005 - depth, 0.005 + where * (h - 0.005))
    out = deform_step(clay, default_tool().transformed(*pose), motion=motion)
    assert out.volume == pytest.approx(clay.target_volume, rel=0.02)


def test_tool_swallows_clay():
    clay = generate_initial_clay(300.0)
    huge = ConvexPolygon2D.from_vertices([[-1, -1], [1, -1], [1, 1], [-1, 1]])
    with pytest.raises(ToolSwallowsClay):
        deform_step(clay, huge)


def test_revolve_count_and_exactness():
    clay = generate_initial_clay(300.0)
    cloud = revolve(clay, 16)
    n = len(clay.points)
    assert cloud.shape == (16 * n, 3)
    r = np.hypot(cloud[:, 0], cloud[:, 1])
    assert np.allclose(r, np.tile(clay.points[:, 0], 16), atol=1e-15)
    assert np.allclose(cloud[:, 2], np.tile(clay.points[:, 1], 16))
    # angle-major: the second block sits a sixteenth of a turn later
    block = cloud[n:2 * n][clay.points[:, 0] > 1e-6]
    assert np.allclose(np.arctan2(block[:, 1], block[:, 0]), 2 * np.pi / 16)
    noisy = revolve(clay, 16, sigma=5e-4, seed=3)
    assert np.std(noisy - cloud) == pytest.approx(5e-4, rel=0.05)
    assert np.array_equal(noisy, revolve(clay, 16, sigma=5e-4, seed=3))
    with pytest.raises(ValueError):
        revolve(clay, 2)


def test_render_partial_visibility_and_tool():
    pts = np.array([[0.05, 0.0, 0.01], [0.06, 0.0, 0.02], [0.07, 0.0, 0.03]])
    up = np.tile([0.0, 0.0, 1.0], (3, 1))
    cams = (np.array([0.0, 0.0, 1.0]),)
    assert len(render_partial(pts, None, cams, up)) == 3
    assert len(render_partial(pts, None, cams, -up)) == 0
    tool = ConvexPolygon2D.from_vertices([[0.055, 0.0], [0.065, 0.0], [0.065, 0.05], [0.055, 0.05]])
    seen = render_partial(pts, tool, cams, up)
    assert np.array_equal(seen, pts[[0, 2]])


def test_trajectory_shape_and_endpoints():
    short = script_trajectory("wide", 2, calibrate=False)
    long = script_trajectory("wide", 40, calibrate=False)
    assert short.shape == (2, 3) and long.shape == (40, 3)
    # both phases end on their endpoint whatever the frame count
    assert np.allclose(short[-1], long[-1])
    assert np.any(np.all(np.isclose(long, short[0]), axis=1))
    with pytest.raises(ValueError):
        script_trajectory("wide", 1)
    with pytest.raises(ValueError):
        script_trajectory("vase", 10)


@pytest.mark.parametrize("goal", sorted(GOALS))
def test_goal_shape_reached(goal):
    scene = simulate_scene(goal, 300.0, 0)
    final = scene.profiles[-1]
    od, h = GOALS[goal]
    assert final.outer_diameter == pytest.approx(od, abs=3e-3)
    assert final.height == pytest.approx(h, abs=3e-3)
    assert final.volume == pytest.approx(final.target_volume, rel=0.02)


def test_scene_rates_and_preroll(small_scene):
    s = small_scene
    assert s.n_preroll == math.ceil(25 / 3) + 1
    assert s.n_frames == 40 + s.n_preroll
    assert np.allclose(np.diff(s.timestamps), 1 / 25)
    assert np.allclose(np.diff(s.wheel_angles), 2 * np.pi * 3 / 25)
    assert len(s.partial_clouds) == len(s.markers) == s.n_frames
    # the clay is untouched while the tool is parked
    assert all(np.array_equal(p.points, s.profiles[0].points) for p in s.profiles[:s.n_preroll])


def test_scene_markers_occluded_near_tool():
    s = simulate_scene("tall", 250.0, 1, n_frames=10, markers=MarkerRig(occlusion=math.radians(20)))
    for o, a in zip(s.markers, s.wheel_angles):
        hidden = abs(math.remainder(a, 2 * math.pi)) <= math.radians(20)
        assert (o.marker_a is None) == hidden
        assert o.marker_a is not None or o.marker_b is not None


def test_scene_determinism():
    a = simulate_scene("wide", 250.0, 4, n_frames=20)
    b = simulate_scene("wide", 250.0, 4, n_frames=20)
    c = simulate_scene("wide", 250.0, 5, n_frames=20)
    assert all(np.array_equal(x, y) for x, y in zip(a.partial_clouds, b.partial_clouds))
    assert np.array_equal(a.full_cloud(-1), b.full_cloud(-1))
    assert not np.array_equal(a.full_cloud(-1), c.full_cloud(-1))
    assert a.name == "wide_250g_s4"


def test_full_cloud_matches_partial_views(small_scene):
    # every partial point is a point of the same frame's full cloud
    i = small_scene.n_frames - 1
    full = {tuple(p) for p in small_scene.full_cloud(i)}
    assert all(tuple(p) in full for p in small_scene.partial_clouds[i])


def test_scene_argument_checks():
    with pytest.raises(ValueError):
        simulate_scene("wide", -1.0, 0)
    with pytest.raises(ValueError):
        simulate_scene("wide", 300.0, -1)
    assert Rates().frame_hz == 25.0 and Rates().spin_hz == 3.0
