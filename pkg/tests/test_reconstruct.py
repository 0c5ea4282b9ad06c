import math

import numpy as np
import pytest

from clayrecon.errors import DegenerateInput, NoKinematicAdapter
from clayrecon.geometry import ConvexPolygon2D, point_in_polygon
from clayrecon.reconstruct import (
    AblationFlags,
    PlanarChain,
    ReconParams,
    ReconstructionState,
    TrajectoryFrame,
    compute_finger_points,
    cross_section,
    displace_contact_vertices,
    initialize_mesh,
    move_vertices_to_fit,
    preprocess_frame,
    run_trajectory,
    step,
    wheel_attachment_constraints,
)

from .conftest import square_grid_mesh

SQUARE = ConvexPolygon2D.from_vertices([[-0.005, -0.005], [0.005, -0.005], [0.005, 0.005], [-0.005, 0.005]])


def cylinder_cloud(r=0.04, h=0.05, n_ang=120, n_z=26, n_r=10):
    a = 2 * np.pi * np.arange(n_ang) / n_ang
    side = [(r * math.cos(t), r * math.sin(t), z) for t in a for z in np.linspace(0, h, n_z)]
    caps = [(s * math.cos(t), s * math.sin(t), z) for t in a for s in np.linspace(0, r, n_r) for z in (0.0, h)]
    return np.array(side + caps)


def grid_state(n=5, pitch=0.01, **kw):
    return ReconstructionState(square_grid_mesh(n, pitch), ReconParams(**kw))


# ------------------------------------------------------------ initialization


def test_cylinder_section_is_rectangle():
    state = initialize_mesh(cylinder_cloud())
    p = state.mesh.rest
    assert p[:, 0].min() == pytest.approx(-0.04, abs=1e-4)
    assert p[:, 0].max() == pytest.approx(0.04, abs=1e-4)
    assert p[:, 1].min() == pytest.approx(0.0, abs=1e-9)
    assert p[:, 1].max() == pytest.approx(0.05, abs=1e-9)
    areas = state.mesh.triangle_areas()
    assert areas.sum() == pytest.approx(0.08 * 0.05, rel=1e-3)
    assert areas.min() > 0
    assert np.array_equal(state.mesh.rest, state.mesh.current)


def test_initialize_needs_section_points():
    far = np.column_stack([np.zeros(50), np.full(50, 0.2), np.linspace(0, 1, 50)])
    with pytest.raises(DegenerateInput):
        initialize_mesh(far)
    line = np.column_stack([np.linspace(0, 1, 50), np.zeros(50), np.zeros(50)])
    with pytest.raises(DegenerateInput):
        initialize_mesh(line)


def test_cross_section_slab():
    p = np.array([[0.1, 0.004, 0.2], [0.3, -0.0049, 0.4], [0.5, 0.005, 0.6], [0.7, -0.01, 0.8]])
    assert np.array_equal(cross_section(p, 0.005), [[0.1, 0.2], [0.3, 0.4]])


# ------------------------------------------------------------ kinematics


def test_finger_points_pose():
    ident = compute_finger_points(TrajectoryFrame(0.0, np.zeros((0, 3)), (0.0, 0.0, 0.0)), SQUARE)
    assert np.allclose(ident.vertices, SQUARE.vertices)
    moved = compute_finger_points(TrajectoryFrame(0.0, np.zeros((0, 3)), (0.0, 0.1, 0.2)), SQUARE)
    assert np.allclose(moved.vertices, SQUARE.vertices + [0.1, 0.2])
    turned = compute_finger_points(TrajectoryFrame(0.0, np.zeros((0, 3)), (math.pi / 2, 0.0, 0.0)), SQUARE)
    assert np.allclose(turned.normals, SQUARE.normals @ np.array([[0, 1], [-1, 0]]))


def test_two_link_forward_kinematics():
    chain = PlanarChain([0.3, 0.25])
    q = np.radians([30.0, -45.0])
    theta, x, z = chain(q)
    assert theta == pytest.approx(math.radians(-15))
    assert x == pytest.approx(0.3 * math.cos(math.radians(30)) + 0.25 * math.cos(math.radians(-15)))
    assert z == pytest.approx(0.3 * math.sin(math.radians(30)) + 0.25 * math.sin(math.radians(-15)))
    frame = TrajectoryFrame(0.0, np.zeros((0, 3)), joint_vector=q)
    tool = compute_finger_points(frame, SQUARE, chain)
    assert np.allclose(tool.vertices, SQUARE.transformed(theta, x, z).vertices)
    with pytest.raises(NoKinematicAdapter):
        compute_finger_points(frame, SQUARE)


def test_frame_needs_exactly_one_pose():
    with pytest.raises(ValueError):
        TrajectoryFrame(0.0, np.zeros((0, 3)))
    with pytest.raises(ValueError):
        TrajectoryFrame(0.0, np.zeros((0, 3)), (0, 0, 0), np.zeros(2))


# ------------------------------------------------------------ per-frame pieces


def test_preprocess_matches_brute_force(rng):
    cloud = rng.uniform(-0.02, 0.02, (3000, 3))
    tool = SQUARE.transformed(0.3, 0.004, 0.0)
    got = preprocess_frame(cloud, tool, 0.005)
    want = [(x, z) for x, y, z in cloud if abs(y) < 0.005 and not point_in_polygon((x, z), tool)]
    assert np.array_equal(got, np.array(want).reshape(-1, 2))
    assert np.array_equal(preprocess_frame(cloud, None, 0.005), cross_section(cloud, 0.005))


def test_fit_pins_boundary_vertices_to_nearest_point():
    state = grid_state(fit_radius=0.004)
    bv = state.mesh.boundary_vertices
    interior = np.setdiff1d(np.arange(25), bv)
    obs = np.array([state.mesh.rest[bv[0]] + [0.001, 0.0], state.mesh.rest[interior[0]] + [0.0005, 0.0]])
    c = move_vertices_to_fit(state, obs)
    assert c.indices.tolist() == [bv[0]] and c.tags.tolist() == ["fit"]
    assert np.allclose(c.targets, obs[:1])
    assert len(move_vertices_to_fit(state, np.zeros((0, 2)))) == 0
    assert len(move_vertices_to_fit(state, [[1.0, 1.0]])) == 0


def test_fit_shared_point_goes_to_closest_vertex():
    state = grid_state(fit_radius=0.009)
    # between corner (0,0) and its neighbour (0.01,0), nearer the neighbour
    c = move_vertices_to_fit(state, [[0.006, 0.0]])
    assert len(c) == 1
    assert np.allclose(state.mesh.rest[c.indices[0]], [0.01, 0.0])


def test_contact_pushes_out_with_margin():
    state = grid_state(contact_margin=0.0002, mirror_contact=False)
    v = 12  # grid vertex at (0.02, 0.02)
    # tool whose top facet sits 2 mm above the vertex
    tool = SQUARE.transformed(0.0, 0.02, 0.017)
    c = displace_contact_vertices(state, tool)
    assert c.indices.tolist() == [v]
    assert np.allclose(c.targets[0], [0.02, 0.0222])
    assert np.linalg.norm(c.targets[0] - state.mesh.current[v]) == pytest.approx(0.0022)


def test_vertex_on_tool_boundary_is_left_alone():
    state = grid_state()
    tool = SQUARE.transformed(0.0, 0.02, 0.015)  # top facet exactly through (0.02, 0.02)
    assert len(displace_contact_vertices(state, tool)) == 0


def test_wheel_band():
    state = grid_state(base_band=0.001)
    c = wheel_attachment_constraints(state)
    assert len(c) == 5 and set(c.tags) == {"wheel"}
    assert np.allclose(c.targets[:, 1], 0.0)
    assert len(wheel_attachment_constraints(grid_state(base_band=0.011))) == 10


# ------------------------------------------------------------ step


def _frame(pose, cloud=None):
    return TrajectoryFrame(0.0, np.zeros((0, 3)) if cloud is None else cloud, pose)


def test_step_leaves_no_vertex_inside_tool():
    state = initialize_mesh(cylinder_cloud())
    tool = ConvexPolygon2D.from_vertices([[-0.005, 0.0], [0.005, 0.0], [0.005, 0.12], [-0.005, 0.12]])
    pose = (0.0, 0.036, 0.02)
    new = step(state, _frame(pose), tool)
    placed = tool.transformed(*pose)
    for t in (placed, placed.mirrored_x()):
        assert np.all(t.signed_distances(new.mesh.current).max(axis=1) >= -1e-9)
    assert new.frame_index == 1
    # the wheel band did not move
    band = wheel_attachment_constraints(state).indices
    assert np.array_equal(new.mesh.current[band], state.mesh.rest[band])


def test_step_without_evidence_is_a_fixed_point():
    state = initialize_mesh(cylinder_cloud())
    far = (0.0, 1.0, 1.0)
    new = step(state, _frame(far), SQUARE)
    assert np.allclose(new.mesh.current, state.mesh.current, atol=1e-12)
    # an observation of the current shape changes nothing either
    b = state.mesh.current[state.mesh.boundary_vertices]
    seen = np.column_stack([b[:, 0], np.zeros(len(b)), b[:, 1]])
    new = step(state, _frame(far, seen), SQUARE)
    assert np.allclose(new.mesh.current, state.mesh.current, atol=1e-9)


def test_flags_change_behaviour():
    cloud = cylinder_cloud()
    tool = ConvexPolygon2D.from_vertices([[-0.005, 0.0], [0.005, 0.0], [0.005, 0.12], [-0.005, 0.12]])
    frame = _frame((0.0, 0.036, 0.02))
    no_contact = step(initialize_mesh(cloud, flags=AblationFlags(use_contact=False)), frame, tool)
    assert np.allclose(no_contact.mesh.current, no_contact.mesh.rest, atol=1e-12)
    no_arap_state = initialize_mesh(cloud, flags=AblationFlags(use_arap=False))
    no_arap = step(no_arap_state, frame, tool)
    moved = np.flatnonzero(np.any(no_arap.mesh.current != no_arap.mesh.rest, axis=1))
    placed = tool.transformed(0.0, 0.036, 0.02)
    inside = np.flatnonzero((placed.signed_distances(no_arap_state.mesh.rest).max(axis=1) < -1e-9)
                            | (placed.mirrored_x().signed_distances(no_arap_state.mesh.rest).max(axis=1) < -1e-9))
    assert len(moved) and np.array_equal(moved, inside)


def test_run_trajectory_zero_frames_and_determinism():
    cloud = cylinder_cloud()
    m0 = initialize_mesh(cloud).mesh
    out = run_trajectory(cloud, [], SQUARE)
    assert np.array_equal(out.current, m0.current) and np.array_equal(out.triangles, m0.triangles)
    tool = ConvexPolygon2D.from_vertices([[-0.005, 0.0], [0.005, 0.0], [0.005, 0.12], [-0.005, 0.12]])
    frames = [_frame((0.0, 0.04 - 0.001 * k, 0.02)) for k in range(5)]
    a = run_trajectory(cloud, frames, tool)
    b = run_trajectory(cloud, frames, tool)
    assert np.array_equal(a.current, b.current)


def test_params_validation():
    with pytest.raises(ValueError):
        ReconParams(spacing=0)
    with pytest.raises(ValueError):
        ReconParams(contact_margin=-1)
    with pytest.raises(ValueError):
        ReconParams(recontact_rounds=-1)
