import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def square_grid_mesh(n: int = 4, pitch: float = 0.01):
    """``n x n`` grid of points, Delaunay-triangulated, with weights."""
    from clayrecon.geometry import compute_weights, delaunay_triangulate

    g = np.arange(n) * pitch
    pts = np.column_stack([np.repeat(g, n), np.tile(g, n)])
    return compute_weights(delaunay_triangulate(pts))


def random_mesh(rng, n: int = 15, scale: float = 0.03):
    from clayrecon.geometry import compute_weights, delaunay_triangulate

    while True:
        pts = rng.uniform(0.0, scale, (n, 2))
        mesh = delaunay_triangulate(pts)
        if mesh.triangle_areas().min() > 1e-8:
            return compute_weights(mesh)


@pytest.fixture(scope="session")
def small_scene():
    """A short wide-bowl scene shared by the slower tests."""
    from clayrecon.sim import simulate_scene

    return simulate_scene("wide", 300.0, 7, n_frames=40)
