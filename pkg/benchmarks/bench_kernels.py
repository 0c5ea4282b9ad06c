"""Compiled kernels vs the NumPy fallback.

Times every kernel on a mesh of about 1,500 vertices (and farthest-point
sampling on a 20k-point cloud), checks that both backends agree, and then
times a whole ARAP solve with each backend swapped in.

    python benchmarks/bench_kernels.py [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from clayrecon import kernels
from clayrecon.arap import ConstraintSet, SolverParams, arap_solve
from clayrecon.geometry import augment_interior_points, compute_weights, convex_hull_2d, delaunay_triangulate

NAMES = ("fps_indices", "cell_covariance", "rotation_sweep", "data_energy", "global_rhs")


def build_mesh(target: int = 1500):
    rng = np.random.default_rng(0)
    hull = convex_hull_2d(rng.uniform(-0.06, 0.06, (200, 2)))
    pts = augment_interior_points(hull, 0.12 / np.sqrt(target))
    return compute_weights(delaunay_triangulate(pts), clamp_negative=True)


def kernel_calls(mesh, module):
    w = mesh.weights
    rng = np.random.default_rng(1)
    cur = np.ascontiguousarray(mesh.rest + 1e-3 * rng.standard_normal(mesh.rest.shape))
    rest = np.ascontiguousarray(mesh.rest)
    m = len(mesh.edges)
    phi = 0.1 * rng.standard_normal(m)
    a, b = module.cell_covariance(cur, rest, w.cell_edge, w.cell_i, w.cell_j, w.cell_w, m)
    cloud = rng.standard_normal((20000, 3))
    coupling = 4.0 * 0.01 * w.mean_area

    def sweep():
        out = phi.copy()
        module.rotation_sweep(out, a, b, w, coupling)
        return out

    return {
        "fps_indices": lambda: module.fps_indices(cloud, 1024, 0),
        "cell_covariance": lambda: module.cell_covariance(cur, rest, w.cell_edge, w.cell_i, w.cell_j, w.cell_w, m),
        "rotation_sweep": sweep,
        "data_energy": lambda: module.data_energy(cur, rest, phi, w.cell_edge, w.cell_i, w.cell_j, w.cell_w),
        "global_rhs": lambda: module.global_rhs(rest, phi, w.cell_edge, w.cell_i, w.cell_j, w.cell_w, mesh.n_vertices),
    }


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def solve_time(mesh, module, repeat: int) -> float:
    saved = {n: getattr(kernels, n) for n in NAMES}
    for n in NAMES:
        setattr(kernels, n, getattr(module, n))
    try:
        base = np.flatnonzero(mesh.rest[:, 1] <= mesh.rest[:, 1].min() + 5e-3)
        top = np.flatnonzero(mesh.rest[:, 1] >= mesh.rest[:, 1].max() - 5e-3)
        idx = np.concatenate([base, top])
        tgt = mesh.rest[idx] + np.where(np.isin(idx, top)[:, None], [0.01, -0.005], 0.0)
        cons = ConstraintSet.of(idx, tgt, "fit")
        params = SolverParams(max_iters=30, energy_tol=1e-12)
        return best(lambda: arap_solve(mesh, cons, params), max(3, repeat // 5))
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    mesh = build_mesh()
    print(f"mesh: {mesh.n_vertices} vertices, {len(mesh.edges)} edges; backends: {', '.join(backends)}")
    calls = {name: kernel_calls(mesh, mod) for name, mod in backends.items()}
    if "compiled" in calls:
        for n in NAMES:
            x, y = calls["python"][n](), calls["compiled"][n]()
            for u, v in zip(np.atleast_1d(x) if not isinstance(x, tuple) else x,
                            np.atleast_1d(y) if not isinstance(y, tuple) else y):
                if not np.allclose(u, v, rtol=1e-10, atol=1e-12):
                    raise SystemExit(f"{n}: backends disagree")

    print(f"{'kernel':<18}" + "".join(f"{b + ' (ms)':>16}" for b in backends) + f"{'speedup':>10}")
    rows = [(n, {b: best(calls[b][n], args.repeat) for b in backends}) for n in NAMES]
    rows.append(("arap_solve x30", {b: solve_time(mesh, m, args.repeat) for b, m in backends.items()}))
    for n, t in rows:
        line = f"{n:<18}" + "".join(f"{t[b] * 1e3:>16.3f}" for b in backends)
        if "compiled" in t:
            line += f"{t['python'] / t['compiled']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
