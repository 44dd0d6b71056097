"""Benchmark: compiled kernel core vs pure-NumPy fallback.

Times the two hot kernels (Bellman root + argmin sweep, frozen-control
Jacobi numerators) and a full compact solve on each backend.

Run:  python benchmarks/bench_kernels.py [m]
"""

import sys
import time

import numpy as np

from cmapde import _kernels
from cmapde._kernels import numpy_backend
from cmapde.grid import Domain, GridFunction
from cmapde.hermitian import HermitianForm, generate_direction_set
from cmapde.operator import DensityField, EquationData, compile_table, root_field
from cmapde.solvers import SolverConfig, solve_compact


def time_fn(fn, repeats=20):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    m = int(sys.argv[1]) if len(sys.argv) > 1 else 12
    d = Domain(kind="torus", n=2, shape=(m,) * 4, h=1.0 / m)
    ds = generate_direction_set(2, "axes+diagonals", 9)
    table = compile_table(d, ds)
    omega = HermitianForm.identity(2)
    omega_c = table.omega_quads(omega)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(d.num_points)

    backends = [("numpy", numpy_backend)]
    if _kernels.HAVE_EXT:
        backends.append(("compiled", _kernels._speedups))
    else:
        print("compiled backend not built; showing numpy only")

    print(
        "grid %d^4 = %d points, %d controls, %d unique directions"
        % (m, d.num_points, len(ds.controls), table.nbr_idx.shape[0])
    )
    print("%-10s %14s %14s" % ("backend", "root_argmin", "policy_sums"))
    results = {}
    for name, be in backends:
        t_root = time_fn(
            lambda be=be: be.root_argmin(
                u, table.eval_idx, table.nbr_idx, table.inv4h2, table.wdirs,
                omega_c,
            )
        )
        _, ctrl = be.root_argmin(
            u, table.eval_idx, table.nbr_idx, table.inv4h2, table.wdirs, omega_c
        )
        t_sums = time_fn(
            lambda be=be, ctrl=ctrl: be.policy_sums(
                u, table.eval_idx, table.nbr_idx, table.ws, table.dir_of, ctrl
            )
        )
        results[name] = (t_root, t_sums)
        print("%-10s %11.3f ms %11.3f ms" % (name, t_root * 1e3, t_sums * 1e3))
    if len(results) == 2:
        rn, cn = results["numpy"], results["compiled"]
        print(
            "speedup: root_argmin x%.1f, policy_sums x%.1f"
            % (rn[0] / cn[0], rn[1] / cn[1])
        )

    # end-to-end: one manufactured compact solve per backend
    x1 = (np.arange(m) / m)[:, None, None, None] * np.ones(d.shape)
    phi_star = GridFunction(d, 0.05 * np.cos(2 * np.pi * x1))
    probe = EquationData(
        epsilon=1.0, density=DensityField.constant(d, 1.0), omega=omega
    )
    root, _, _ = root_field(phi_star, probe, ds)
    dens = np.exp(-phi_star.values.ravel()) * np.maximum(root, 0.0) ** 2
    eq = EquationData(
        epsilon=1.0, density=DensityField(d, dens.reshape(d.shape)), omega=omega
    )
    import os

    for name, _ in backends:
        os.environ.pop("CMA_FORCE_NUMPY", None)
        if name == "numpy":
            os.environ["CMA_FORCE_NUMPY"] = "1"
        t0 = time.perf_counter()
        phi, rep = solve_compact(eq, SolverConfig(), A_set=ds)
        dt = time.perf_counter() - t0
        err = float(np.max(np.abs(phi.values - phi_star.values)))
        print(
            "solve_compact [%s]: %.2f s, %d outer iterations, error %.2e"
            % (name, dt, rep.iterations, err)
        )
    os.environ.pop("CMA_FORCE_NUMPY", None)


if __name__ == "__main__":
    main()
