"""Compare the compiled and pure-numpy kernel backends.

Times the three hot kernels on solver-sized arrays and one full solver step
per backend (the step is driven through EUSTAT_KERNELS in a subprocess so
the import-time selection is exercised exactly as in production).

    python3 benchmarks/bench_kernels.py [n]
"""

import os
import subprocess
import sys
import timeit

import numpy as np

from eustat import kernels


def bench_kernels(n: int):
    impls = kernels.available_backends()
    rng = np.random.default_rng(0)
    flat = rng.standard_normal(n * n)
    flat2 = rng.standard_normal(n * n)
    fields = [rng.standard_normal((n, n)) for _ in range(8)]

    cases = {
        "tree_sum": lambda mod: mod.tree_sum(flat),
        "tree_dot": lambda mod: mod.tree_dot(flat, flat2),
        "advection_products": lambda mod: mod.advection_products(*fields, 1.3),
    }
    print(f"kernel timings, n = {n} ({n * n} nodes), best of 5 x 20 calls")
    print(f"{'kernel':<22}" + "".join(f"{name:>14}" for name in impls) + f"{'speedup':>10}")
    for label, fn in cases.items():
        best = {}
        for name, mod in impls.items():
            best[name] = min(timeit.repeat(lambda: fn(mod), number=20, repeat=5)) / 20
        row = f"{label:<22}" + "".join(f"{best[name] * 1e6:>12.1f}us" for name in impls)
        if len(best) == 2:
            row += f"{best['python'] / best['cython']:>9.2f}x"
        print(row)
        outs = [fn(mod) for mod in impls.values()]
        if len(outs) == 2:
            same = outs[0] == outs[1] if np.isscalar(outs[0]) else np.array_equal(*outs)
            assert same, f"{label}: backends disagree"
    print("bitwise agreement across backends: verified")


STEP_SNIPPET = """
import timeit
import numpy as np
from eustat import kernels, radial, solver
from eustat.grid import Grid, ScalarField

n = {n}
grid = Grid(n, np.pi)
sigma = radial.build_sigma(np.pi / 4, grid)
X, Y = grid.nodes()
z = ((X + 0.5) ** 2 + Y**2) / (2 * 0.3**2)
w = np.exp(-(z**3))
state = radial.decompose(ScalarField(grid, w), sigma)
cfg = solver.SolverConfig.make(nu=1e-3, dt=2e-3, horizon_T=1.0, boundary_guard_tol=1.0)
solver.step(state, sigma, cfg)  # warm caches
t = min(timeit.repeat(lambda: solver.step(state, sigma, cfg), number=5, repeat=3)) / 5
print(f"{{kernels.backend}}: {{t * 1e3:.2f}} ms/step")
"""


def bench_step(n: int):
    print(f"\nfull solver step, n = {n}:", flush=True)
    for backend in kernels.available_backends():
        env = dict(os.environ, EUSTAT_KERNELS=backend)
        subprocess.run(
            [sys.executable, "-c", STEP_SNIPPET.format(n=n)], env=env, check=True
        )


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 256
    bench_kernels(n)
    bench_step(n)
