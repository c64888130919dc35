#!/usr/bin/env python3
"""Grid-resolution study for the implicit diffusion step.

Marches a centered Gaussian with the production solver at a sequence of
resolutions and reports the interior max error against the free-space
closed form, plus the observed convergence order between consecutive
levels.  The time step scales as dx^2 so the spatial error dominates.

Usage: python scripts/convergence_study.py [--levels 25 50 100 200]
"""

import argparse

import numpy as np

from commutesim import (HeatKernelOracle, ImplicitDiffusionSolver, KernelSpec,
                        build_grid, build_laplacian, gaussian_kernel)

EPS = 0.5
SIGMA0 = 0.05
T_END = 0.01


def interior_error(n: int) -> float:
    grid = build_grid((0.0, 1.0, 0.0, 1.0), n, n)
    dt = 0.25 * grid.dx1**2
    steps = int(round(T_END / dt))
    solver = ImplicitDiffusionSolver(build_laplacian(grid), dt, EPS)
    centers = grid.cell_centers()
    v = gaussian_kernel(centers, np.array([0.5, 0.5]), KernelSpec(SIGMA0))
    for _ in range(steps):
        v = solver.solve(v)
    exact = HeatKernelOracle(EPS).gaussian_solution(T_END, centers, SIGMA0, center=(0.5, 0.5))
    inside = np.all((centers >= 0.1) & (centers <= 0.9), axis=1)
    return float(np.max(np.abs(v - exact)[inside]))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--levels", type=int, nargs="+", default=[25, 50, 100, 200])
    args = parser.parse_args()

    print(f"{'n':>5} {'dx':>10} {'interior error':>16} {'order':>7}")
    prev = None
    for n in args.levels:
        err = interior_error(n)
        order = "" if prev is None else f"{np.log2(prev / err):7.2f}"
        print(f"{n:>5} {1.0 / n:>10.4f} {err:>16.6e} {order:>7}")
        prev = err


if __name__ == "__main__":
    main()
