#!/usr/bin/env python3
"""Empirical convergence-rate study near a constructed optimum.

Builds a compression instance with a known stationary point, perturbs the
point by a small tangent step, and runs the shifted block polar iteration
for a range of shifts.  Larger shifts slow the per-sweep contraction (the
asymptotic factor grows with gamma), which makes the linear regime long
enough to fit; prints the fitted slope, r^2, and classification per gamma.

Usage: python3 scripts/rate_study.py [n] [r] [seed]
"""
import sys

import numpy as np

from stiefel_polar.diagnostics import fit_rate, sweep_summary
from stiefel_polar.instances import compression_rotated_diagonal_instance
from stiefel_polar.solvers import SolverConfig, solve
from stiefel_polar.stiefel import polar_decompose, tangent_project


def main(argv):
    n = int(argv[1]) if len(argv) > 1 else 4
    r = int(argv[2]) if len(argv) > 2 else 2
    seed = int(argv[3]) if len(argv) > 3 else 5
    spec, optimum, _ = compression_rotated_diagonal_instance((n, n, n), r, seed=seed)
    rng = np.random.default_rng(123)
    start = []
    for u in optimum:
        z = tangent_project(u, rng.standard_normal(u.shape) + 1j * rng.standard_normal(u.shape))
        z *= 1e-2 / float(np.linalg.norm(z))
        start.append(polar_decompose(u + z)[0])

    print(f"instance: dims ({n},{n},{n}), rank {r}, seed {seed}, perturbation 1e-2")
    print(f"{'gamma':>8} {'sweeps':>7} {'slope':>9} {'r^2':>10} classification")
    for gamma in (0.5, 1.0, 2.0, 4.0, 8.0):
        res = solve(
            spec,
            [u.copy() for u in start],
            SolverConfig(algorithm="apdoi-s", gamma=gamma, max_sweeps=2000,
                         tol_step=1e-14, tol_grad=1e-300),
        )
        fit = fit_rate(res.trace)
        print(f"{gamma:8.2f} {res.sweeps:7d} {fit.slope:9.4f} {fit.r_squared:10.7f} "
              f"{fit.classification}")
        steps = [s[2] for s in sweep_summary(res.trace)][:8]
        print("         first step norms:", " ".join(f"{s:.2e}" for s in steps))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
