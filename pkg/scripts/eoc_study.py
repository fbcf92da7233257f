"""Empirical order of the refined mild residual for the advection problem.

    python3 scripts/eoc_study.py --alpha 0.3 0.5 0.8 --levels 16 32 64 128
"""

import argparse
import math

import numpy as np

from fracpseudo.nonlinearities import NonlinearitySpec
from fracpseudo.picard_solver import (Problem, WeightedNormSpec, build_time_grid, contraction_sigma, mild_residual,
                                      picard_solve)
from fracpseudo.spectral_domain import Domain, SpectralField, build_basis


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.3, 0.5, 0.8])
    ap.add_argument("--levels", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--K", type=int, default=16)
    ap.add_argument("--grading", choices=["optimal", "uniform"], default="optimal",
                    help="r = 2/alpha or r = 1")
    args = ap.parse_args()

    b = build_basis(Domain.rectangle(math.pi, math.pi), args.K)
    u0 = SpectralField(b, np.eye(b.K)[0], 1.0)
    spec = NonlinearitySpec("advection", (1.0, 0.0))
    print(f"{'alpha':>6} {'N':>5} {'residual':>12} {'EOC':>7} {'iters':>6}")
    for a in args.alpha:
        pr = Problem(b, a, u0, spec)
        r = 2.0 / a if args.grading == "optimal" else 1.0
        sigma = contraction_sigma(pr, build_time_grid(1.0, args.levels[0], 2.0))[0].sigma
        prev = None
        for N in args.levels:
            g = build_time_grid(1.0, N, r)
            traj, rep = picard_solve(pr, g, WeightedNormSpec(a, sigma, 1.0), tol=1e-12, max_iter=80)
            res = mild_residual(traj, pr, refine=True)
            eoc = "" if prev is None else f"{math.log2(prev / res):7.3f}"
            print(f"{a:6.2f} {N:5d} {res:12.4e} {eoc:>7} {rep.iterations:6d}")
            prev = res


if __name__ == "__main__":
    main()
