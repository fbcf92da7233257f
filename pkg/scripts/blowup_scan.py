"""Blow-up brackets for bbm_burgers as the amplitude of a single-mode datum grows.

    python3 scripts/blowup_scan.py --alpha 0.5 --amplitudes 0.5 2 5 10 25
"""

import argparse
import math

import numpy as np

from fracpseudo.nonlinearities import NonlinearitySpec
from fracpseudo.picard_solver import Problem, extend_and_detect_blowup
from fracpseudo.spectral_domain import Domain, SpectralField, build_basis


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--K", type=int, default=16)
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.5, 2.0, 5.0, 10.0, 25.0])
    ap.add_argument("--horizon", type=float, default=5.0)
    ap.add_argument("--refine-tol", type=float, default=0.05)
    args = ap.parse_args()
    b = build_basis(Domain.rectangle(math.pi, math.pi), args.K)
    spec = NonlinearitySpec("bbm_burgers", (1.0, 1.0)).validate(2, args.alpha)
    print(f"{'amplitude':>9} {'status':>8} {'T_low':>8} {'T_high':>8} {'max D1':>10}  reason")
    for amp in args.amplitudes:
        u0 = SpectralField(b, np.eye(b.K)[0] * amp, 1.0)
        _, rep = extend_and_detect_blowup(Problem(b, args.alpha, u0, spec), 0.5, 0.5,
                                          refine_tol=args.refine_tol, horizon=args.horizon)
        lo, hi = rep.blowup if rep.blowup else ("", "")
        lo, hi = (f"{lo:.4f}", f"{hi:.4f}") if rep.blowup else ("-", "-")
        print(f"{amp:9g} {rep.status:>8} {lo:>8} {hi:>8} {max(rep.norm_history):10.4g}  {rep.reason}")


if __name__ == "__main__":
    main()
