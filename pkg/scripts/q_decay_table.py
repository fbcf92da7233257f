"""sup_t Q(t, h, sigma) against sigma, with the rescaled value sigma^alpha sup Q.

The rescaled column levels off near Gamma(alpha) once sigma T is large, so the
ratio sup Q(sigma_max) / sup Q(sigma_min) behaves like (sigma_min/sigma_max)^alpha.

    python3 scripts/q_decay_table.py --alpha 0.5 --sigma 1 4 16 64 256 1024 4096 65536
"""

import argparse
import math

from fracpseudo.picard_solver import build_time_grid, sup_Q


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--h", type=float, default=None, help="singular weight exponent (default alpha)")
    ap.add_argument("--sigma", type=float, nargs="+", default=[1, 4, 16, 64, 256, 1024, 4096, 65536])
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--N", type=int, default=64)
    args = ap.parse_args()
    h = args.alpha if args.h is None else args.h
    nodes = build_time_grid(args.T, args.N, 2.0).nodes
    base = None
    print(f"Gamma(alpha) = {math.gamma(args.alpha):.4f}")
    print(f"{'sigma':>9} {'sup Q':>12} {'ratio':>9} {'sigma^a supQ':>13}")
    for s in args.sigma:
        q = sup_Q(nodes, h, s, args.alpha)
        base = q if base is None else base
        print(f"{s:9g} {q:12.5e} {q / base:9.4f} {s ** args.alpha * q:13.4f}")


if __name__ == "__main__":
    main()
