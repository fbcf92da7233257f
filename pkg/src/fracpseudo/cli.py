"""Command line: ``fracpseudo {solve,verify,sweep}``.

Exit codes: 0 success, 1 configuration error, 2 blow-up detected,
3 Picard nonconvergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .runner import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, run_config, run_sweep

__all__ = ["main", "build_parser"]


def build_parser():
    ap = argparse.ArgumentParser(prog="fracpseudo",
                                 description="Mild solutions of the fractional pseudo-parabolic equation")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_config):
        p.add_argument("--config", required=need_config, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for sweep cells")
        p.add_argument("--seed", type=int, default=None, help="seed for random initial data (u64)")

    common(sub.add_parser("solve", help="run picard_solve or the blow-up extension"), True)
    v = sub.add_parser("verify", help="run property suites")
    common(v, False)
    v.add_argument("suites", nargs="*", help="suite names (default: all)")
    v.add_argument("--list", action="store_true", help="list suites and exit")
    common(sub.add_parser("sweep", help="grid of runs over alpha, data scale and p"), True)
    return ap


def _seed(v):
    if v is not None and not 0 <= v < 2 ** 64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    return v


def _cmd_solve(args):
    cfg = load_config(args.config)
    res = run_config(cfg, args.out, _seed(args.seed))
    rep = res.report
    msg = f"status={rep.status} iterations={rep.iterations}"
    if rep.blowup is not None:
        msg += f" T_max in [{rep.blowup[0]:.6g}, {rep.blowup[1]:.6g}]"
    if rep.reason:
        msg += f" ({rep.reason})"
    print(msg)
    for f in res.files:
        print(f"wrote {f}")
    return res.exit_code


def _cmd_verify(args):
    from .verify import SUITES, VERIFY_SCHEMA, run_suites
    from .picard_solver import _jsonable

    if args.list:
        print("\n".join(SUITES))
        return EXIT_OK
    try:
        ok, results = run_suites(args.suites or None)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    out = Path(args.out or "verify_out")
    out.mkdir(parents=True, exist_ok=True)
    doc = {"schema": VERIFY_SCHEMA, "passed": ok, "suites": {n: r.to_dict() for n, r in results.items()}}
    (out / "verify.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True))
    for n, r in results.items():
        print(f"{'PASS' if r.passed else 'FAIL'} {n} ({r.seconds:.2f}s)")
        for f in r.failures:
            print(f"    failed: {f}")
    print(f"wrote {out / 'verify.json'}")
    return EXIT_OK if ok else EXIT_VERIFY


def _cmd_sweep(args):
    cfg = load_config(args.config)
    code, rows = run_sweep(cfg, args.out, max(1, args.threads), _seed(args.seed))
    counts = {}
    for r in rows:
        counts[r["outcome"]] = counts.get(r["outcome"], 0) + 1
    print(f"{len(rows)} cells: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return {"solve": _cmd_solve, "verify": _cmd_verify, "sweep": _cmd_sweep}[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
