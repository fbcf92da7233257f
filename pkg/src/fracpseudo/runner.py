"""Execute a :class:`RunConfig`: single solves, extensions and parameter sweeps."""

from __future__ import annotations

import copy
import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config
from .nonlinearities import HypothesisError
from .picard_solver import (Problem, build_time_grid, check_smallness, contraction_sigma, default_norm_spec,
                            extend_and_detect_blowup, picard_solve, write_report_json, write_trajectory_csv)
from .spectral_domain import hilbert_norm_coeffs

__all__ = ["EXIT_OK", "EXIT_CONFIG", "EXIT_BLOWUP", "EXIT_NONCONV", "EXIT_VERIFY", "RunResult",
           "run_config", "run_sweep", "SWEEP_COLUMNS"]

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NONCONV, EXIT_VERIFY = 0, 1, 2, 3, 4
_EXIT = {"converged": EXIT_OK, "global": EXIT_OK, "blowup": EXIT_BLOWUP, "nonconvergence": EXIT_NONCONV}


@dataclass
class RunResult:
    exit_code: int
    report: object  # SolveReport
    trajectory: object  # Trajectory | None
    files: list


def _with_seed(cfg, seed):
    if seed is None or cfg.problem.u0.get("profile") != "random":
        return cfg
    cfg = copy.deepcopy(cfg)
    cfg.problem.u0["seed"] = int(seed)
    return cfg


def _solve(cfg, scale=1.0):
    basis, u0, spec = cfg.problem.build(scale)
    alpha = cfg.problem.alpha
    problem = Problem(basis, alpha, u0, spec)
    g = cfg.grid
    grid = build_time_grid(g.T, g.N, g.r)
    sv = cfg.solver
    if not sv.smallness_override:
        check_smallness(problem, grid)
    if sv.mode == "extend":
        traj, rep = extend_and_detect_blowup(problem, g.T, sv.T_step, norm_threshold=sv.blowup_threshold,
                                             refine_tol=sv.refine_tol, horizon=sv.horizon, N_initial=g.N, r=g.r,
                                             tol=sv.tol, max_iter=sv.max_iter)
        return problem, traj, rep
    if sv.sigma == "auto":
        sigma = contraction_sigma(problem, grid)[0].sigma if spec is not None and spec.kind == "advection" else 0.0
    else:
        sigma = float(sv.sigma)
    norm = default_norm_spec(spec, alpha, sigma)
    traj, rep = picard_solve(problem, grid, norm, tol=sv.tol, max_iter=sv.max_iter,
                             norm_threshold=sv.blowup_threshold, smallness_override=True)
    return problem, traj, rep


def run_config(cfg: RunConfig, out_dir=None, seed=None):
    """Run one configuration and write its artifacts; returns a :class:`RunResult`.

    Hypothesis violations detected at run time (small-data thresholds) are
    raised as :class:`ConfigError`.
    """
    cfg = _with_seed(cfg, seed)
    try:
        problem, traj, rep = _solve(cfg)
    except HypothesisError as exc:
        raise ConfigError(f"hypothesis violated: {exc}") from None
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    spec = problem.spec
    if "json" in cfg.output.formats:
        rep.extra = dict(rep.extra, config=cfg.to_dict())
        write_report_json(out / "report.json", rep)
        files.append(out / "report.json")
    if "csv" in cfg.output.formats and traj is not None:
        orl = spec is not None and spec.kind == "exponential"
        coeff_dir = out / "coefficients" if cfg.output.coefficients else None
        write_trajectory_csv(out / "trajectory.csv", traj, nu=rep.nu, orlicz=orl, coeff_dir=coeff_dir)
        files.append(out / "trajectory.csv")
    return RunResult(_EXIT.get(rep.status, EXIT_NONCONV), rep, traj, files)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

SWEEP_COLUMNS = ["cell", "alpha", "scale", "p", "outcome", "T_max_low", "T_max_high", "T_reached",
                 "iterations", "final_norm_D0", "final_norm_D1", "detail"]


def _cell_config(base: dict, alpha, p):
    d = copy.deepcopy(base)
    d.pop("sweep", None)
    d["problem"]["alpha"] = alpha
    if p is not None:
        if not d["problem"].get("nonlinearity") or d["problem"]["nonlinearity"].get("kind") != "polynomial":
            raise ConfigError("sweep over p requires a polynomial nonlinearity")
        d["problem"]["nonlinearity"]["p"] = p
    return d


def _run_cell(args):
    i, base, alpha, scale, p = args
    row = {"cell": i, "alpha": alpha, "scale": scale, "p": "" if p is None else p, "outcome": "",
           "T_max_low": "", "T_max_high": "", "T_reached": "", "iterations": "", "final_norm_D0": "",
           "final_norm_D1": "", "detail": ""}
    try:
        cfg = parse_config(_cell_config(base, alpha, p))
        problem, traj, rep = _solve(cfg, scale)
    except (ConfigError, HypothesisError) as exc:
        row.update(outcome="invalid", detail=str(exc))
        return row
    except Exception as exc:  # recorded per cell; the sweep carries on
        row.update(outcome="error", detail=f"{type(exc).__name__}: {exc}")
        return row
    outcome = {"converged": "global", "global": "global", "blowup": "blowup"}.get(rep.status, "nonconv")
    last = traj.coeffs[-1] if traj is not None else problem.u0.coeffs
    th = problem.basis.theta
    row.update(outcome=outcome, T_reached=repr(float(rep.T_reached)), iterations=rep.iterations,
               final_norm_D0=repr(float(hilbert_norm_coeffs(th, last, 0.0))),
               final_norm_D1=repr(float(hilbert_norm_coeffs(th, last, 1.0))), detail=rep.reason)
    if rep.blowup is not None:
        row.update(T_max_low=repr(rep.blowup[0]), T_max_high=repr(rep.blowup[1]))
    return row


def run_sweep(cfg: RunConfig, out_dir=None, threads=1, seed=None):
    """Grid of runs over sweep.alpha x sweep.scale x sweep.p; returns (exit_code, rows).

    Exit code 0 when every cell produced a verdict (global, blowup, nonconv or
    invalid), 1 when the ranges are empty or a cell raised an unexpected error.
    """
    cfg = _with_seed(cfg, seed)
    sw = cfg.sweep or {}
    alphas = sw.get("alpha", [cfg.problem.alpha])
    scales = sw.get("scale", [1.0])
    ps = sw.get("p", [None])
    if not cfg.sweep or not alphas or not scales or not ps:
        raise ConfigError("sweep needs nonempty ranges (sweep.alpha, sweep.scale and/or sweep.p)")
    base = cfg.to_dict()
    cells = [(i, base, a, s, p) for i, (a, s, p) in enumerate(itertools.product(alphas, scales, ps))]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    rows.sort(key=lambda r: r["cell"])
    out = Path(out_dir if out_dir is not None else cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    code = EXIT_CONFIG if any(r["outcome"] == "error" for r in rows) else EXIT_OK
    return code, rows
