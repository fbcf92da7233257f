"""JSON run configuration.

Layout (schema ``fracpseudo.config/1``)::

    {
      "problem": {
        "domain": {"kind": "rectangle", "lengths": [3.14159, 3.14159]},
        "K": 24, "alpha": 0.5,
        "nonlinearity": {"kind": "advection", "eta": [1, 0]},     # or null
        "u0": {"profile": "single_mode", "k": [1, 1], "amplitude": 1.0}
      },
      "grid": {"T": 1.0, "N": 64, "r": 2.0},
      "solver": {"mode": "solve", "tol": 1e-9, "max_iter": 50, "sigma": "auto",
                 "smallness_override": false, "blowup_threshold": 1e6,
                 "T_step": 0.5, "horizon": 5.0, "refine_tol": 0.1},
      "output": {"directory": "out", "formats": ["csv", "json"], "coefficients": false},
      "sweep": {"alpha": [...], "scale": [...], "p": [...]}         # optional
    }

u0 profiles: ``single_mode`` (k = 1-based mode position or multi-index),
``modal_list`` (list of {"index": [...], "coeff": c}) and ``random``
(seed, decay, amplitude; L2 norm equals the amplitude).
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .nonlinearities import HypothesisError, NonlinearitySpec
from .spectral_domain import Domain, SpectralField, build_basis, random_field

__all__ = ["ConfigError", "RunConfig", "ProblemConfig", "GridConfig", "SolverConfig", "OutputConfig",
           "load_config", "parse_config", "CONFIG_SCHEMA"]

CONFIG_SCHEMA = "fracpseudo.config/1"
PROFILES = ("single_mode", "modal_list", "random")
MODES = ("solve", "extend")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or hypothesis."""


def _need(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return d[key]


def _check_keys(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")


@dataclass
class ProblemConfig:
    domain: dict
    K: int
    alpha: float
    nonlinearity: dict | None
    u0: dict

    def domain_obj(self):
        return Domain.from_dict(self.domain)

    def spec(self):
        if self.nonlinearity is None:
            return None
        nl = dict(self.nonlinearity)
        kind = nl.pop("kind")
        return NonlinearitySpec(kind, tuple(nl.get("eta", ())), nl.get("p"), float(nl.get("nu", 1.0)))

    def build(self, scale=1.0):
        """(basis, u0 field, NonlinearitySpec | None)."""
        basis = build_basis(self.domain_obj(), self.K)
        return basis, make_u0(basis, self.u0) * float(scale), self.spec()


@dataclass
class GridConfig:
    T: float = 1.0
    N: int = 64
    r: float = 2.0


@dataclass
class SolverConfig:
    mode: str = "solve"
    tol: float = 1e-9
    max_iter: int = 50
    sigma: object = "auto"  # "auto" or a nonnegative number
    smallness_override: bool = False
    blowup_threshold: float = 1e6
    T_step: float = 0.5
    horizon: float = 5.0
    refine_tol: float = 0.1


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    coefficients: bool = False


@dataclass
class RunConfig:
    problem: ProblemConfig
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: dict | None = None

    def to_dict(self):
        d = {"schema": CONFIG_SCHEMA, "problem": asdict(self.problem), "grid": asdict(self.grid),
             "solver": asdict(self.solver), "output": asdict(self.output)}
        if self.sweep is not None:
            d["sweep"] = copy.deepcopy(self.sweep)
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def make_u0(basis, prof):
    kind = prof["profile"]
    c = np.zeros(basis.K)
    if kind == "single_mode":
        c[_mode_position(basis, prof["k"])] = float(prof.get("amplitude", 1.0))
    elif kind == "modal_list":
        for m in prof["modes"]:
            c[_mode_position(basis, m["index"])] += float(m["coeff"])
    else:
        rng = np.random.default_rng(int(prof.get("seed", 0)))
        return random_field(basis, rng, float(prof.get("decay", 2.0)), amplitude=float(prof.get("amplitude", 1.0)))
    return SpectralField(basis, c, 1.0)


def _mode_position(basis, k):
    if isinstance(k, (list, tuple)):
        hits = np.flatnonzero(np.all(basis.index == np.asarray(k, dtype=int), axis=1))
        if hits.size == 0:
            raise ConfigError(f"mode {list(k)} is not among the K = {basis.K} retained modes")
        return int(hits[0])
    k = int(k)
    if not 1 <= k <= basis.K:
        raise ConfigError(f"mode position {k} outside 1..{basis.K}")
    return k - 1


def _num(v, where, lo=None, strict=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where} must be an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where} must be finite")
    if lo is not None and (v <= lo if strict else v < lo):
        raise ConfigError(f"{where} must be {'>' if strict else '>='} {lo}, got {v!r}")
    return int(v) if integer else float(v)


def _parse_u0(d):
    if not isinstance(d, dict):
        raise ConfigError("problem.u0 must be an object")
    prof = _need(d, "profile", "problem.u0")
    if prof not in PROFILES:
        raise ConfigError(f"problem.u0.profile must be one of {PROFILES}, got {prof!r}")
    if prof == "single_mode":
        _check_keys(d, ("profile", "k", "amplitude"), "problem.u0")
        k = _need(d, "k", "problem.u0")
        out = {"profile": prof, "k": list(k) if isinstance(k, (list, tuple)) else int(k),
               "amplitude": _num(d.get("amplitude", 1.0), "problem.u0.amplitude")}
    elif prof == "modal_list":
        _check_keys(d, ("profile", "modes"), "problem.u0")
        modes = _need(d, "modes", "problem.u0")
        if not isinstance(modes, list) or not modes:
            raise ConfigError("problem.u0.modes must be a nonempty list")
        out = {"profile": prof, "modes": [{"index": m["index"] if isinstance(m["index"], int) else list(m["index"]),
                                           "coeff": _num(m["coeff"], "problem.u0.modes[].coeff")}
                                          for m in modes]}
    else:
        _check_keys(d, ("profile", "seed", "decay", "amplitude"), "problem.u0")
        out = {"profile": prof, "seed": _num(d.get("seed", 0), "problem.u0.seed", 0, integer=True),
               "decay": _num(d.get("decay", 2.0), "problem.u0.decay", 0),
               "amplitude": _num(d.get("amplitude", 1.0), "problem.u0.amplitude")}
    return out


def parse_config(d):
    """Validate a config dict and return a :class:`RunConfig`.

    Hypothesis violations (e.g. p/(p-1) >= 1/alpha for the polynomial source)
    are reported as ConfigError with the hypothesis in the message.
    """
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(d, ("schema", "problem", "grid", "solver", "output", "sweep"), "config")
    if d.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported schema {d.get('schema')!r}; expected {CONFIG_SCHEMA}")
    pd = _need(d, "problem", "config")
    _check_keys(pd, ("domain", "K", "alpha", "nonlinearity", "u0"), "problem")
    try:
        dom = Domain.from_dict(_need(pd, "domain", "problem"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"problem.domain: {exc}") from None
    K = _num(_need(pd, "K", "problem"), "problem.K", 1, integer=True)
    alpha = _num(_need(pd, "alpha", "problem"), "problem.alpha", 0.0, strict=True)
    if alpha > 1.0:
        raise ConfigError("problem.alpha must lie in (0, 1]")
    nl = pd.get("nonlinearity")
    if nl is not None:
        if not isinstance(nl, dict) or "kind" not in nl:
            raise ConfigError("problem.nonlinearity must be null or an object with a 'kind'")
        _check_keys(nl, ("kind", "eta", "p", "nu"), "problem.nonlinearity")
        nl = {k: (list(v) if k == "eta" else v) for k, v in nl.items()}
    problem = ProblemConfig(dom.to_dict(), K, alpha, nl, _parse_u0(_need(pd, "u0", "problem")))
    try:
        spec = problem.spec()
        if spec is not None:
            spec.validate(dom.dim, alpha)
    except HypothesisError as exc:
        raise ConfigError(f"hypothesis violated: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"problem.nonlinearity: {exc}") from None

    gd = dict(d.get("grid", {}))
    _check_keys(gd, ("T", "N", "r"), "grid")
    grid = GridConfig(_num(gd.get("T", 1.0), "grid.T", 0.0, strict=True),
                      _num(gd.get("N", 64), "grid.N", 2, integer=True),
                      _num(gd.get("r", 2.0), "grid.r", 1.0))

    sd = dict(d.get("solver", {}))
    _check_keys(sd, tuple(SolverConfig.__dataclass_fields__), "solver")
    sv = SolverConfig()
    mode = sd.get("mode", sv.mode)
    if mode not in MODES:
        raise ConfigError(f"solver.mode must be one of {MODES}, got {mode!r}")
    sigma = sd.get("sigma", "auto")
    if sigma != "auto":
        sigma = _num(sigma, "solver.sigma", 0.0)
    override = sd.get("smallness_override", False)
    if not isinstance(override, bool):
        raise ConfigError("solver.smallness_override must be true or false")
    solver = SolverConfig(mode, _num(sd.get("tol", sv.tol), "solver.tol", 0.0, strict=True),
                          _num(sd.get("max_iter", sv.max_iter), "solver.max_iter", 1, integer=True),
                          sigma, override,
                          _num(sd.get("blowup_threshold", sv.blowup_threshold), "solver.blowup_threshold", 0.0, True),
                          _num(sd.get("T_step", sv.T_step), "solver.T_step", 0.0, True),
                          _num(sd.get("horizon", sv.horizon), "solver.horizon", 0.0, True),
                          _num(sd.get("refine_tol", sv.refine_tol), "solver.refine_tol", 0.0, True))

    od = dict(d.get("output", {}))
    _check_keys(od, ("directory", "formats", "coefficients"), "output")
    formats = list(od.get("formats", ["csv", "json"]))
    bad = set(formats) - {"csv", "json"}
    if bad:
        raise ConfigError(f"output.formats: unknown format(s) {sorted(bad)}")
    output = OutputConfig(str(od.get("directory", "out")), formats, bool(od.get("coefficients", False)))

    sweep = d.get("sweep")
    if sweep is not None:
        if not isinstance(sweep, dict):
            raise ConfigError("sweep must be an object of parameter lists")
        _check_keys(sweep, ("alpha", "scale", "p"), "sweep")
        sweep = {k: [_num(v, f"sweep.{k}[]", 0.0, strict=True) for v in vals] for k, vals in sweep.items()}
    cfg = RunConfig(problem, grid, solver, output, sweep)
    # u0 must be constructible on the configured basis
    try:
        cfg.problem.build()
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"problem.u0: {exc}") from None
    return cfg


def load_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    return parse_config(raw)
