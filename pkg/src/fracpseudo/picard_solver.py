"""Global Picard iteration for the mild formulation

    u(t) = S(t) u0 + int_0^t R(t - tau) H(u(tau)) dtau

on a graded time mesh, with product integration for the (t - tau)^(alpha-1)
singularity, weighted sup norms, and an extension loop that brackets the
maximal existence time when continuation breaks down.

Product integration: near the target node the kernel
r^(alpha-1) E_{alpha,alpha}(-lam r^alpha)/(1+theta) is integrated exactly (its
moments are Mittag-Leffler functions of higher second parameter) against the
linear interpolant of the source.  On panels far from t_n the smooth factor
f_k(t_n - tau) g_k(tau), with f_k(s) = E_{alpha,alpha}(-lam_k s^alpha)/(1+theta_k),
is interpolated linearly on every panel and integrated exactly against
(t_n - tau)^(alpha-1).  The singular weight is never sampled.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field, asdict
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .nonlinearities import HypothesisError, NonlinearitySpec, eval_H_coeffs
from .propagators import ML_TOL, r_smooth_multiplier, s_multiplier
from .special_functions import MLParams, mittag_leffler
from .spectral_domain import SpectralField, hilbert_norm_coeffs, orlicz_norm_values

__all__ = [
    "TimeGrid",
    "Trajectory",
    "WeightedNormSpec",
    "SolveReport",
    "Problem",
    "FractionalKernel",
    "IdentityKernel",
    "ConvolutionOperator",
    "SigmaChoice",
    "build_time_grid",
    "grid_from_nodes",
    "panel_weights",
    "singular_convolution",
    "Q_kernel",
    "sup_Q",
    "weighted_sup_norm",
    "weighted_sup_norm_coeffs",
    "default_norm_spec",
    "picard_solve",
    "check_smallness",
    "smallness_threshold",
    "SmallnessThreshold",
    "sigma_for_contraction",
    "contraction_sigma",
    "extend_and_detect_blowup",
    "mild_residual",
    "refine_trajectory",
    "write_trajectory_csv",
    "write_report_json",
    "REPORT_SCHEMA",
]

REPORT_SCHEMA = "fracpseudo.report/1"


# --------------------------------------------------------------------------
# grids and containers
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeGrid:
    T: float
    N: int
    r: float | None  # None for meshes assembled from segments
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("time nodes must start at 0 and increase strictly")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)


def build_time_grid(T, N, r=2.0):
    """Graded mesh t_j = T (j/N)^r, j = 0..N."""
    if not T > 0:
        raise ValueError("T must be positive")
    if int(N) != N or N < 2:
        raise ValueError("N must be an integer >= 2")
    if not r >= 1:
        raise ValueError("grading r must be >= 1")
    N = int(N)
    nodes = T * (np.arange(N + 1) / N) ** r
    nodes[-1] = T
    return TimeGrid(float(T), N, float(r), nodes)


def grid_from_nodes(nodes):
    nodes = np.asarray(nodes, dtype=float)
    return TimeGrid(float(nodes[-1]), nodes.size - 1, None, nodes)


@dataclass(frozen=True)
class WeightedNormSpec:
    kappa: float = 0.0
    sigma: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if self.kappa < 0 or self.sigma < 0:
            raise ValueError("kappa and sigma must be nonnegative")


@dataclass(frozen=True)
class Problem:
    basis: object
    alpha: float
    u0: SpectralField
    spec: NonlinearitySpec | None = None

    def __post_init__(self):
        if self.u0.basis is not self.basis:
            raise ValueError("u0 must live on the problem basis")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass(eq=False)
class Trajectory:
    grid: TimeGrid
    coeffs: np.ndarray  # (N+1, K)
    u0: SpectralField

    @property
    def basis(self):
        return self.u0.basis

    @property
    def states(self):
        return [SpectralField(self.basis, c, self.u0.nu) for c in self.coeffs]

    def state(self, j):
        return SpectralField(self.basis, self.coeffs[j], self.u0.nu)


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    contraction_ratios: list
    final_residual: float
    blowup: tuple | None = None
    norm_history: list = dc_field(default_factory=list)
    status: str = "converged"  # converged | nonconvergence | blowup | global
    reason: str = ""
    sigma: float = 0.0
    kappa: float = 0.0
    nu: float = 1.0
    T_reached: float = 0.0
    extra: dict = dc_field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["schema"] = REPORT_SCHEMA
        d["blowup"] = None if self.blowup is None else {"T_max_low": self.blowup[0],
                                                         "T_max_high": self.blowup[1]}
        return _jsonable(d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# --------------------------------------------------------------------------
# kernels and product integration
# --------------------------------------------------------------------------


class FractionalKernel:
    """S multipliers and the smooth part of R for the fractional problem."""

    def __init__(self, theta, alpha):
        self.theta = np.asarray(theta, dtype=float)
        self.alpha = float(alpha)

    def s_mult(self, t):
        return s_multiplier(self.theta, self.alpha, t)

    def smooth(self, s):
        return r_smooth_multiplier(self.theta, self.alpha, s)

    def moments(self, s):
        """int_0^s K(r) dr and int_0^s r K(r) dr for K(r) = r^(alpha-1) E_{alpha,alpha}(-lam r^alpha)/(1+theta)."""
        a = self.alpha
        s = np.asarray(s, dtype=float)
        z = -np.multiply.outer(np.power(s, a), self.theta / (1.0 + self.theta))
        e1 = mittag_leffler(MLParams(a, a + 1.0, ML_TOL), z)
        e2 = mittag_leffler(MLParams(a, a + 2.0, ML_TOL), z)
        scale = 1.0 / (1.0 + self.theta)
        m0 = np.power(s, a)[:, None] * e1 * scale
        m1 = np.power(s, a + 1.0)[:, None] * (e1 - e2) * scale
        return m0, m1


class IdentityKernel:
    """Calibration kernel: R replaced by (t - tau)^(alpha-1), S by the identity."""

    def __init__(self, K, alpha):
        self.K = int(K)
        self.alpha = float(alpha)

    def s_mult(self, t):
        return np.ones(np.shape(t) + (self.K,))

    def smooth(self, s):
        return np.ones(np.shape(s) + (self.K,))

    def moments(self, s):
        s = np.asarray(s, dtype=float)[:, None]
        a = self.alpha
        one = np.ones(self.K)
        return s ** a / a * one, s ** (a + 1.0) / (a + 1.0) * one


def panel_weights(nodes, n, alpha):
    """Hat-function weights w_j with sum_j w_j g(t_j) = int_0^{t_n} (t_n - tau)^(alpha-1) g_lin(tau) dtau.

    Panel moments use the regularized incomplete Beta function in the
    relative variable u = (t_j+1 - t_j)/(t_n - t_j), which keeps full relative
    accuracy on panels far from t_n.
    """
    w = np.zeros(n + 1)
    if n == 0:
        return w
    left, right = panel_weights_split(nodes, n, alpha)
    w[:n] += left
    w[1:] += right
    return w


EXACT_SWITCH = 1e-4  # panels with h/(t_n - t_j) below this use the smooth-factor rule


def kernel_row(nodes, n, kernel, F=None, M0=None, M1=None):
    """Row A[n] (shape (n+1, K)) of the product-integration tensor.

    Panels close to t_n integrate the full kernel exactly against the linear
    interpolant of the source (closed-form kernel moments).  Panels far from
    t_n, where moment differences would cancel, interpolate the smooth kernel
    factor together with the source and use the exact weight moments.
    ``F``, ``M0``, ``M1`` are kernel values / moments at the lags t_n - t_j.
    """
    nodes = np.asarray(nodes, dtype=float)
    lags = nodes[n] - nodes[: n + 1]
    if F is None:
        F = kernel.smooth(lags)
    if M0 is None:
        M0, M1 = kernel.moments(lags)
    K = F.shape[1]
    row = np.zeros((n + 1, K))
    if n == 0:
        return row
    h = np.diff(nodes[: n + 1])
    a = lags[:n]
    near = h / a >= EXACT_SWITCH
    # smooth-factor rule everywhere, then overwrite the near panels
    w = panel_weights_split(nodes, n, kernel.alpha)
    left, right = w
    far = ~near
    row[:n][far] += left[far, None] * F[:n][far]
    row[1:][far] += right[far, None] * F[1:][far]
    j = np.flatnonzero(near)
    I0 = M0[j] - M0[j + 1]
    I1 = a[j, None] * I0 - (M1[j] - M1[j + 1])
    hj = h[j, None]
    np.add.at(row, j, I0 - I1 / hj)
    np.add.at(row, j + 1, I1 / hj)
    return row


def panel_weights_split(nodes, n, alpha):
    """Per-panel (left, right) hat weights of :func:`panel_weights`."""
    nodes = np.asarray(nodes, dtype=float)
    tn = nodes[n]
    tj = nodes[:n]
    h = np.diff(nodes[: n + 1])
    a = tn - tj
    delta = np.minimum(h / a, 1.0)
    with np.errstate(divide="ignore"):
        A = -np.power(a, alpha) * np.expm1(alpha * np.log1p(-delta)) / alpha
    A[-1] = h[-1] ** alpha / alpha
    B = np.power(a, alpha + 1.0) * betainc(2.0, alpha, delta) / (alpha * (alpha + 1.0))
    return A - B / h, B / h


class ConvolutionOperator:
    """Lower-triangular product-integration tensor rows A[n] of shape (n+1, K), built lazily."""

    def __init__(self, nodes, kernel):
        self.nodes = np.asarray(nodes, dtype=float)
        self.kernel = kernel
        self.rows = {}

    def extend(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        m = self.nodes.size
        if nodes.size < m or not np.array_equal(nodes[:m], self.nodes):
            raise ValueError("extension must keep the existing nodes as a prefix")
        self.nodes = nodes

    def truncate(self, m):
        """Drop nodes beyond index m-1 (and their rows)."""
        self.nodes = self.nodes[:m]
        self.rows = {n: r for n, r in self.rows.items() if n < m}

    def ensure(self, ns):
        missing = [n for n in ns if n not in self.rows and n > 0]
        if not missing:
            return
        # batched Mittag-Leffler calls for all requested rows
        lags = np.concatenate([self.nodes[n] - self.nodes[: n + 1] for n in missing])
        F = self.kernel.smooth(lags)
        M0, M1 = self.kernel.moments(lags)
        pos = 0
        for n in missing:
            sl = slice(pos, pos + n + 1)
            self.rows[n] = kernel_row(self.nodes, n, self.kernel, F[sl], M0[sl], M1[sl])
            pos += n + 1

    def apply(self, G, ns):
        """Convolution values at nodes ``ns`` for per-node source coefficients G (>= max(ns)+1 rows)."""
        self.ensure(ns)
        out = np.zeros((len(ns), G.shape[-1]))
        for i, n in enumerate(ns):
            if n > 0:
                out[i] = np.einsum("jk,jk->k", self.rows[n], G[: n + 1])
        return out


_op_cache = {}


def _operator(nodes, kernel_key, kernel):
    key = (nodes.tobytes(), kernel_key)
    op = _op_cache.get(key)
    if op is None:
        if len(_op_cache) > 16:
            _op_cache.clear()
        op = ConvolutionOperator(nodes, kernel)
        _op_cache[key] = op
    return op


def _kernel_for(problem, kernel):
    if kernel is not None:
        return kernel, ("custom", id(kernel))
    theta = problem.basis.theta
    return FractionalKernel(theta, problem.alpha), ("frac", theta.tobytes(), problem.alpha)


def singular_convolution(grid, alpha, g, n, basis, mode="propagator"):
    """int_0^{t_n} R(t_n - tau) g(tau) dtau by product integration.

    ``g`` is an array (>= n+1, K) or a list of fields at nodes 0..n.  With
    ``mode="calibration"`` the propagator is replaced by the bare weight
    (t_n - tau)^(alpha-1), which makes the quadrature exact for piecewise-linear g.
    """
    if not 1 <= n <= grid.N:
        raise ValueError(f"node index {n} outside 1..{grid.N}")
    if isinstance(g, (list, tuple)):
        g = np.array([f.coeffs for f in g])
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[:, None] * np.ones(basis.K)
    if mode == "calibration":
        kernel = IdentityKernel(basis.K, alpha)
        key = ("identity", basis.K, alpha)
    elif mode == "propagator":
        kernel = FractionalKernel(basis.theta, alpha)
        key = ("frac", basis.theta.tobytes(), alpha)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    op = _operator(grid.nodes, key, kernel)
    return SpectralField(basis, op.apply(g, [n])[0], -1.0)


# --------------------------------------------------------------------------
# Q kernel of the contraction argument
# --------------------------------------------------------------------------


def _q_panels(sigma_t, n_geo=400):
    umin = min(1e-10, 1e-4 / (1.0 + sigma_t))
    u = np.geomspace(umin, 1.0, n_geo)
    u = np.union1d(u, 1.0 - np.geomspace(1e-12, 0.5, n_geo // 2))  # (1-u)^(-h) endpoint
    # cap the panel width where the exponential still varies
    step = min(0.02, 0.05 / max(sigma_t, 1e-300))
    fine = np.arange(0.0, min(1.0, 40.0 / max(sigma_t, 1e-300)), step)
    u = np.union1d(u, fine)
    return np.union1d([0.0, 1.0], u)


def Q_kernel(t, h, sigma, alpha):
    """Q(t, h, sigma) = t^h int_0^t (t - tau)^(alpha-1) tau^(-h) e^(-sigma (t - tau)) dtau.

    In u = (t - tau)/t this is t^alpha int_0^1 u^(alpha-1) (1-u)^(-h) e^(-sigma t u) du.
    The exponential is interpolated linearly on panels and the Jacobi weight
    u^(alpha-1)(1-u)^(-h) is integrated exactly (incomplete Beta moments).
    """
    if not 0.0 <= h < 1.0:
        raise ValueError("h must lie in [0, 1)")
    if not t > 0:
        raise ValueError("t must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    from scipy.special import beta as beta_fn

    st = sigma * t
    if st == 0.0:
        return t ** alpha * float(beta_fn(alpha, 1.0 - h))
    coarse = _q_panels(st)
    fine = np.union1d(coarse, 0.5 * (coarse[1:] + coarse[:-1]))
    # the panel rule is second order in the panel width: one Richardson step
    qc = _q_product_rule(coarse, st, alpha, h)
    qf = _q_product_rule(fine, st, alpha, h)
    return t ** alpha * float((4.0 * qf - qc) / 3.0)


def _q_product_rule(u, st, alpha, h):
    from scipy.special import beta as beta_fn

    b0 = betainc(alpha, 1.0 - h, u) * beta_fn(alpha, 1.0 - h)
    b1 = betainc(alpha + 1.0, 1.0 - h, u) * beta_fn(alpha + 1.0, 1.0 - h)
    m0 = np.diff(b0)            # int_panel weight
    m1 = np.diff(b1)            # int_panel u * weight
    ul, ur = u[:-1], u[1:]
    fl, fr = np.exp(-st * ul), np.exp(-st * ur)
    # linear interpolant f = fl + (fr - fl)(u - ul)/(ur - ul)
    return np.sum(fl * m0 + (fr - fl) / (ur - ul) * (m1 - ul * m0))


def sup_Q(nodes, h, sigma, alpha):
    nodes = np.asarray(nodes, dtype=float)
    return max(Q_kernel(t, h, sigma, alpha) for t in nodes[nodes > 0])


@dataclass(frozen=True)
class SigmaChoice:
    sigma: float
    sup_q: float
    target: float
    trivial: bool  # True when sigma = 0 already meets the target


def sigma_for_contraction(alpha, C1C2_product, grid, h=None, band=(0.9, 1.0), max_iter=200):
    """Smallest-band sigma with sup_j Q(t_j, h, sigma) in band * (3/4) / (C1 C2)."""
    if not C1C2_product > 0:
        raise ValueError("C1*C2 must be positive")
    h = alpha if h is None else h
    nodes = grid.nodes if isinstance(grid, TimeGrid) else np.asarray(grid)
    target = 0.75 / C1C2_product
    f = lambda s: sup_Q(nodes, h, s, alpha)
    q0 = f(0.0)
    if q0 <= band[1] * target:
        return SigmaChoice(0.0, q0, target, True)
    lo, hi = 0.0, 1.0
    while f(hi) > band[1] * target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise ArithmeticError("sigma_for_contraction: no sigma reaches the target")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        q = f(mid)
        if q > band[1] * target:
            lo = mid
        else:
            hi = mid
            if q >= band[0] * target:
                break
    return SigmaChoice(hi, f(hi), target, False)


def contraction_sigma(problem, grid, n_pairs=60, seed=0):
    """sigma_0 for the advection contraction argument, with measured constants.

    C_lip is the larger of the analytic bound |eta| and the measured Lipschitz
    ratio of H : D^1 -> D^0; C2 is the measured R-constant for nu* = 1 over
    the grid.  Returns (SigmaChoice, C_lip, C2).
    """
    from .propagators import linear_bound_probe
    from .nonlinearities import measure_lipschitz_constant

    spec = problem.spec
    if spec is None or spec.kind != "advection":
        raise ValueError("contraction_sigma applies to the advection source")
    basis, alpha = problem.basis, problem.alpha
    C2 = linear_bound_probe(basis, alpha, 1.0, 0.0, 1.0, grid.nodes[1:]).C2_emp
    lip = max(measure_lipschitz_constant(spec, basis, n_pairs, seed), float(np.linalg.norm(spec.eta)))
    return sigma_for_contraction(alpha, lip * C2, grid), lip, C2


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------


def weighted_sup_norm_coeffs(nodes, theta, coeffs, spec):
    nodes = np.asarray(nodes, dtype=float)
    norms = hilbert_norm_coeffs(theta, coeffs, spec.nu)
    w = np.power(nodes[1:], spec.kappa) * np.exp(-spec.sigma * nodes[1:])
    return float(np.max(w * norms[1:])) if nodes.size > 1 else 0.0


def weighted_sup_norm(traj, spec):
    """max_{j >= 1} t_j^kappa e^(-sigma t_j) ||w(t_j)||_{D^nu}."""
    return weighted_sup_norm_coeffs(traj.grid.nodes, traj.basis.theta, traj.coeffs, spec)


def default_norm_spec(spec, alpha, sigma=0.0):
    """Time weight per source kind: alpha (advection), alpha*mu (polynomial), alpha/2 (exponential)."""
    if spec is None:
        return WeightedNormSpec(0.0, sigma, 1.0)
    if spec.kind == "advection":
        return WeightedNormSpec(alpha, sigma, 1.0)
    if spec.kind == "polynomial":
        return WeightedNormSpec(alpha / (spec.p - 1.0), sigma, spec.nu)
    if spec.kind == "exponential":
        return WeightedNormSpec(alpha / 2.0, sigma, 1.0)
    return WeightedNormSpec(0.0, sigma, 1.0)


# --------------------------------------------------------------------------
# small-data thresholds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallnessThreshold:
    value: float  # admissible size of u0 in the norm named by ``norm``
    norm: str
    C1: float
    C2: float
    lipschitz: float
    detail: dict = dc_field(default_factory=dict)


_threshold_cache = {}


def smallness_threshold(spec, basis, alpha, grid, n_pairs=40, seed=0, safety=0.5):
    """Largest data size for which the invariance estimate closes with measured constants.

    polynomial (mu = 1/(p-1), norm D^nu): the Picard map sends the ball of radius
    2 C1 ||u0|| in sup t^(alpha mu) ||.||_nu into itself once
    C2 L B(alpha, 1 - p alpha mu) (2 C1)^p ||u0||^(p-1) <= C1, where L bounds
    ||H(u)||_{nu-1} / ||u||_nu^p and C2 is the R-constant for nu* = 1.

    exponential (norm D^1): the Orlicz norm of the iterates, at most
    2 C1 C_Xi ||u0||_{D^1}, must stay below (1/6)^(1/2), the range of the
    exponential moment bound; C_Xi is the empirical D^1 -> L^Xi constant.

    Both values are multiplied by ``safety``.
    """
    from .propagators import linear_bound_probe
    from .nonlinearities import measure_lipschitz_constant
    from .spectral_domain import random_field

    if spec is None or spec.kind not in ("polynomial", "exponential"):
        return None
    key = (spec, basis.theta.tobytes(), float(alpha), grid.nodes.tobytes(), n_pairs, seed, safety)
    if key in _threshold_cache:
        return _threshold_cache[key]
    t = grid.nodes[1:]
    if spec.kind == "polynomial":
        p = spec.p
        mu = 1.0 / (p - 1.0)
        C1 = linear_bound_probe(basis, alpha, spec.nu, mu, 0.0, t).C1_emp
        C2 = linear_bound_probe(basis, alpha, spec.nu, 0.0, 1.0, t).C2_emp
        L = measure_lipschitz_constant(spec, basis, n_pairs, seed, scale=1.0, with_zero=True)
        B = math.gamma(alpha) * math.gamma(1.0 - p * alpha * mu) / math.gamma(alpha + 1.0 - p * alpha * mu)
        val = (C1 / (C2 * L * B * (2.0 * C1) ** p)) ** (1.0 / (p - 1.0))
        out = SmallnessThreshold(safety * val, f"D^{spec.nu:g}", C1, C2, L, {"mu": mu, "beta": B})
    else:
        C1 = linear_bound_probe(basis, alpha, 1.0, 0.0, 0.0, t).C1_emp
        rng = np.random.default_rng(seed)
        cxi = 0.0
        for _ in range(n_pairs):
            f = random_field(basis, rng, 3.0, amplitude=0.1)
            cxi = max(cxi, orlicz_norm_values(basis, basis.synthesize(f.coeffs)).value
                      / float(hilbert_norm_coeffs(basis.theta, f.coeffs, 1.0)))
        val = math.sqrt(1.0 / 6.0) / (2.0 * C1 * cxi)
        out = SmallnessThreshold(safety * val, "D^1", C1, 0.0, 0.0, {"C_xi": cxi})
    if len(_threshold_cache) > 64:
        _threshold_cache.clear()
    _threshold_cache[key] = out
    return out


# --------------------------------------------------------------------------
# Picard iteration
# --------------------------------------------------------------------------


@dataclass
class _CoreResult:
    coeffs: np.ndarray
    status: str
    reason: str
    iterations: int
    ratios: list
    last_diff: float


def _picard_core(problem, op, S0, C, m_fixed, norm_of, tol, max_iter, threshold, stall=3):
    """Iterate the mild map on nodes m_fixed.. while nodes < m_fixed stay frozen."""
    basis, spec = problem.basis, problem.spec
    n_all = C.shape[0]
    free = list(range(m_fixed, n_all))
    ratios, prev, diff = [], None, math.inf
    G = np.zeros_like(C)
    plain = WeightedNormSpec(0.0, 0.0, norm_of.nu)
    it = 0
    try:
        with np.errstate(over="raise", invalid="raise"):
            G[:m_fixed] = eval_H_coeffs(spec, basis, C[:m_fixed])  # frozen prefix
    except (OverflowError, FloatingPointError) as exc:
        return _CoreResult(C, "blowup", f"source evaluation overflow: {exc}", it, ratios, diff)
    for it in range(1, max_iter + 1):
        try:
            with np.errstate(over="raise", invalid="raise"):
                G[m_fixed:] = eval_H_coeffs(spec, basis, C[m_fixed:])
        except (OverflowError, FloatingPointError) as exc:
            return _CoreResult(C, "blowup", f"source evaluation overflow: {exc}", it, ratios, diff)
        C_new = C.copy()
        C_new[free] = S0[free] + op.apply(G, free)
        if not np.all(np.isfinite(C_new)):
            return _CoreResult(C, "blowup", "nonfinite iterate", it, ratios, diff)
        d = C_new - C
        diff = weighted_sup_norm_coeffs(op.nodes[: n_all], basis.theta, d, norm_of)
        plain_diff = weighted_sup_norm_coeffs(op.nodes[: n_all], basis.theta, d, plain)
        if prev is not None and prev > 0:
            ratios.append(diff / prev)
        prev = diff
        C = C_new
        if threshold is not None:
            peak = float(np.max(hilbert_norm_coeffs(basis.theta, C, 1.0)))
            if not peak <= threshold:
                return _CoreResult(C, "blowup", f"D1 norm {peak:.3g} crossed threshold {threshold:.3g}",
                                   it, ratios, diff)
        if diff <= tol and plain_diff <= tol:
            return _CoreResult(C, "converged", "", it, ratios, diff)
        if len(ratios) >= stall and all(r >= 1.0 for r in ratios[-stall:]):
            return _CoreResult(C, "nonconvergence", f"contraction ratio >= 1 for {stall} iterations",
                               it, ratios, diff)
    return _CoreResult(C, "nonconvergence", f"max_iter={max_iter} reached", max_iter, ratios, diff)


def check_smallness(problem, grid, threshold=None):
    """Raise HypothesisError if polynomial/exponential data exceed the small-data threshold."""
    spec = problem.spec
    if spec is None or spec.kind not in ("polynomial", "exponential"):
        return None
    thr = threshold or smallness_threshold(spec, problem.basis, problem.alpha, grid)
    nu = spec.nu if spec.kind == "polynomial" else 1.0
    size = float(hilbert_norm_coeffs(problem.basis.theta, problem.u0.coeffs, nu))
    if size > thr.value:
        raise HypothesisError(
            f"{spec.kind} source is a small-data result: ||u0||_{thr.norm} = {size:.4g} exceeds the "
            f"threshold {thr.value:.4g} (pass smallness_override=True to run anyway)")
    return thr


def picard_solve(problem, grid, norm_spec=None, tol=1e-9, max_iter=50, kernel=None, norm_threshold=None,
                 smallness_override=False):
    """Global Picard iteration over the whole trajectory.

    Returns (Trajectory, SolveReport).  The first iterate is w_1 = S(t) u0.
    ``kernel`` swaps the propagator family (the classical alpha = 1 oracle
    uses this hook).  With ``smallness_override=False`` polynomial and
    exponential data are checked against :func:`smallness_threshold` first.
    """
    if not smallness_override:
        check_smallness(problem, grid)
    kern, key = _kernel_for(problem, kernel)
    norm_spec = norm_spec or default_norm_spec(problem.spec, problem.alpha)
    nodes = grid.nodes
    u0 = problem.u0.coeffs
    S0 = kern.s_mult(nodes) * u0
    S0[0] = u0
    if problem.spec is None:
        traj = Trajectory(grid, S0, problem.u0)
        rep = SolveReport(True, 1, [], 0.0, None, _norm_history(traj, norm_spec.nu), "converged",
                          "linear problem", norm_spec.sigma, norm_spec.kappa, norm_spec.nu, grid.T)
        return traj, rep
    op = _operator(nodes, key, kern)
    res = _picard_core(problem, op, S0, S0.copy(), 1, norm_spec, tol, max_iter, norm_threshold)
    traj = Trajectory(grid, res.coeffs, problem.u0)
    rep = SolveReport(res.status == "converged", res.iterations, res.ratios, res.last_diff, None,
                      _norm_history(traj, norm_spec.nu), res.status, res.reason, norm_spec.sigma,
                      norm_spec.kappa, norm_spec.nu, grid.T)
    return traj, rep


def _norm_history(traj, nu):
    return hilbert_norm_coeffs(traj.basis.theta, traj.coeffs, nu).tolist()


def extend_and_detect_blowup(problem, T_initial, T_step, norm_threshold=1e6, refine_tol=0.1, horizon=5.0,
                             N_initial=32, r=2.0, nodes_per_step=8, tol=1e-9, max_iter=60, kernel=None):
    """Solve on [0, T_initial], then extend by T_step with the solved prefix frozen.

    A step fails when the source overflows, the D1 norm crosses
    ``norm_threshold`` or Picard stops contracting.  A failed step is bisected
    until the bracket (T_low, T_high) is no wider than ``refine_tol``.
    """
    kern, key = _kernel_for(problem, kernel)
    basis = problem.basis
    norm_of = WeightedNormSpec(0.0, 0.0, 1.0)
    u0 = problem.u0.coeffs
    nodes = np.zeros(1)
    C = u0[None, :].copy()
    op = ConvolutionOperator(nodes, kern)
    total_iters, all_ratios, reasons = 0, [], []
    T_initial = min(T_initial, horizon)

    def attempt(T_end):
        T_cur = nodes[-1]
        if T_cur == 0.0:
            seg = T_end * (np.arange(1, N_initial + 1) / N_initial) ** r
        else:
            seg = T_cur + (T_end - T_cur) * np.arange(1, nodes_per_step + 1) / nodes_per_step
        seg[-1] = T_end
        new_nodes = np.concatenate([nodes, seg])
        m = nodes.size
        op.extend(new_nodes)
        S0 = np.zeros((new_nodes.size, basis.K))
        S0[m:] = kern.s_mult(new_nodes[m:]) * u0
        start = np.concatenate([C, np.repeat(C[-1:], seg.size, axis=0)])
        if m == 1:
            start[1:] = S0[1:]
        res = _picard_core(problem, op, S0, start, m, norm_of, tol, max_iter, norm_threshold)
        if res.status != "converged":
            op.truncate(m)
        return res, new_nodes

    status, reason, bracket = "global", "", None
    target = T_initial
    while True:
        res, new_nodes = attempt(target)
        total_iters += res.iterations
        all_ratios.extend(res.ratios)
        if res.status == "converged":
            nodes, C = new_nodes, res.coeffs
            if nodes[-1] >= horizon - 1e-12:
                break
            target = min(nodes[-1] + T_step, horizon)
            continue
        # bisect the failed step [low, high]
        low, high = nodes[-1], target
        reasons.append(res.reason)
        while high - low > refine_tol:
            mid = 0.5 * (low + high)
            res, new_nodes = attempt(mid)
            total_iters += res.iterations
            if res.status == "converged":
                nodes, C = new_nodes, res.coeffs
                low = mid
            else:
                reasons.append(res.reason)
                high = mid
        status, bracket = "blowup", (float(low), float(high))
        reason = reasons[-1]
        break

    grid = grid_from_nodes(nodes) if nodes.size > 1 else None
    traj = Trajectory(grid, C, problem.u0) if grid is not None else None
    hist = hilbert_norm_coeffs(basis.theta, C, 1.0).tolist()
    rep = SolveReport(status == "global", total_iters, all_ratios, 0.0, bracket, hist, status, reason,
                      0.0, 0.0, 1.0, float(nodes[-1]),
                      extra={"nodes": nodes.tolist(), "failed_step_reasons": reasons})
    return traj, rep


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------


def refine_trajectory(traj, factor=2):
    """Interpolate a graded-mesh trajectory onto the mesh with factor*N nodes.

    Interpolation is linear in the mesh coordinate s = (t/T)^(1/r), in which
    the graded nodes are uniform.
    """
    g = traj.grid
    if g.r is None:
        raise ValueError("refinement needs a graded TimeGrid")
    fine = build_time_grid(g.T, factor * g.N, g.r)
    s_coarse = np.arange(g.N + 1) / g.N
    s_fine = np.arange(fine.N + 1) / fine.N
    coeffs = np.stack([np.interp(s_fine, s_coarse, traj.coeffs[:, k]) for k in range(traj.coeffs.shape[1])],
                      axis=1)
    coeffs[0] = traj.u0.coeffs
    return Trajectory(fine, coeffs, traj.u0)


def mild_residual(traj, problem, nu=1.0, kernel=None, refine=False):
    """max_j ||w(t_j) - S(t_j)u0 - int_0^{t_j} R(t_j - tau) H(w(tau)) dtau||_{D^nu}.

    With ``refine=True`` the states are first interpolated onto the 2N mesh,
    so the value measures the discretization error of the trajectory.
    """
    if refine:
        traj = refine_trajectory(traj, 2)
    kern, key = _kernel_for(problem, kernel)
    nodes = traj.grid.nodes
    S0 = kern.s_mult(nodes) * problem.u0.coeffs
    S0[0] = problem.u0.coeffs
    G = eval_H_coeffs(problem.spec, problem.basis, traj.coeffs)
    if problem.spec is None:
        conv = np.zeros_like(S0)
    else:
        op = _operator(nodes, key, kern)
        conv = op.apply(G, list(range(nodes.size)))
    defect = traj.coeffs - S0 - conv
    return float(np.max(hilbert_norm_coeffs(problem.basis.theta, defect, nu)))


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def write_trajectory_csv(path, traj, nu=1.0, orlicz=False, coeff_dir=None):
    """Columns: node, t, norm_D0, norm_D1, norm_Dnu[, orlicz]; optional per-node coefficient files."""
    b = traj.basis
    cols = ["node", "t", "norm_D0", "norm_D1", "norm_Dnu"] + (["orlicz"] if orlicz else [])
    d0 = hilbert_norm_coeffs(b.theta, traj.coeffs, 0.0)
    d1 = hilbert_norm_coeffs(b.theta, traj.coeffs, 1.0)
    dn = hilbert_norm_coeffs(b.theta, traj.coeffs, nu)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for j, t in enumerate(traj.grid.nodes):
            row = [j, repr(float(t)), repr(float(d0[j])), repr(float(d1[j])), repr(float(dn[j]))]
            if orlicz:
                row.append(repr(orlicz_norm_values(b, b.synthesize(traj.coeffs[j])).value))
            w.writerow(row)
    if coeff_dir is not None:
        coeff_dir = Path(coeff_dir)
        coeff_dir.mkdir(parents=True, exist_ok=True)
        for j, c in enumerate(traj.coeffs):
            with open(coeff_dir / f"node_{j:05d}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow([f"i{a + 1}" for a in range(b.dim)] + ["theta", "coeff"])
                for idx, th, v in zip(b.index, b.theta, c):
                    w.writerow([int(x) for x in idx] + [repr(float(th)), repr(float(v))])


def write_report_json(path, report):
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
