"""Independent reference computations for testing.

Nothing here is used by the production solve path.  The Mittag-Leffler
oracle works in arbitrary precision (mpmath), the classical solver swaps the
Mittag-Leffler multipliers for exponentials, and the Gronwall checker tests
the conditional fractional Gronwall inequality on sampled functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammainc, gammaln

from .picard_solver import Problem, panel_weights, picard_solve

__all__ = [
    "OracleResult",
    "OracleRefusal",
    "ml_highprec",
    "ml_positive",
    "ClassicalKernel",
    "classical_solver",
    "GronwallResult",
    "gronwall_verify",
    "volterra_fixed_point",
    "q_kernel_closed_form",
    "lebesgue_norm_bruteforce",
]

ORACLE_MAX_ABS_Z = 30.0
_SERIES_MAX_DIGITS = 60  # above this the alternating series gets slow


class OracleRefusal(ValueError):
    """The oracle declines an argument outside its certified range."""


@dataclass(frozen=True)
class OracleResult:
    value: float
    certified_error: float
    terms_or_points: int
    method: str = "series"


_SERIES_MAX_TERMS = 4000


def _series_plan(alpha, zeta, x, target_err):
    """(log10 of the largest term, index where the geometric tail bound drops below target) or None."""
    if x == 0.0:
        return -gammaln(zeta) / math.log(10.0), 1
    k = np.arange(_SERIES_MAX_TERMS + 1, dtype=float)
    c = alpha * k + zeta
    ok = c > 0
    logt = np.where(ok, k * math.log(x) - gammaln(np.where(ok, c, 1.0)), -np.inf)
    peak = float(np.max(logt)) / math.log(10.0)
    log_ratio = math.log(x) + gammaln(np.where(ok, c, 1.0)) - gammaln(np.where(ok, c, 1.0) + alpha)
    with np.errstate(over="ignore", divide="ignore"):
        bound = np.where(log_ratio < 0, np.exp(logt) / -np.expm1(np.minimum(log_ratio, 0.0)), np.inf)
    stop = np.flatnonzero(ok & (log_ratio < math.log(0.5)) & (bound < target_err))
    return peak, (int(stop[0]) if stop.size else None)


def ml_highprec(alpha, zeta, z, target_err=1e-20):
    """E_{alpha,zeta}(z) for real z in [-30, 0] in extended precision.

    Primary method: the power series summed with enough guard digits to
    absorb the cancellation between alternating terms, truncated once the
    remaining terms are dominated by a geometric tail below ``target_err``.
    When the cancellation would need more than ``_SERIES_MAX_DIGITS`` digits
    (small alpha, large |z|), the function is instead recovered by numerical
    Laplace inversion in extended precision; that error is an estimate, not
    a bound.
    """
    z = float(z)
    if z > 0.0 or abs(z) > ORACLE_MAX_ABS_Z:
        raise OracleRefusal(f"ml_highprec covers z in [-{ORACLE_MAX_ABS_Z}, 0]; got z = {z}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    x = -z
    digits, stop = _series_plan(alpha, zeta, x, target_err)
    goal = -math.log10(target_err)
    if stop is not None and (digits <= _SERIES_MAX_DIGITS or alpha == 1.0):
        return _ml_series(alpha, zeta, x, digits, goal, target_err)
    return _ml_talbot(alpha, zeta, x)


def _ml_series(alpha, zeta, x, peak_digits, goal, target_err):
    dps = int(max(peak_digits, 0) + goal + 20)
    lx = math.log(x) if x > 0 else -math.inf
    with mpmath.workdps(dps):
        a, b, mx = mpmath.mpf(alpha), mpmath.mpf(zeta), -mpmath.mpf(x)
        s = mpmath.mpf(0)
        k = 0
        tail = 0.0
        while True:
            s += mx ** k * mpmath.rgamma(a * k + b)
            k += 1
            if x == 0.0:
                break
            c = alpha * k + zeta
            if c > 0:
                # Gamma(c)/Gamma(c+alpha) decreases in c: the current ratio bounds
                # every later one, so the tail is geometric
                log_ratio = lx + math.lgamma(c) - math.lgamma(c + alpha)
                if log_ratio < math.log(0.5):
                    log_next = k * lx - math.lgamma(c)
                    bound = math.exp(log_next) / (1.0 - math.exp(log_ratio))
                    if bound < target_err:
                        tail = 2.0 * bound  # factor 2 covers float rounding of the log terms
                        break
            if k > 200000:
                raise RuntimeError("series did not terminate")
        rounding = float(mpmath.mpf(10) ** (int(peak_digits) + 2 - dps))
        return OracleResult(float(s), tail + rounding + abs(float(s)) * 2.0 ** -53, k, "series")


def _ml_talbot(alpha, zeta, x):
    """Laplace inversion of s^(alpha-zeta)/(s^alpha + x) at t = 1 on the Talbot contour.

    The error estimate is the change between runs at 20 and 30 digits (the
    contour resolution scales with the working precision).
    """
    F = lambda s: s ** (alpha - zeta) / (s ** alpha + x)
    with mpmath.workdps(20):
        lo = mpmath.invertlaplace(F, 1, method="talbot")
    with mpmath.workdps(30):
        hi = mpmath.invertlaplace(F, 1, method="talbot")
    err = float(abs(hi - lo))
    return OracleResult(float(hi), err + abs(float(hi)) * 2.0 ** -53, 0, "talbot")


def ml_positive(alpha, x, zeta=1.0, rtol=1e-15):
    """E_{alpha,zeta}(x) for x >= 0.

    All terms are positive, so plain summation in double precision is
    accurate to a few ulps; the loop stops once the geometric tail bound
    falls below ``rtol`` times the partial sum.
    """
    if x < 0:
        raise ValueError("ml_positive needs x >= 0")
    if x == 0:
        return 1.0 / math.gamma(zeta)
    lx = math.log(x)
    terms, running = [], 0.0
    k = 0
    while True:
        c = alpha * k + zeta
        lt = k * lx - math.lgamma(c)
        if lt > 709.0:
            raise OverflowError(f"ml_positive: E_{{{alpha},{zeta}}}({x}) exceeds the floating range")
        terms.append(math.exp(lt))
        running += terms[-1]
        k += 1
        c = alpha * k + zeta
        log_ratio = lx + math.lgamma(c) - math.lgamma(c + alpha)
        if log_ratio < math.log(0.5):
            nxt = math.exp(k * lx - math.lgamma(c))
            if nxt / -math.expm1(log_ratio) <= 0.5 * rtol * running:
                return math.fsum(terms)


# --------------------------------------------------------------------------
# classical alpha = 1 solver
# --------------------------------------------------------------------------


class ClassicalKernel:
    """Exponential multipliers of the alpha = 1 problem: S = e^(-lam t), R = e^(-lam t)/(1+theta)."""

    alpha = 1.0

    def __init__(self, theta):
        self.theta = np.asarray(theta, dtype=float)
        self.lam = self.theta / (1.0 + self.theta)

    def s_mult(self, t):
        return np.exp(-np.multiply.outer(np.asarray(t, dtype=float), self.lam))

    def smooth(self, s):
        return self.s_mult(s) / (1.0 + self.theta)

    def moments(self, s):
        x = np.multiply.outer(np.asarray(s, dtype=float), self.lam)
        c = 1.0 + self.theta
        m0 = -np.expm1(-x) / self.lam / c
        m1 = gammainc(2.0, x) / self.lam ** 2 / c  # lower incomplete Gamma(2, x) = 1 - e^-x (1+x)
        return m0, m1


def classical_solver(basis, u0, spec, grid, tol=1e-9, max_iter=50, norm_spec=None, return_report=False):
    """Picard solve of the alpha = 1 problem with exponential multipliers."""
    problem = Problem(basis, 1.0, u0, spec)
    traj, rep = picard_solve(problem, grid, norm_spec=norm_spec, tol=tol, max_iter=max_iter,
                             kernel=ClassicalKernel(basis.theta))
    return (traj, rep) if return_report else traj


# --------------------------------------------------------------------------
# fractional Gronwall
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GronwallResult:
    ok: bool  # no node where the premise holds up to t_j but the conclusion fails
    margin: float  # min relative gap (bound - w)/bound over nodes where the conclusion is tested
    premise_holds: np.ndarray  # per node, premise satisfied on [0, t_j]
    bound: np.ndarray
    violations: tuple  # node indices of conditional violations


def _rl_matrix(t, alpha):
    """A with (A w)_j = int_0^{t_j} (t_j - tau)^(alpha-1) w_lin(tau) dtau for piecewise-linear w."""
    A = np.zeros((t.size, t.size))
    for j in range(1, t.size):
        A[j, : j + 1] = panel_weights(t, j, alpha)
    return A


def gronwall_verify(m, n, alpha, t, w, rtol=1e-12, subdivide=4):
    """Check w(t) <= m E_alpha(n Gamma(alpha) t^alpha) wherever the premise holds.

    ``w`` is taken as the piecewise-linear function through the samples.  The
    premise w(t) <= m + n int_0^t (t-tau)^(alpha-1) w(tau) dtau is evaluated
    exactly for that function at the nodes and at ``subdivide - 1`` interior
    points per panel.  The conclusion at t_j is asserted only if the premise
    held at every check point up to t_j.
    """
    if not (m > 0 and n > 0):
        raise ValueError("m and n must be positive")
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    if t.shape != w.shape or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("t must be an increasing grid starting at 0, matching w")
    if np.any(w < 0):
        raise ValueError("w must be nonnegative")
    sub = max(int(subdivide), 1)
    fine_t = np.concatenate([np.linspace(t[i], t[i + 1], sub + 1)[:-1] for i in range(t.size - 1)] + [t[-1:]])
    fine_w = np.interp(fine_t, t, w)
    rhs = m + n * (_rl_matrix(fine_t, alpha) @ fine_w)
    ok_fine = np.logical_and.accumulate(fine_w <= rhs * (1.0 + rtol))
    premise = ok_fine[::sub]
    g = math.gamma(alpha)
    bound = np.array([m * ml_positive(alpha, n * g * tj ** alpha) for tj in t])
    tested = np.flatnonzero(premise[1:]) + 1  # at t = 0 both sides equal m
    gaps = (bound[tested] - w[tested]) / bound[tested]
    bad = tuple(int(j) for j in tested[gaps < -rtol])
    margin = float(gaps.min()) if tested.size else math.inf
    return GronwallResult(not bad, margin, premise, bound, bad)


def volterra_fixed_point(m, n, alpha, t, iters=500, tol=1e-14):
    """Node values of the fixed point of w = m + n int_0^t (t-tau)^(alpha-1) w."""
    t = np.asarray(t, dtype=float)
    A = _rl_matrix(t, alpha)
    w = np.full(t.size, float(m))
    for _ in range(iters):
        new = m + n * (A @ w)
        if np.max(np.abs(new - w)) <= tol * np.max(np.abs(new)):
            return new
        w = new
    return w


# --------------------------------------------------------------------------
# closed forms and brute-force norms
# --------------------------------------------------------------------------


def q_kernel_closed_form(t, h, sigma, alpha, dps=30):
    """t^alpha B(alpha, 1-h) 1F1(alpha; alpha+1-h; -sigma t)."""
    with mpmath.workdps(dps):
        v = (mpmath.mpf(t) ** alpha * mpmath.beta(alpha, 1 - mpmath.mpf(h))
             * mpmath.hyp1f1(alpha, alpha + 1 - mpmath.mpf(h), -mpmath.mpf(sigma) * t))
    return float(v)


def lebesgue_norm_bruteforce(basis, coeffs, p, n=400):
    """||u||_{L^p} by the composite midpoint rule on an n^d grid (independent of Gauss quadrature)."""
    d = basis.dim
    L = basis.domain.lengths
    axes = [(np.arange(n) + 0.5) * (L[a] / n) for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    u = np.zeros(mesh[0].shape)
    for idx, c, nc in zip(basis.index, np.asarray(coeffs, float), basis.norm_const):
        term = nc * c
        for a in range(d):
            term = term * np.sin(idx[a] * np.pi * mesh[a] / L[a])
        u = u + term
    cell = np.prod([L[a] / n for a in range(d)])
    return float((np.sum(np.abs(u) ** p) * cell) ** (1.0 / p))
