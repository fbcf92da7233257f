"""Gamma, Beta and two-parameter Mittag-Leffler functions on the negative real axis.

The Mittag-Leffler evaluator picks, per argument, the cheapest of three
regimes whose error estimate meets the requested tolerance:

* ``series``      -- the defining power series, compensated summation, with
  a ratio-test tail bound plus a rounding bound proportional to the sum of
  absolute terms;
* ``asymptotic``  -- the algebraic expansion ``-sum z**-k / Gamma(zeta - alpha*k)``
  truncated at its smallest term (valid for ``0 < alpha < 1`` on the negative axis);
* ``integral``    -- a real-line integral representation integrated with the
  trapezoidal rule after the substitution ``s = exp(u)``; the error estimate
  is the difference between step ``h`` and ``h/2``; valid for ``zeta < 1 + alpha``;
* ``recurrence``  -- for larger ``zeta``, ``E_{a,b}(z) = 1/Gamma(b) + z E_{a,b+a}(z)``
  run upward from a base value with ``zeta < 1 + alpha``; each step divides
  the error by ``|z|``, so it is used for ``|z| >= 1`` only.

If no regime certifies the tolerance, :class:`MLAccuracyError` is raised with
the best achieved error.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.special as sc

__all__ = [
    "MLAccuracyError",
    "MLParams",
    "BoundConstant",
    "gamma",
    "lgamma",
    "rgamma",
    "beta",
    "mittag_leffler",
    "mittag_leffler_with_error",
    "mwright_moment",
    "ml_bound_estimate",
]

EPS = np.finfo(float).eps

_GAMMA_MAX = 171.6243769563027  # Gamma(x) overflows beyond this


class MLAccuracyError(ArithmeticError):
    """No evaluation regime reached the requested accuracy."""

    def __init__(self, message, achieved):
        super().__init__(message)
        self.achieved = achieved


def gamma(x):
    """Gamma function for positive real arguments.

    Raises ``ValueError`` for ``x <= 0`` and ``OverflowError`` when the result
    does not fit in a double.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("gamma: argument must be positive")
    if np.any(arr > _GAMMA_MAX):
        raise OverflowError("gamma: result exceeds floating range")
    out = sc.gamma(arr)
    return out.item() if np.ndim(out) == 0 else out


def lgamma(x):
    """log|Gamma(x)| for real x (poles give +inf)."""
    out = sc.gammaln(np.asarray(x, dtype=float))
    return out.item() if np.ndim(out) == 0 else out


def rgamma(x):
    """1/Gamma(x) for any real x; zero at the poles, no overflow for large x."""
    out = sc.rgamma(np.asarray(x, dtype=float))
    return out.item() if np.ndim(out) == 0 else out


def beta(p, q):
    """Beta function B(p, q) = Gamma(p) Gamma(q) / Gamma(p + q) for p, q > 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(~(p > 0)) or np.any(~(q > 0)):
        raise ValueError("beta: arguments must be positive")
    out = sc.beta(p, q)
    return float(out) if np.ndim(out) == 0 else out


def mwright_moment(alpha, mu):
    """Moment of order ``mu`` of the M-Wright density: Gamma(1+mu)/Gamma(1+alpha*mu)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("mwright_moment: alpha must lie in (0, 1)")
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= -1.0):
        raise ValueError("mwright_moment: mu must exceed -1")
    out = np.exp(lgamma(1.0 + mu) - lgamma(1.0 + alpha * mu))
    # lgamma loses a few ulps; use the direct ratio where it is safe
    safe = (1.0 + mu) < 170.0
    direct = np.where(safe, 1.0, 0.0)
    if np.any(safe):
        direct = gamma(np.where(safe, 1.0 + mu, 1.0)) * rgamma(np.where(safe, 1.0 + alpha * mu, 1.0))
        out = np.where(safe, direct, out)
    return out.item() if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# Mittag-Leffler
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MLParams:
    alpha: float
    zeta: float = 1.0
    tol: float = 1e-11

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class BoundConstant:
    """Empirical supremum of |E(z)| (1 + |z|) over a sampled interval."""

    value: float
    alpha: float
    zeta: float
    z_range: tuple
    grid_size: int


def _series(alpha, zeta, x, max_terms=4000):
    """Series for E(-x), x >= 0. Returns value, error bound."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _series_impl(alpha, zeta, x, max_terms)


def _series_impl(alpha, zeta, x, max_terms):
    n = x.size
    value = np.zeros(n)
    err = np.full(n, np.inf)
    at_zero = x == 0
    value[at_zero] = rgamma(zeta)
    err[at_zero] = abs(value[at_zero][0]) * _gamma_relerr(zeta) if at_zero.any() else 0.0
    args, rgs, lgs, relerr, gratio = _series_tables(alpha, zeta, max_terms)

    idx = np.flatnonzero(~at_zero)
    xa = x[idx]
    la = np.log(xa)
    sa = np.zeros(idx.size)
    ca = np.zeros(idx.size)
    round_err = np.zeros(idx.size)
    scale = np.zeros(idx.size)
    for k in range(max_terms):
        if args[k] > 150.0:
            mag = np.exp(k * la - lgs[k])
            term_err = mag * (relerr[k] + EPS * np.abs(k * la))
        else:
            mag = np.power(xa, k) * rgs[k]
            term_err = np.abs(mag) * (relerr[k] + 2.0 * EPS)
        term = -mag if k % 2 else mag
        # Neumaier compensated summation
        t = sa + term
        ca += np.where(np.abs(sa) >= np.abs(term), (sa - t) + term, (term - t) + sa)
        sa = t
        round_err += term_err
        scale = np.maximum(scale, np.abs(sa))
        if k >= 1 and args[k] > 1.5:
            ratio = xa * gratio[k]
            nxt = np.abs(mag) * ratio
            # Gamma(a)/Gamma(a+alpha) decreases in a, so later ratios are <= ratio
            tail = nxt / np.maximum(1.0 - ratio, 1e-300)
            conv = (ratio < 0.95) & (tail <= 1e-17 * np.maximum(scale, 1e-300))
            if conv.any():
                out = idx[conv]
                value[out] = sa[conv] + ca[conv]
                err[out] = tail[conv] + round_err[conv] + 2.0 * EPS * np.abs(value[out])
                keep = ~conv
                idx, xa, la, sa, ca, round_err, scale = (
                    idx[keep], xa[keep], la[keep], sa[keep], ca[keep], round_err[keep], scale[keep])
                if idx.size == 0:
                    break
    if idx.size:
        value[idx] = sa + ca
    return value, err


@functools.lru_cache(maxsize=256)
def _series_tables(alpha, zeta, max_terms):
    ks = np.arange(max_terms)
    args = alpha * ks + zeta
    rgs = rgamma(args)
    lgs = lgamma(args)
    relerr = _gamma_relerr(args)
    # |t_{k+1}| / |t_k| = x * Gamma(a_k) / Gamma(a_k + alpha)
    gratio = np.exp(lgs - lgamma(args + alpha))
    for arr in (args, rgs, lgs, relerr, gratio):
        arr.setflags(write=False)
    return args, rgs, lgs, relerr, gratio


@functools.lru_cache(maxsize=256)
def _asymptotic_coeffs(alpha, zeta, max_terms):
    y = zeta - alpha * np.arange(1, max_terms + 1)
    coef = np.array([float(rgamma(v)) for v in y])
    log_env = np.array([float(lgamma(1.0 - v)) - math.log(math.pi) if v < 0.5 else -float(lgamma(v)) for v in y])
    coef.setflags(write=False)
    log_env.setflags(write=False)
    return coef, log_env


def _gamma_relerr(a):
    """Conservative relative accuracy model of :func:`rgamma`."""
    return EPS * (12.0 + 3.0 * np.abs(a))


def _asymptotic(alpha, zeta, x, max_terms=80):
    """Algebraic expansion for E(-x), x large, 0 < alpha < 1.

    Truncation is driven by the envelope |1/Gamma(y)| <= Gamma(1 - y)/pi
    (y < 0), so a coefficient that happens to sit near a pole of Gamma
    cannot fake a small remainder.
    """
    n = x.size
    total = np.zeros(n)
    value = np.zeros(n)
    err = np.full(n, np.inf)
    frozen = np.zeros(n, dtype=bool)
    last_env = np.full(n, np.inf)
    logx = np.log(x)
    coefs, log_envs = _asymptotic_coeffs(alpha, zeta, max_terms)
    for k in range(1, max_terms + 1):
        coef = coefs[k - 1]
        env = np.exp(log_envs[k - 1] - k * logx)
        growing = env > last_env
        stop_now = growing & ~frozen
        value = np.where(stop_now, total, value)
        err = np.where(stop_now, 10.0 * last_env, err)
        frozen |= growing
        term = -((-1.0) ** k) * coef * np.exp(-k * logx)
        total = np.where(frozen, total, total + term)
        last_env = np.where(frozen, last_env, env)
        if frozen.all():
            break
    open_ = ~frozen
    value = np.where(open_, total, value)
    err = np.where(open_, 10.0 * last_env, err)
    return value, err + 8.0 * EPS * np.abs(value)


def _integral_trap(alpha, zeta, x, h):
    c = alpha - zeta + 1.0
    s1 = math.sin(math.pi * (1.0 - zeta))
    s2 = math.sin(math.pi * (1.0 - zeta + alpha))
    ca = math.cos(math.pi * alpha)
    u_hi = math.log(40.0)
    u_lo = math.log(1e-18 * c) / c + min(0.0, float(np.min(np.log(x))) / alpha) - 2.0
    u = np.arange(u_lo, u_hi + h, h)
    eu = np.exp(u)
    ea = np.exp(alpha * u)
    base = np.exp(-eu + c * u) / math.pi
    out = np.empty(x.size)
    chunk = max(1, 2_000_000 // u.size)
    for i in range(0, x.size, chunk):
        xs = x[i : i + chunk, None]
        num = ea * s1 + xs * s2
        den = ea * ea + 2.0 * xs * ea * ca + xs * xs
        out[i : i + chunk] = h * np.sum(base * num / den, axis=1)
    return out


def _integral(alpha, zeta, x):
    """Integral representation for E(-x), valid for zeta < 1 + alpha, 0 < alpha < 1."""
    d = math.pi * (1.0 - alpha) / alpha  # distance of the poles from the real u-axis
    h = min(0.2, 2.0 * math.pi * min(d, 1.2) / 50.0)
    coarse = _integral_trap(alpha, zeta, x, 2.0 * h)
    fine = _integral_trap(alpha, zeta, x, h)
    err = np.abs(fine - coarse) + 64.0 * EPS * np.abs(fine) + 1e-17
    return fine, err


def _recurrence(alpha, zeta, x):
    """Lower zeta through E_{a,b}(z) = 1/Gamma(b) + z E_{a,b+a}(z); stable for |z| >= 1."""
    if alpha == 1.0:
        m = int(round(zeta - 1.0))
        base_zeta = 1.0
        if m < 1 or abs(zeta - 1.0 - m) > 1e-12:
            return np.full(x.size, np.nan), np.full(x.size, np.inf)
        value = np.exp(-x)
        err = 2.0 * EPS * value
    else:
        # base zeta in (1 - alpha, 1], comfortably inside the integral regime
        m = max(1, int(math.ceil((zeta - 1.0) / alpha - 1e-9)))
        base_zeta = zeta - m * alpha
        value, err, _ = mittag_leffler_with_error(MLParams(alpha, base_zeta, 1e-15), -x)
    for i in range(m):
        b = base_zeta + i * alpha
        rg = rgamma(b)
        value = (value - rg) / (-x)
        err = (err + 2.0 * EPS * abs(rg)) / x
    return value, err


def mittag_leffler_with_error(params, z, method="auto"):
    """Evaluate E_{alpha,zeta}(z) for z <= 0 and return (value, error estimate, regime codes).

    Regime codes: 0 series, 1 asymptotic, 2 integral, 3 recurrence. ``method`` forces a
    single regime (``"series"``, ``"asymptotic"``, ``"integral"`` or ``"recurrence"``).
    """
    alpha, zeta, tol = params.alpha, params.zeta, params.tol
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr > 0) or np.any(np.isnan(z_arr)):
        raise ValueError("mittag_leffler: argument must be nonpositive")
    x = -z_arr.ravel()
    value = np.full(x.size, np.nan)
    err = np.full(x.size, np.inf)
    regime = np.full(x.size, -1, dtype=int)

    def take(mask, fn, code):
        if not np.any(mask):
            return
        v, e = fn(alpha, zeta, x[mask])
        better = e < err[mask]
        idx = np.flatnonzero(mask)[better]
        value[idx] = v[better]
        err[idx] = e[better]
        regime[idx] = code

    if alpha == 1.0 and zeta == 1.0 and method == "auto":
        # classical reduction E_{1,1}(z) = exp(z)
        value = np.exp(-x)
        err = 2.0 * EPS * value
        regime[:] = 0
        methods = []
    elif alpha == 1.0:
        methods = ["series", "recurrence"] if method == "auto" else [method]
    elif method == "auto":
        methods = ["series", "asymptotic", "integral", "recurrence"]
    else:
        methods = [method]
    for m in methods:
        todo = err > tol
        if m == "series":
            # cancellation makes the series useless once E(|z|) * eps exceeds tol;
            # only try where |z|**(1/alpha) stays moderate
            reach = math.log(max(tol, 1e-300) / (40.0 * EPS)) + 3.0
            cand = todo if method != "auto" else todo & (np.power(x, 1.0 / alpha) < reach)
            take(cand, _series, 0)
        elif m == "asymptotic":
            if alpha >= 1.0:
                continue
            cand = todo & (x > 0) if method != "auto" else todo & (x >= 2.0)
            take(cand, _asymptotic, 1)
        elif m == "integral":
            if alpha >= 1.0 or zeta >= 1.0 + alpha:
                continue
            take(todo & (x > 0), _integral, 2)
        elif m == "recurrence":
            if zeta < 1.0 + alpha and alpha < 1.0:
                continue
            take(todo & (x >= 1.0), _recurrence, 3)
        else:
            raise ValueError(f"unknown method {m!r}")
    shape = z_arr.shape
    return value.reshape(shape), err.reshape(shape), regime.reshape(shape)


def mittag_leffler(params, z, method="auto"):
    """Two-parameter Mittag-Leffler function E_{alpha,zeta}(z) on z <= 0.

    Accepts scalars or arrays. Raises :class:`MLAccuracyError` when the
    achieved error at some point exceeds ``params.tol``.
    """
    value, err, _ = mittag_leffler_with_error(params, z, method=method)
    worst = float(np.max(err)) if np.size(err) else 0.0
    if worst > params.tol:
        raise MLAccuracyError(
            f"E_{{{params.alpha},{params.zeta}}}: achieved error {worst:.3g} > tol {params.tol:.3g}",
            achieved=worst,
        )
    return value.item() if np.ndim(value) == 0 else value


def ml_bound_estimate(params, z_min, grid_size):
    """Empirical constant M with |E(z)| <= M / (1 + |z|) on [z_min, 0].

    Samples a log-spaced grid of |z| (plus z = 0), then polishes the best
    interior sample by a bounded local search so that the returned value
    also dominates nearby unsampled points.
    """
    if z_min > 0:
        raise ValueError("z_min must be nonpositive")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    xmax = -float(z_min)
    if xmax == 0.0:
        xs = np.zeros(1)
    else:
        lo = min(1e-6, xmax * 1e-3)
        xs = np.concatenate([[0.0], np.geomspace(lo, xmax, grid_size - 1)])
    vals = np.abs(mittag_leffler(params, -xs)) * (1.0 + xs)
    best = int(np.argmax(vals))
    value = float(vals[best])
    if 0 < best < xs.size - 1:
        from scipy.optimize import minimize_scalar

        f = lambda t: -abs(float(mittag_leffler(params, -t))) * (1.0 + t)
        res = minimize_scalar(f, bounds=(xs[best - 1], xs[best + 1]), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, xs[best])})
        value = max(value, -float(res.fun))
    return BoundConstant(value=value, alpha=params.alpha, zeta=params.zeta,
                         z_range=(float(z_min), 0.0), grid_size=int(grid_size))
