"""Solution operators S(t) and R(t) as diagonal multipliers in the eigenbasis.

For eigenvalue theta and lam = theta / (1 + theta):

    S(t):  E_alpha(-lam t^alpha)
    R(t):  t^(alpha-1) / (1 + theta) * E_{alpha,alpha}(-lam t^alpha)

Because lam < 1 the Mittag-Leffler arguments never exceed t^alpha in size.
"""

from __future__ import annotations

import csv
import math
import threading
import weakref
from dataclasses import dataclass

import numpy as np

from .special_functions import MLParams, mittag_leffler, ml_bound_estimate

__all__ = [
    "PropagatorMultipliers",
    "ML_TOL",
    "s_multiplier",
    "r_smooth_multiplier",
    "s_derivative_multiplier",
    "multipliers",
    "apply_S",
    "apply_R",
    "LinearBoundProbe",
    "linear_bound_probe",
    "proof_bounds",
    "kernel_continuity_modulus",
    "continuity_bound",
    "export_probe_csv",
    "clear_cache",
]

ML_TOL = 1e-11


@dataclass(frozen=True)
class PropagatorMultipliers:
    t: float
    alpha: float
    s_mult: np.ndarray
    r_mult: np.ndarray | None  # None at t = 0, where R is singular


def _lam(theta):
    theta = np.asarray(theta, dtype=float)
    return theta / (1.0 + theta)


def s_multiplier(theta, alpha, t):
    """E_alpha(-theta t^alpha/(1+theta)) on the outer product of times ``t`` and eigenvalues."""
    t = np.asarray(t, dtype=float)
    z = -np.multiply.outer(np.power(t, alpha), _lam(theta))
    return mittag_leffler(MLParams(alpha, 1.0, ML_TOL), z)


def r_smooth_multiplier(theta, alpha, s):
    """E_{alpha,alpha}(-theta s^alpha/(1+theta)) / (1+theta): R without its s^(alpha-1) factor.

    Well defined at s = 0, where it equals 1 / ((1+theta) Gamma(alpha)).
    """
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    z = -np.multiply.outer(np.power(s, alpha), _lam(theta))
    return mittag_leffler(MLParams(alpha, alpha, ML_TOL), z) / (1.0 + theta)


def s_derivative_multiplier(theta, alpha, t):
    """d/dt of the S multiplier: -lam t^(alpha-1) E_{alpha,alpha}(-lam t^alpha), t > 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("derivative multiplier needs t > 0")
    z = -np.multiply.outer(np.power(t, alpha), _lam(theta))
    e = mittag_leffler(MLParams(alpha, alpha, ML_TOL), z)
    return -np.multiply.outer(np.power(t, alpha - 1.0), _lam(theta)) * e


_cache = weakref.WeakKeyDictionary()
_cache_lock = threading.Lock()


def clear_cache():
    with _cache_lock:
        _cache.clear()


def multipliers(basis, alpha, t):
    """Memoized multiplier vectors for one (basis, alpha, t)."""
    t = float(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    key = (float(alpha), t)
    table = _cache.get(basis)
    if table is not None and key in table:
        return table[key]
    s = s_multiplier(basis.theta, alpha, t)
    r = None if t == 0.0 else t ** (alpha - 1.0) * r_smooth_multiplier(basis.theta, alpha, t)
    for arr in (s, r):
        if arr is not None:
            arr.setflags(write=False)
    out = PropagatorMultipliers(t, float(alpha), s, r)
    with _cache_lock:
        # idempotent insert: a concurrent duplicate computes the same arrays
        _cache.setdefault(basis, {})[key] = out
    return out


def _check_basis(field, basis):
    if basis is not None and basis is not field.basis:
        raise ValueError("field lives on a different basis")


def apply_S(t, field, alpha, basis=None):
    _check_basis(field, basis)
    if t == 0:
        return field
    m = multipliers(field.basis, alpha, t)
    return field.with_coeffs(m.s_mult * field.coeffs)


def apply_R(t, field, alpha, basis=None):
    _check_basis(field, basis)
    if not t > 0:
        raise ValueError("R(t) is singular at t = 0; use the product-integration weights instead")
    m = multipliers(field.basis, alpha, t)
    return field.with_coeffs(m.r_mult * field.coeffs)


@dataclass(frozen=True)
class LinearBoundProbe:
    alpha: float
    mu: float
    nu_star: float
    C1_emp: float
    C2_emp: float
    t_grid: np.ndarray
    c1_table: np.ndarray  # (t, k): t^(alpha mu) |S multiplier|
    c2_table: np.ndarray  # (t, k): theta^(nu*/2) t^(1-alpha) |R multiplier|


def linear_bound_probe(basis, alpha, nu, mu, nu_star, t_grid):
    """Measured constants C1, C2 with ||S(t)|| <= C1 t^(-alpha mu), ||R(t)|| <= C2 t^(alpha-1).

    Both operators are diagonal, so the D^nu -> D^nu norm of S is the largest
    multiplier and the D^(nu-nu*) -> D^nu norm of R is the largest
    theta^(nu*/2)-weighted multiplier; ``nu`` itself drops out.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    if not 0.0 <= nu_star <= 2.0:
        raise ValueError("nu_star must lie in [0, 2]")
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t_grid must be strictly positive")
    theta = basis.theta
    c1 = np.abs(s_multiplier(theta, alpha, t)) * np.power(t, alpha * mu)[:, None]
    c2 = np.abs(r_smooth_multiplier(theta, alpha, t)) * np.power(theta, 0.5 * nu_star)
    return LinearBoundProbe(float(alpha), float(mu), float(nu_star), float(c1.max()),
                            float(c2.max()), t, c1, c2)


def proof_bounds(basis, alpha, t_max, grid_size=512):
    """Closed-form constants from the proof of the linear estimates.

    Returns a dict with the S-bounds keyed by ``("mu", value)`` for
    mu in {0, 0.5, 1} and the R-bounds keyed by ``("nu_star", value)`` for
    nu* in {0, 1, 2}.  The Mittag-Leffler constants are measured over the
    argument range the operators actually see, [-t_max^alpha, 0].
    """
    zmin = -float(t_max) ** alpha
    M1 = ml_bound_estimate(MLParams(alpha, 1.0, ML_TOL), zmin, grid_size).value
    Maa = ml_bound_estimate(MLParams(alpha, alpha, ML_TOL), zmin, grid_size).value
    th1 = float(basis.theta[0])
    out = {("mu", 0.0): M1, ("mu", 1.0): math.sqrt(2.0) * M1 * math.sqrt(1.0 + 1.0 / th1 ** 2)}
    mu = 0.5
    c_mu = (mu / math.e) ** mu  # sup_z z^mu e^(-z)
    out[("mu", mu)] = c_mu * (1.0 / th1 + 1.0) ** mu * math.gamma(1 - mu) / math.gamma(1 - alpha * mu)
    for ns in (0.0, 1.0, 2.0):
        # theta^(nu*/2) / (1 + theta) <= theta_1^(nu*/2 - 1) for nu* <= 2
        out[("nu_star", ns)] = Maa * th1 ** (0.5 * ns - 1.0)
    return out


def kernel_continuity_modulus(basis, alpha, k, t, tau, eps):
    """|a^(alpha-1) E_{alpha,alpha}(-lam a^alpha) - b^(alpha-1) E_{alpha,alpha}(-lam b^alpha)|

    with a = t + eps - tau, b = t - tau and ``k`` the 0-based mode position.
    """
    if not 0.0 < tau < t:
        raise ValueError("need 0 < tau < t")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return 0.0
    theta = float(basis.theta[k])
    lam = theta / (1.0 + theta)
    a, b = t + eps - tau, t - tau
    p = MLParams(alpha, alpha, ML_TOL)
    ea, eb = mittag_leffler(p, [-lam * a ** alpha, -lam * b ** alpha])
    return float(abs(a ** (alpha - 1.0) * ea - b ** (alpha - 1.0) * eb))


def continuity_bound(alpha, t, tau, eps, M):
    """M (1-alpha)^(-1) |(t+eps-tau)^(alpha-1) - (t-tau)^(alpha-1)|.

    ``M`` must bound |E_{alpha,alpha-1}| on the relevant range, since the
    derivative of r^(alpha-1) E_{alpha,alpha}(-lam r^alpha) is
    r^(alpha-2) E_{alpha,alpha-1}(-lam r^alpha).
    """
    a, b = t + eps - tau, t - tau
    return M / (1.0 - alpha) * abs(a ** (alpha - 1.0) - b ** (alpha - 1.0))


def export_probe_csv(path, probe, bound_c1=None, bound_c2=None):
    """One row per (t, mode, quantity): columns t, k, quantity, bound, measured."""
    fmt = lambda v: "" if v is None else repr(float(v))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "quantity", "bound", "measured"])
        for i, t in enumerate(probe.t_grid):
            for k in range(probe.c1_table.shape[1]):
                w.writerow([repr(float(t)), k + 1, "C1", fmt(bound_c1), repr(float(probe.c1_table[i, k]))])
                w.writerow([repr(float(t)), k + 1, "C2", fmt(bound_c2), repr(float(probe.c2_table[i, k]))])
