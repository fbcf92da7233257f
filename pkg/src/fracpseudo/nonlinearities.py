"""Source terms H(u), evaluated pseudo-spectrally on the quadrature grid.

Kinds
-----
advection      H(u) = (eta . grad) u
bbm_burgers    H(u) = (eta . grad) u + div F(u),  F(u) = (u^2, ..., u^2)
polynomial     H(u) = |u|^(p-1) u
exponential    H(u) = u^3 exp(u^2)

Gradients of sine modes are evaluated analytically.  The divergence term is
projected through integration by parts, <d_j(u^2), phi_k> = -<u^2, d_j phi_k>,
which is exact because u^2 vanishes on the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral_domain import (SpectralField, hilbert_norm, lebesgue_norm_values, orlicz_norm,
                              orlicz_norm_values, random_field)

__all__ = [
    "KINDS",
    "HypothesisError",
    "NonlinearitySpec",
    "EXP_GUARD",
    "eval_H",
    "eval_H_coeffs",
    "lipschitz_ratio",
    "measure_lipschitz_constant",
    "exponential_moment",
    "polynomial_nu_window",
]

KINDS = ("advection", "bbm_burgers", "polynomial", "exponential")
EXP_GUARD = 25.0  # |u| above this would overflow u^3 exp(u^2); treated as blow-up


class HypothesisError(ValueError):
    """A parameter combination violates a hypothesis of the corresponding existence theorem."""


def polynomial_nu_window(d, p):
    """Upper end of the admissible regularity window 0 < nu < min{1, (d+2-2(p-1)d)/(2-4(p-1))}."""
    den = 2.0 - 4.0 * (p - 1.0)
    if den == 0.0:
        return 1.0
    return min(1.0, (d + 2.0 - 2.0 * (p - 1.0) * d) / den)


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str
    eta: tuple = ()
    p: float | None = None
    nu: float = 1.0  # regularity index the polynomial estimate works in

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        if self.kind in ("advection", "bbm_burgers") and not self.eta:
            raise ValueError(f"{self.kind} needs a constant vector eta")
        if self.kind == "polynomial":
            if self.p is None or not self.p > 2.0:
                raise HypothesisError("polynomial source |u|^(p-1)u requires p > 2")

    @property
    def input_nu(self):
        return self.nu if self.kind == "polynomial" else 1.0

    @property
    def output_nu(self):
        return {"advection": 0.0, "bbm_burgers": -1.0, "polynomial": self.nu - 1.0,
                "exponential": 0.0}[self.kind]

    def validate(self, d, alpha=None):
        """Check the theorem hypotheses for a d-dimensional domain and order alpha."""
        if self.kind in ("advection", "bbm_burgers") and len(self.eta) != d:
            raise HypothesisError(f"eta has {len(self.eta)} components but the domain has dimension {d}")
        if self.kind == "bbm_burgers" and d != 2:
            raise HypothesisError("bbm_burgers is implemented for d = 2 only")
        if self.kind == "exponential":
            if d != 2:
                raise HypothesisError("exponential source requires d = 2 (exponential Orlicz embedding of D^1)")
            if alpha is not None and not 0.0 < alpha < 2.0 / 3.0:
                raise HypothesisError("exponential source requires alpha in (0, 2/3)")
        if self.kind == "polynomial":
            p = self.p
            if alpha is not None and not p / (p - 1.0) < 1.0 / alpha:
                raise HypothesisError(
                    f"polynomial source requires p/(p-1) < 1/alpha; got p/(p-1) = {p / (p - 1):.4g}, "
                    f"1/alpha = {1 / alpha:.4g}")
            upper = polynomial_nu_window(d, p)
            if upper <= 0.0:
                raise HypothesisError(f"polynomial source: empty regularity window for d={d}, p={p}")
            if not 0.0 < self.nu < upper:
                raise HypothesisError(
                    f"polynomial source requires 0 < nu < min(1, (d+2-2(p-1)d)/(2-4(p-1))) = {upper:.4g}; "
                    f"got nu = {self.nu}")
        return self

    def to_dict(self):
        d = {"kind": self.kind}
        if self.eta:
            d["eta"] = list(self.eta)
        if self.kind == "polynomial":
            d["p"] = self.p
            d["nu"] = self.nu
        return d


def _gradient_sum(basis, coeffs, eta):
    out = np.zeros(np.shape(coeffs)[:-1] + basis.grid_shape)
    for a, e in enumerate(eta):
        if e != 0.0:
            out = out + e * basis.synthesize(coeffs, deriv=a)
    return out


def eval_H_coeffs(spec, basis, coeffs):
    """Spectral coefficients of H(u) for coefficient arrays of shape (..., K)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if spec is None:
        return np.zeros_like(coeffs)
    if spec.kind in ("advection", "bbm_burgers") and len(spec.eta) != basis.dim:
        raise ValueError(f"eta has {len(spec.eta)} components, basis dimension is {basis.dim}")
    if spec.kind == "advection":
        return basis.project(_gradient_sum(basis, coeffs, spec.eta))
    if spec.kind == "bbm_burgers":
        u = basis.synthesize(coeffs)
        adv = basis.project(_gradient_sum(basis, coeffs, spec.eta))
        sq = u * u
        if not np.all(np.isfinite(sq)):
            raise OverflowError("bbm_burgers: nonfinite u^2")
        div = sum(basis.project(sq, deriv=a) for a in range(basis.dim))
        return adv - div
    u = basis.synthesize(coeffs)
    if spec.kind == "polynomial":
        with np.errstate(over="ignore", invalid="ignore"):
            h = np.power(np.abs(u), spec.p - 1.0) * u
        if not np.all(np.isfinite(h)):
            raise OverflowError("polynomial source overflowed")
        return basis.project(h)
    # exponential
    peak = float(np.max(np.abs(u))) if u.size else 0.0
    if not peak <= EXP_GUARD:
        raise OverflowError(f"exponential source: |u| = {peak:.3g} exceeds the overflow guard {EXP_GUARD}")
    return basis.project(u ** 3 * np.exp(u * u))


def eval_H(spec, field):
    out = eval_H_coeffs(spec, field.basis, field.coeffs)
    nu = 0.0 if spec is None else spec.output_nu
    return SpectralField(field.basis, out, nu)


def _exp_factor(o):
    return math.sqrt(math.gamma(3)) + math.sqrt(math.gamma(4)) * (6.0 * o * o) ** (1.0 / 6.0)


def lipschitz_ratio(spec, u, v):
    """||H(u) - H(v)||_out / (kind-specific product of input norms)."""
    diff = u - v
    if not np.any(diff.coeffs):
        raise ZeroDivisionError("lipschitz_ratio needs u != v")
    num = hilbert_norm(eval_H(spec, u) - eval_H(spec, v), spec.output_nu)
    if spec.kind == "advection":
        den = hilbert_norm(diff, 1.0)
    elif spec.kind == "bbm_burgers":
        den = (hilbert_norm(u, 1.0) + hilbert_norm(v, 1.0) + 1.0) * hilbert_norm(diff, 1.0)
    elif spec.kind == "polynomial":
        nu, q = spec.nu, spec.p - 1.0
        den = (hilbert_norm(u, nu) ** q + hilbert_norm(v, nu) ** q) * hilbert_norm(diff, nu)
    else:
        ou, ov = orlicz_norm(u).value, orlicz_norm(v).value
        den = (ou ** 2 * _exp_factor(ou) + ov ** 2 * _exp_factor(ov)) * orlicz_norm(diff).value
    if den == 0.0:
        raise ZeroDivisionError("lipschitz_ratio: vanishing denominator")
    return num / den


def measure_lipschitz_constant(spec, basis, n_pairs=100, seed=0, scale=1.0, decay=2.0, with_zero=False):
    """Empirical supremum of :func:`lipschitz_ratio` over random pairs (v = 0 if ``with_zero``)."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_pairs):
        u = random_field(basis, rng, decay, amplitude=scale * rng.uniform(0.1, 1.0))
        if with_zero:
            v = u * 0.0
        else:
            v = random_field(basis, rng, decay, amplitude=scale * rng.uniform(0.1, 1.0))
        best = max(best, lipschitz_ratio(spec, u, v))
    return best


def exponential_moment(field):
    """(||exp(u^2) - 1||_{L^6}^6, 6 ||u||_{L^Xi}^2) for the exponential moment bound."""
    b = field.basis
    u = b.synthesize(field.coeffs)
    lhs = lebesgue_norm_values(b, np.expm1(u * u), 6.0) ** 6
    rhs = 6.0 * orlicz_norm_values(b, u).value ** 2
    return lhs, rhs
