"""Dirichlet sine eigenbases on intervals and rectangles, transforms, and norms.

A :class:`SpectralBasis` stores the first ``K`` Dirichlet-Laplacian eigenpairs
(sorted by eigenvalue, ties broken lexicographically on the index tuple) and a
tensor Gauss-Legendre rule.  All transforms work on coefficient arrays with
arbitrary leading batch dimensions, so a whole trajectory ``(N+1, K)`` can be
synthesized or projected in one call.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

__all__ = [
    "Domain",
    "SpectralBasis",
    "SpectralField",
    "OrliczNorm",
    "OrliczBracketError",
    "build_basis",
    "to_spectral",
    "to_physical",
    "hilbert_norm",
    "hilbert_norm_coeffs",
    "lebesgue_norm",
    "lebesgue_norm_values",
    "orlicz_norm",
    "orlicz_norm_values",
    "random_field",
    "embedding_constant",
    "coefficient_tail",
    "save_field",
    "load_field",
]

MIN_QUAD_POINTS = 24  # below this, 4K Gauss points miss the 1e-10 orthonormality target


@dataclass(frozen=True)
class Domain:
    kind: str
    lengths: tuple

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        want = 1 if self.kind == "interval" else 2
        if len(self.lengths) != want:
            raise ValueError(f"{self.kind} needs {want} length(s), got {len(self.lengths)}")
        if any(not (float(v) > 0.0) for v in self.lengths):
            raise ValueError("domain lengths must be positive")
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))

    @classmethod
    def interval(cls, L=math.pi):
        return cls("interval", (L,))

    @classmethod
    def rectangle(cls, L1=math.pi, L2=math.pi):
        return cls("rectangle", (L1, L2))

    @property
    def dim(self):
        return len(self.lengths)

    @property
    def measure(self):
        return float(np.prod(self.lengths))

    def to_dict(self):
        return {"kind": self.kind, "lengths": list(self.lengths)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], tuple(d["lengths"]))


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Immutable eigenbasis plus quadrature.  Hashes by identity (used as a memo key)."""

    domain: Domain
    index: np.ndarray          # (K, d) positive integers
    theta: np.ndarray          # (K,) eigenvalues, ascending
    norm_const: np.ndarray     # (K,) L2 normalization of each product sine
    nodes: tuple               # per-axis quadrature nodes
    weights: tuple             # per-axis quadrature weights
    _sin: tuple = dc_field(repr=False, default=())   # per-axis (m_a, n_a) normalized sines
    _dsin: tuple = dc_field(repr=False, default=())  # per-axis derivatives

    @property
    def K(self):
        return int(self.theta.size)

    @property
    def dim(self):
        return self.domain.dim

    @property
    def grid_shape(self):
        return tuple(n.size for n in self.nodes)

    @property
    def quad_weights(self):
        """Tensor weights with shape ``grid_shape``."""
        if self.dim == 1:
            return self.weights[0]
        return np.outer(self.weights[0], self.weights[1])

    def mesh(self):
        """Physical coordinates of the quadrature nodes, one array per axis."""
        return np.meshgrid(*self.nodes, indexing="ij")

    # -- transforms on raw arrays -------------------------------------------------

    def _dense(self, coeffs):
        """Scatter (..., K) coefficients into (..., m1[, m2])."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.K:
            raise ValueError(f"expected {self.K} coefficients, got {coeffs.shape[-1]}")
        if self.dim == 1:
            m = self._sin[0].shape[0]
            out = np.zeros(coeffs.shape[:-1] + (m,))
            out[..., self.index[:, 0] - 1] = coeffs
            return out
        m1, m2 = self._sin[0].shape[0], self._sin[1].shape[0]
        out = np.zeros(coeffs.shape[:-1] + (m1, m2))
        out[..., self.index[:, 0] - 1, self.index[:, 1] - 1] = coeffs
        return out

    def _gather(self, dense):
        if self.dim == 1:
            return dense[..., self.index[:, 0] - 1]
        return dense[..., self.index[:, 0] - 1, self.index[:, 1] - 1]

    def synthesize(self, coeffs, deriv=None):
        """Values of sum_k c_k phi_k (or of its partial derivative along ``deriv``) on the grid."""
        dense = self._dense(coeffs)
        mats = [self._dsin[a] if deriv == a else self._sin[a] for a in range(self.dim)]
        if self.dim == 1:
            return dense @ mats[0]
        return np.einsum("...ij,ix,jy->...xy", dense, mats[0], mats[1], optimize=True)

    def project(self, values, deriv=None):
        """Quadrature inner products <values, phi_k> (or <values, d phi_k / dx_deriv>)."""
        values = np.asarray(values, dtype=float)
        shape = self.grid_shape
        if values.shape[values.ndim - self.dim:] != shape:
            raise ValueError(f"samples must end with grid shape {shape}, got {values.shape}")
        mats = [self._dsin[a] if deriv == a else self._sin[a] for a in range(self.dim)]
        if self.dim == 1:
            dense = (values * self.weights[0]) @ mats[0].T
        else:
            wv = values * self.quad_weights
            dense = np.einsum("...xy,ix,jy->...ij", wv, mats[0], mats[1], optimize=True)
        return self._gather(dense)

    def integrate(self, values):
        values = np.asarray(values, dtype=float)
        axes = tuple(range(values.ndim - self.dim, values.ndim))
        return np.sum(values * self.quad_weights, axis=axes)


@dataclass(frozen=True, eq=False)
class SpectralField:
    basis: SpectralBasis
    coeffs: np.ndarray
    nu: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.basis.K,):
            raise ValueError(f"coefficient vector must have length {self.basis.K}, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def with_coeffs(self, coeffs, nu=None):
        return SpectralField(self.basis, coeffs, self.nu if nu is None else nu)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)


@dataclass(frozen=True)
class OrliczNorm:
    value: float
    iterations: int
    residual: float


class OrliczBracketError(ArithmeticError):
    """Bisection for the Luxemburg norm could not bracket the root."""


def _gauss_legendre(n, L):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * L * (x + 1.0), 0.5 * L * w


def build_basis(domain, K, quad_order=None):
    """First ``K`` Dirichlet eigenpairs of ``domain`` with a tensor Gauss-Legendre rule.

    ``quad_order`` is the number of points per axis; it must be at least ``4K``
    (default ``4K``).  A floor of 24 points applies for tiny ``K``.
    """
    if not isinstance(domain, Domain):
        raise TypeError("domain must be a Domain")
    K = int(K)
    if K < 1:
        raise ValueError("K must be at least 1")
    n = 4 * K if quad_order is None else int(quad_order)
    if n < 4 * K:
        raise ValueError(f"quad_order {n} is below 4K = {4 * K} points per axis")
    n = max(n, MIN_QUAD_POINTS)

    if domain.dim == 1:
        (L,) = domain.lengths
        index = np.arange(1, K + 1).reshape(-1, 1)
        theta = (index[:, 0] * math.pi / L) ** 2
    else:
        L1, L2 = domain.lengths
        # every (i, j) that can be among the K smallest has i, j <= K
        ii, jj = np.meshgrid(np.arange(1, K + 1), np.arange(1, K + 1), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        th = (ii * math.pi / L1) ** 2 + (jj * math.pi / L2) ** 2
        order = np.lexsort((jj, ii, th))[:K]
        index = np.stack([ii[order], jj[order]], axis=1)
        theta = th[order]

    nodes, weights, sins, dsins = [], [], [], []
    for a, L in enumerate(domain.lengths):
        x, w = _gauss_legendre(n, L)
        m = int(index[:, a].max())
        freq = np.arange(1, m + 1) * math.pi / L
        amp = math.sqrt(2.0 / L)
        arg = np.outer(freq, x)
        sins.append(amp * np.sin(arg))
        dsins.append(amp * freq[:, None] * np.cos(arg))
        nodes.append(x)
        weights.append(w)
    norm_const = np.full(K, math.sqrt(2.0 ** domain.dim / domain.measure))

    for arr in [index, theta, norm_const, *nodes, *weights, *sins, *dsins]:
        arr.setflags(write=False)
    return SpectralBasis(domain=domain, index=index, theta=theta, norm_const=norm_const,
                         nodes=tuple(nodes), weights=tuple(weights),
                         _sin=tuple(sins), _dsin=tuple(dsins))


def to_spectral(samples, basis, nu=0.0):
    """Project physical samples on ``basis`` quadrature nodes onto the eigenbasis."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != basis.grid_shape:
        raise ValueError(f"samples have shape {samples.shape}, expected {basis.grid_shape}")
    return SpectralField(basis, basis.project(samples), nu)


def to_physical(field):
    return field.basis.synthesize(field.coeffs)


def hilbert_norm_coeffs(theta, coeffs, nu):
    """D^nu norm of coefficient arrays of shape (..., K)."""
    coeffs = np.asarray(coeffs, dtype=float)
    return np.sqrt(np.sum(np.power(theta, nu) * coeffs * coeffs, axis=-1))


def hilbert_norm(field, nu):
    return float(hilbert_norm_coeffs(field.basis.theta, field.coeffs, nu))


def lebesgue_norm_values(basis, values, p):
    """L^p norm of grid samples; accepts any samples (constants included)."""
    if p < 1:
        raise ValueError("p must be at least 1")
    a = np.abs(np.asarray(values, dtype=float))
    scale = float(a.max()) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    # scale out the maximum so large p cannot overflow
    return scale * float(basis.integrate((a / scale) ** p)) ** (1.0 / p)


@functools.lru_cache(maxsize=16)
def _oversampled_basis(domain, K, n):
    return build_basis(domain, K, 4 * n)


def lebesgue_norm(field, p):
    """L^p norm of a truncated field.

    For even integer p the integrand is smooth and the native rule suffices.
    Otherwise |u|^p has kinks on the zero set of u, where Gauss rules lose
    their spectral accuracy, so the field is resampled on a 4x finer rule.
    """
    b = field.basis
    if float(p) % 2.0 == 0.0:
        return lebesgue_norm_values(b, to_physical(field), p)
    fine = _oversampled_basis(b.domain, b.K, b.grid_shape[0])
    return lebesgue_norm_values(fine, fine.synthesize(field.coeffs), p)


def _xi_integral(basis, a, kappa):
    with np.errstate(over="ignore"):
        return float(basis.integrate(np.expm1((a / kappa) ** 2)))


def orlicz_norm_values(basis, values, max_iter=200):
    """Luxemburg norm for the Young function exp(z^2) - 1, by bisection on kappa."""
    a = np.abs(np.asarray(values, dtype=float))
    sup = float(a.max()) if a.size else 0.0
    if sup == 0.0:
        return OrliczNorm(0.0, 0, 0.0)
    lo, hi = sup / 10.0, 10.0 * sup * max(1.0, basis.domain.measure)
    f_lo, f_hi = _xi_integral(basis, a, lo), _xi_integral(basis, a, hi)
    it = 0
    while not (f_lo >= 1.0 >= f_hi):
        it += 1
        if it > max_iter:
            raise OrliczBracketError("could not bracket the Luxemburg norm")
        if f_lo < 1.0:
            lo /= 2.0
            f_lo = _xi_integral(basis, a, lo)
        if f_hi > 1.0:
            hi *= 2.0
            f_hi = _xi_integral(basis, a, hi)
    while it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = _xi_integral(basis, a, mid)
        if f_mid > 1.0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if abs(f_hi - 1.0) <= 1e-13:
            break
    # the infimum of admissible kappa; hi satisfies the constraint
    return OrliczNorm(hi, it, abs(f_hi - 1.0))


def orlicz_norm(field):
    return orlicz_norm_values(field.basis, to_physical(field))


def random_field(basis, rng, decay=2.0, nu=0.0, amplitude=1.0):
    """Gaussian coefficients damped by theta_k**(-decay/2), normalized in L2 to ``amplitude``."""
    c = rng.standard_normal(basis.K) * np.power(basis.theta / basis.theta[0], -0.5 * decay)
    n = np.linalg.norm(c)
    return SpectralField(basis, amplitude * c / n if n > 0 else c, nu)


def embedding_constant(basis, p, nu, n_samples=200, seed=0, decay=None):
    """Empirical sup of ||f||_{L^p} / ||f||_{D^nu} over unit modes and random fields."""
    rng = np.random.default_rng(seed)
    decay = nu + 2.0 if decay is None else decay
    coeffs = [np.eye(basis.K)[k] for k in range(basis.K)]
    coeffs += [random_field(basis, rng, decay).coeffs for _ in range(n_samples)]
    coeffs = np.array(coeffs)
    values = basis.synthesize(coeffs)
    num = np.array([lebesgue_norm_values(basis, v, p) for v in values])
    den = hilbert_norm_coeffs(basis.theta, coeffs, nu)
    return float(np.max(num / den))


def coefficient_tail(field, fraction=0.25):
    """Relative L2 mass carried by the top ``fraction`` of modes (truncation diagnostic)."""
    c = field.coeffs
    start = int(math.floor((1.0 - fraction) * c.size))
    total = float(np.dot(c, c))
    return 0.0 if total == 0.0 else float(np.dot(c[start:], c[start:]) / total) ** 0.5


def save_field(field, path):
    """Write ``<path>.csv`` (one row per mode) and ``<path>.json`` (header)."""
    path = Path(path)
    b = field.basis
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{a + 1}" for a in range(b.dim)] + ["theta", "coeff"])
        for idx, th, c in zip(b.index, b.theta, field.coeffs):
            w.writerow([int(v) for v in idx] + [repr(float(th)), repr(float(c))])
    header = {"schema": "fracpseudo.field/1", "domain": b.domain.to_dict(), "K": b.K, "nu": field.nu}
    path.with_suffix(".json").write_text(json.dumps(header, indent=2))


def load_field(path, basis=None):
    """Inverse of :func:`save_field`; rebuilds the basis unless one is supplied."""
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    if basis is None:
        basis = build_basis(Domain.from_dict(header["domain"]), header["K"])
    with open(path.with_suffix(".csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    coeffs = np.array([float(r["coeff"]) for r in rows])
    return SpectralField(basis, coeffs, header["nu"])
