import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracpseudo.special_functions import (MLAccuracyError, MLParams, beta, gamma, mittag_leffler,
                                          mittag_leffler_with_error, ml_bound_estimate, mwright_moment)
from fracpseudo.verification_oracles import ml_highprec, ml_positive


# ---- gamma / beta -------------------------------------------------------

def test_gamma_trivial_values():
    assert gamma(1.0) == pytest.approx(1.0, rel=1e-15)
    assert gamma(5.0) == pytest.approx(24.0, rel=1e-15)


def test_gamma_half_is_sqrt_pi():
    # [DERIVED] high-precision constant
    assert gamma(0.5) == pytest.approx(float(mpmath.sqrt(mpmath.pi)), rel=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_gamma_domain_error(x):
    with pytest.raises(ValueError):
        gamma(x)


def test_gamma_overflow():
    with pytest.raises(OverflowError):
        gamma(200.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 170.0))
def test_gamma_matches_mpmath(x):
    assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-13)


def test_beta_examples():
    assert beta(1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert beta(2.0, 3.0) == pytest.approx(1.0 / 12.0, rel=1e-12)
    assert beta(0.5, 0.5) == pytest.approx(math.pi, rel=1e-12)


@pytest.mark.parametrize("p,q", [(0.0, 1.0), (1.0, -2.0)])
def test_beta_domain_error(p, q):
    with pytest.raises(ValueError):
        beta(p, q)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 40.0), st.floats(0.05, 40.0))
def test_beta_matches_mpmath(p, q):
    assert beta(p, q) == pytest.approx(float(mpmath.beta(p, q)), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 20.0), st.floats(0.1, 20.0))
def test_beta_symmetric(p, q):
    assert beta(p, q) == pytest.approx(beta(q, p), rel=1e-14)


# ---- Mittag-Leffler ------------------------------------------------------

def test_ml_at_zero_is_one():
    assert mittag_leffler(MLParams(0.5, 1.0), 0.0) == 1.0


def test_ml_alpha_one_is_exponential():
    assert mittag_leffler(MLParams(1.0, 1.0), -2.0) == pytest.approx(math.exp(-2.0), rel=1e-14)


def test_ml_half_matches_erfc_identity_and_oracle():
    # [DERIVED] value from the extended-precision series oracle
    ref = ml_highprec(0.5, 1.0, -1.0)
    assert ref.value == pytest.approx(float(mpmath.e * mpmath.erfc(1)), abs=1e-15)
    got = mittag_leffler(MLParams(0.5, 1.0, 1e-11), -1.0)
    assert abs(got - ref.value) <= 1e-11
    assert got == pytest.approx(0.4275835762, abs=1e-10)


def test_ml_vector_input_preserves_shape():
    z = -np.linspace(0, 20, 12).reshape(3, 4)
    out = mittag_leffler(MLParams(0.6, 1.0), z)
    assert out.shape == z.shape


def test_ml_forced_series_refuses_large_argument():
    with pytest.raises(MLAccuracyError):
        mittag_leffler(MLParams(0.3, 1.0), np.array([-50.0]), method="series")


def test_ml_rejects_positive_argument():
    with pytest.raises(ValueError):
        mittag_leffler(MLParams(0.5, 1.0), np.array([0.5]))


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("zeta_kind", ["alpha", "one"])
def test_ml_regimes_agree_where_both_certify(alpha, zeta_kind):
    zeta = alpha if zeta_kind == "alpha" else 1.0
    p = MLParams(alpha, zeta, 1e-11)
    z = -np.linspace(0.5, 30.0, 30)
    vals = {}
    for m in ("series", "asymptotic", "integral", "recurrence"):
        for zi in z:
            try:
                vals.setdefault(float(zi), {})[m] = float(mittag_leffler(p, np.array([zi]), method=m)[0])
            except (MLAccuracyError, ValueError):
                pass
    pairs = 0
    for zi, d in vals.items():
        ms = list(d.values())
        for a in ms:
            for b in ms:
                assert abs(a - b) <= 10 * p.tol
                pairs += 1
    assert pairs > len(z)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([0.3, 0.5, 0.8]), st.booleans(), st.floats(0.0, 30.0))
def test_ml_against_highprec_oracle(alpha, zeta_is_alpha, x):
    zeta = alpha if zeta_is_alpha else 1.0
    ref = ml_highprec(alpha, zeta, -x)
    got = float(mittag_leffler(MLParams(alpha, zeta, 1e-11), np.array([-x]))[0])
    assert abs(got - ref.value) <= 1e-10 + ref.certified_error


def test_ml_error_estimate_reported():
    v, err, regime = mittag_leffler_with_error(MLParams(0.4, 1.0, 1e-11), -np.array([0.1, 5.0, 25.0, 400.0]))
    assert np.all(err <= 1e-11)
    assert set(np.unique(regime)) <= {0, 1, 2, 3}


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.98))
def test_ml_positive_and_nonincreasing(alpha):
    x = np.linspace(0, 60, 241)
    e = mittag_leffler(MLParams(alpha, 1.0), -x)
    assert np.all(e > 0)
    assert np.all(np.diff(e) <= 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 0.95), st.floats(0.0, 3.0))
def test_ml_shift_recurrence(alpha, x):
    z = -x
    lhs = mittag_leffler(MLParams(alpha, 1.0), z)
    rhs = 1.0 + z * mittag_leffler(MLParams(alpha, alpha + 1.0), z)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@pytest.mark.parametrize("alpha,x", [(0.5, 1.0), (0.3, 2.0), (0.8, 5.0)])
def test_ml_positive_axis(alpha, x):
    # E_{1/2}(x) = e^{x^2} erfc(-x); the others against mpmath's generic evaluation
    ref = float(mpmath.nsum(lambda k: mpmath.mpf(x) ** k / mpmath.gamma(alpha * k + 1), [0, mpmath.inf]))
    assert ml_positive(alpha, x) == pytest.approx(ref, rel=1e-14)


def test_ml_positive_overflow_is_reported():
    with pytest.raises(OverflowError):
        ml_positive(0.1, 2.0)


# ---- M-Wright moments ----------------------------------------------------

def test_mwright_examples():
    assert mwright_moment(0.5, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert mwright_moment(0.5, 1.0) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-13)
    assert mwright_moment(0.9, 2.0) == pytest.approx(2.0 / float(mpmath.gamma(2.8)), rel=1e-13)


def test_mwright_domain_error():
    with pytest.raises(ValueError):
        mwright_moment(0.5, -1.0)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 0.95])
@pytest.mark.parametrize("x", [0.25, 0.5, 1.0])
def test_mwright_moment_series_reproduces_ml(alpha, x):
    s = sum((-x) ** k * mwright_moment(alpha, k) / math.factorial(k) for k in range(31))
    assert s == pytest.approx(mittag_leffler(MLParams(alpha, 1.0), -x), abs=1e-8)


@pytest.mark.parametrize("x", [0.25, 0.5, 1.0])
def test_mwright_moment_series_small_alpha_truncation(x):
    # at alpha = 0.3 the 31-term truncation error is of the size of the first omitted term
    alpha = 0.3
    s = sum((-x) ** k * mwright_moment(alpha, k) / math.factorial(k) for k in range(31))
    first_omitted = x ** 31 / math.gamma(1 + 31 * alpha)
    assert abs(s - mittag_leffler(MLParams(alpha, 1.0), -x)) <= 2 * first_omitted + 1e-10


# ---- bound estimate -------------------------------------------------------

def test_bound_estimate_examples():
    assert ml_bound_estimate(MLParams(1.0, 1.0), -10.0, 64).value >= 1.0
    assert ml_bound_estimate(MLParams(0.5, 1.0), 0.0, 2).value == 1.0
    b = ml_bound_estimate(MLParams(0.5, 0.5), -100.0, 256)
    assert math.isfinite(b.value) and b.value > 0


def test_bound_estimate_is_deterministic():
    p = MLParams(0.7, 0.7)
    assert ml_bound_estimate(p, -50.0, 100) == ml_bound_estimate(p, -50.0, 100)


def test_bound_estimate_dominates_oracle_grid():
    # [DERIVED] grid supremum recomputed from oracle values
    p = MLParams(0.5, 0.5)
    M = ml_bound_estimate(p, -20.0, 40).value
    xs = np.concatenate([[0.0], np.geomspace(1e-6, 20.0, 39)])
    sup = max(abs(ml_highprec(0.5, 0.5, -x).value) * (1 + x) for x in xs)
    assert M >= sup - 1e-10


@pytest.mark.parametrize("alpha,zeta", [(0.3, 1.0), (0.5, 0.5), (0.9, 1.0), (0.6, 0.6)])
def test_bound_holds_on_finer_grid(alpha, zeta):
    p = MLParams(alpha, zeta)
    M = ml_bound_estimate(p, -100.0, 64).value
    z = -np.concatenate([[0.0], np.geomspace(1e-7, 100.0, 641)])
    assert np.all(np.abs(mittag_leffler(p, z)) * (1 + np.abs(z)) <= M + 1e-8)


# ---- derivative identities --------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 0.95), st.floats(0.3, 5.0), st.floats(0.3, 3.0))
def test_derivative_identity_second_order(alpha, a, t):
    f = lambda s: float(mittag_leffler(MLParams(alpha, 1.0), -a * s ** alpha))
    df = -a * t ** (alpha - 1) * float(mittag_leffler(MLParams(alpha, alpha), -a * t ** alpha))
    h = 0.04 * t
    e1 = abs((f(t + h) - f(t - h)) / (2 * h) - df)
    e2 = abs((f(t + h / 2) - f(t - h / 2)) / h - df)
    assert e1 < 1e-3 * max(1.0, abs(df))
    if e2 > 1e-10:
        assert math.log2(e1 / e2) >= 1.9
