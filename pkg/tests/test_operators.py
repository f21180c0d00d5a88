import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floquetcd.operators import (
    SIGMA,
    SPIN,
    HarmonicOperator,
    commutator,
    evaluate_at,
    fit_harmonics,
    harmonic_multiply,
    harmonic_time_derivative,
    trace_pair,
    trace_period_norm,
)

RNG = np.random.default_rng(7)


def random_hermitian(dim, rng=RNG):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def random_hermitian_valued(omega, n_h, dim, rng=RNG):
    terms = [(random_hermitian(dim, rng), 0, "const")]
    for ell in range(1, n_h + 1):
        terms.append((random_hermitian(dim, rng), ell, "cos"))
        terms.append((random_hermitian(dim, rng), ell, "sin"))
    return HarmonicOperator.from_terms(omega, terms)


# ---------------------------------------------------------------------------
# commutator
# ---------------------------------------------------------------------------


def test_commutator_self_vanishes():
    assert np.allclose(commutator(SIGMA["z"], SIGMA["z"]), 0.0)


def test_commutator_pauli_algebra():
    assert np.allclose(commutator(SIGMA["x"], SIGMA["y"]), 2j * SIGMA["z"])


def test_commutator_matches_dense_products():
    # stand-in for a driven two-band Bloch matrix at fixed (q, t)
    h = np.array([[0.3, 0.2 - 0.4j], [0.2 + 0.4j, -1.1]], dtype=complex)
    expected = h @ SIGMA["x"] - SIGMA["x"] @ h
    assert np.allclose(commutator(h, SIGMA["x"]), expected, atol=1e-14)


def test_commutator_dimension_mismatch():
    with pytest.raises(ValueError):
        commutator(np.eye(2), np.eye(4))


# ---------------------------------------------------------------------------
# harmonic products
# ---------------------------------------------------------------------------


def test_multiply_by_static_identity():
    x = random_hermitian_valued(2.0, 2, 3)
    one = HarmonicOperator.from_static(2.0, np.eye(3))
    prod = harmonic_multiply(one, x)
    assert np.allclose(prod.coeffs, x.coeffs)


def test_multiply_inverse_harmonics():
    w = 1.7
    a = HarmonicOperator.from_terms(w, [(SIGMA["x"], 1, "exp")])
    b = HarmonicOperator.from_terms(w, [(SIGMA["x"], -1, "exp")])
    prod = harmonic_multiply(a, b)
    assert np.allclose(prod.coeff(0), np.eye(2))
    assert np.allclose(prod.coeff(2), 0.0)


def test_multiply_truncates_cos_square():
    # cos(wt)^2 sigma_x^2 = (1/2 + cos(2wt)/2) * identity; cutoff 1 drops l=+-2
    w = 3.0
    a = HarmonicOperator.from_terms(w, [(SIGMA["x"], 1, "cos")])
    prod = harmonic_multiply(a, a, truncate_to=1)
    assert prod.n_h == 1
    assert np.allclose(prod.coeff(0), 0.5 * np.eye(2))
    assert np.allclose(prod.coeff(1), 0.0)
    full = harmonic_multiply(a, a)
    assert np.allclose(full.coeff(2), 0.25 * np.eye(2))


def test_multiply_frequency_mismatch():
    a = HarmonicOperator.from_static(1.0, np.eye(2))
    b = HarmonicOperator.from_static(2.0, np.eye(2))
    with pytest.raises(ValueError):
        harmonic_multiply(a, b)


def test_raw_product_conjugation_identity():
    # (AB)_{-l} equals (BA)_l^dagger for Hermitian-valued A, B
    a = random_hermitian_valued(1.3, 2, 2)
    b = random_hermitian_valued(1.3, 1, 2)
    ab = harmonic_multiply(a, b)
    ba = harmonic_multiply(b, a)
    for ell in range(-ab.n_h, ab.n_h + 1):
        assert np.allclose(ab.coeff(-ell), ba.coeff(ell).conj().T, atol=1e-12)


# ---------------------------------------------------------------------------
# time derivative
# ---------------------------------------------------------------------------


def test_derivative_of_static_term_vanishes():
    x = HarmonicOperator.from_static(2.0, random_hermitian(3))
    assert np.allclose(harmonic_time_derivative(x).coeffs, 0.0)


def test_derivative_of_cosine():
    w = 2.5
    x = HarmonicOperator.from_terms(w, [(SIGMA["y"], 1, "cos")])
    expected = HarmonicOperator.from_terms(w, [(-w * SIGMA["y"], 1, "sin")])
    assert np.allclose(harmonic_time_derivative(x).coeffs, expected.coeffs, atol=1e-14)


def test_derivative_matches_finite_difference():
    w = 1.9
    x = random_hermitian_valued(w, 2, 2)
    dx = harmonic_time_derivative(x)
    period = 2 * np.pi / w
    h = 1e-6 * period
    for t in [0.0, 0.21 * period, 0.77 * period]:
        fd = (x.evaluate(t + h) - x.evaluate(t - h)) / (2 * h)
        scale = max(np.max(np.abs(fd)), 1.0)
        assert np.max(np.abs(dx.evaluate(t) - fd)) / scale < 1e-6


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def test_evaluate_at_zero_sums_coefficients():
    x = random_hermitian_valued(2.0, 3, 2)
    assert np.allclose(evaluate_at(x, 0.0), x.coeffs.sum(axis=0))


def test_evaluate_hermitian_and_periodic():
    x = random_hermitian_valued(2.0, 3, 3)
    t = 0.37 * x.period
    m = x.evaluate(t)
    assert np.max(np.abs(m - m.conj().T)) < 1e-12
    assert np.max(np.abs(x.evaluate(t + x.period) - m)) < 1e-12


# ---------------------------------------------------------------------------
# period-averaged trace norm
# ---------------------------------------------------------------------------


def test_trace_norm_zero():
    g = HarmonicOperator.zero(1.0, 2, 2)
    assert trace_period_norm(g) == 0.0


def test_trace_norm_static_sigma_z():
    g = HarmonicOperator.from_static(1.0, SIGMA["z"])
    assert trace_period_norm(g) == pytest.approx(2.0)


def quadrature_pair(a, b, n_pts):
    ts = np.linspace(0.0, a.period, n_pts, endpoint=False)
    vals = [np.trace(a.evaluate(t) @ b.evaluate(t)) for t in ts]
    return np.mean(vals)


def test_trace_norm_matches_quadrature():
    g = random_hermitian_valued(1.4, 3, 3)
    oracle = quadrature_pair(g, g, 4 * 3 + 2).real
    assert trace_period_norm(g) == pytest.approx(oracle, abs=1e-10)


def test_trace_pair_matches_quadrature_cross():
    a = random_hermitian_valued(0.8, 2, 3)
    b = random_hermitian_valued(0.8, 3, 3)
    oracle = quadrature_pair(a, b, 4 * 5 + 2)
    assert trace_pair(a, b) == pytest.approx(oracle, abs=1e-10)


def test_trace_norm_rejects_non_hermitian_valued():
    x = HarmonicOperator.from_terms(1.0, [(SIGMA["x"], 1, "exp")])
    with pytest.raises(ValueError):
        trace_period_norm(x)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=3), st.integers(min_value=0, max_value=2**32 - 1))
def test_trace_norm_nonnegative_definite(n_h, seed):
    rng = np.random.default_rng(seed)
    g = random_hermitian_valued(1.0, n_h, 2, rng)
    val = trace_period_norm(g)
    assert val >= 0.0
    if val < 1e-12:
        assert g.max_coeff_norm() < 1e-6


# ---------------------------------------------------------------------------
# harmonic fitting
# ---------------------------------------------------------------------------


def test_fit_harmonics_roundtrip():
    x = random_hermitian_valued(2.2, 4, 2)
    fitted = fit_harmonics(lambda phi: x.evaluate_phase(phi), x.omega, 4)
    assert np.max(np.abs(fitted.coeffs - x.coeffs)) < 1e-12
