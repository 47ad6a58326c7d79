import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hst

from wigsim import states as st
from wigsim.errors import ConfigError, DomainError, RegionTooSmallError
from wigsim.quadrature import QuadratureSpec

mp.mp.dps = 30
nbars = hst.floats(0, 10, allow_nan=False)
effs = hst.floats(0, 0.5, allow_nan=False)


def mp_lespats(nbar, eta, r2):
    """High-precision LESPATS Wigner value written from the printed closed form."""
    nbar, eta, r2 = mp.mpf(nbar), mp.mpf(eta), mp.mpf(r2)
    a = 1 + 2 * nbar * eta
    return 2 / mp.pi * (1 + 2 * eta * (nbar + 2 * (nbar + 1) * r2 - 2 * nbar * eta - 1)) / a**3 * mp.exp(-2 * r2 / a)


# --- Gaussian family -----------------------------------------------------------


def test_vacuum_peak():
    assert st.gaussian_wigner(st.vacuum(), 0.0, 0.0) == pytest.approx(2 / math.pi, rel=1e-15)


def test_coherent_peak_translates():
    assert st.gaussian_wigner(st.coherent(3, -2), 3, -2) == pytest.approx(2 / math.pi, rel=1e-15)


def test_thermal_and_squeezed_covariances():
    assert np.allclose(st.thermal(2).cov, 1.25 * np.eye(2))
    sq = st.squeezed(0.5)
    assert np.allclose(sq.cov, np.diag([math.exp(1) / 4, math.exp(-1) / 4]))
    assert np.linalg.det(st.squeezed(0.7, 0.3).cov) == pytest.approx(1 / 16)


def test_uncertainty_bound_enforced():
    with pytest.raises(ConfigError):
        st.GaussianStateSpec((0, 0), 0.1 * np.eye(2))
    with pytest.raises(ConfigError):
        st.GaussianStateSpec((0, 0), [[1, 0.2], [0.1, 1]])


@given(hst.floats(-3, 3), hst.floats(-3, 3))
def test_vacuum_even(q, p):
    assert st.gaussian_wigner(st.vacuum(), q, p) == st.gaussian_wigner(st.vacuum(), -q, -p)


# --- LESPATS closed forms --------------------------------------------------------


@pytest.mark.parametrize("nbar", [0, 0.1, 1, 5, 10])
def test_origin_zero_at_half_efficiency(nbar):
    assert abs(st.lespats_origin(st.SpatsSpec(nbar, 0.5))) <= 1e-15


def test_origin_values():
    assert st.lespats_origin(st.SpatsSpec(0, 1)) == pytest.approx(-2 / math.pi, rel=1e-14)
    assert st.lespats_origin(st.SpatsSpec(1, 1)) == pytest.approx(-2 / (9 * math.pi), rel=1e-14)
    assert st.lespats_origin(st.SpatsSpec(3, 0)) == pytest.approx(2 / math.pi, rel=1e-14)
    assert st.lespats_origin(st.SpatsSpec(1, 0.6)) == pytest.approx(-0.026307, abs=5e-7)


@given(nbars, hst.floats(0, 1), hst.floats(0, 9))
def test_lespats_matches_high_precision(nbar, eta, r2):
    got = st.lespats_wigner(st.SpatsSpec(nbar, eta), math.sqrt(r2), 0.0)
    assert got == pytest.approx(float(mp_lespats(nbar, eta, r2)), rel=1e-11, abs=1e-14)


def test_p_function():
    assert st.lespats_p_function(st.SpatsSpec(1, 1), 0, 0) == pytest.approx(-1 / math.pi)
    assert st.lespats_p_function(st.SpatsSpec(1, 1), math.sqrt(0.5), 0) == pytest.approx(0, abs=1e-16)
    with pytest.raises(DomainError):
        st.lespats_p_function(st.SpatsSpec(0, 0.3), 0, 0)


@given(hst.floats(0.01, 10), hst.floats(0.01, 1))
def test_p_function_negative_at_origin(nbar, eta):
    val = st.lespats_p_function(st.SpatsSpec(nbar, eta), 0, 0)
    assert val < 0
    assert val == pytest.approx(-1 / (math.pi * nbar**2 * eta), rel=1e-12)


def test_q_function():
    assert st.q_function_vacuum(0, 0) == pytest.approx(1 / math.pi)
    assert st.q_function_vacuum(1, 0) == pytest.approx(math.exp(-1) / math.pi)
    assert st.q_function_vacuum(0.3, 0.7) == st.q_function_vacuum(0.7, 0.3)


def test_fidelity_values():
    assert st.fidelity_to_vacuum(st.SpatsSpec(4, 0)) == 1
    assert st.fidelity_to_vacuum(st.SpatsSpec(4, 1)) == 0
    assert st.fidelity_to_vacuum(st.SpatsSpec(1, 0.5)) == pytest.approx(2 / 9, rel=1e-15)


def test_fidelity_against_mpmath_quadrature():
    # pi * double integral of P*Q, evaluated in polar form at 30 digits
    for nbar, eta in [(1, 0.5), (0.3, 0.2), (4, 0.9)]:
        n, e = mp.mpf(nbar), mp.mpf(eta)

        def integrand(r):
            r2 = r * r
            P = 1 / (mp.pi * n**3 * e) * ((n + 1) * r2 / e - n) * mp.exp(-r2 / (n * e))
            return P * mp.exp(-r2) / mp.pi * 2 * mp.pi * r

        F = mp.pi * mp.quad(integrand, [0, mp.sqrt(n * e), mp.inf])
        assert float(F) == pytest.approx(st.fidelity_to_vacuum(st.SpatsSpec(nbar, eta)), abs=1e-12)
        assert st.fidelity_to_vacuum_quadrature(st.SpatsSpec(nbar, eta)) == pytest.approx(float(F), abs=1e-10)


def test_positivity_threshold():
    assert st.is_positive_wigner(st.SpatsSpec(1, 0.5))
    assert not st.is_positive_wigner(st.SpatsSpec(1, 0.500001))
    assert st.is_positive_wigner(st.SpatsSpec(1, 0))


@given(nbars, hst.floats(0, 1))
def test_sign_of_origin_follows_efficiency(nbar, eta):
    w0 = st.lespats_origin(st.SpatsSpec(nbar, eta))
    if abs(1 - 2 * eta) > 1e-9:
        assert np.sign(w0) == np.sign(1 - 2 * eta)
    assert st.is_positive_wigner(st.SpatsSpec(nbar, eta)) == (eta <= 0.5)


@given(nbars, effs, hst.floats(0, 5), hst.floats(0, 2 * math.pi))
def test_admitted_lespats_nonnegative(nbar, eta, r, phi):
    w = st.make_evaluator(st.SpatsSpec(nbar, eta))
    assert w.evaluate(r * math.cos(phi), r * math.sin(phi)) >= -1e-16


def test_negative_lespats_rejected():
    with pytest.raises(ConfigError, match="efficiency <= 0.5"):
        st.make_evaluator(st.SpatsSpec(1, 0.7))


# --- evaluators ------------------------------------------------------------------


@pytest.mark.parametrize("spec", [st.vacuum(), st.squeezed(0.6, 0.4), st.SpatsSpec(1, 0.4), st.SpatsSpec(3, 0.1)])
def test_normalisation_and_moments(spec):
    w = st.make_evaluator(spec)
    mean, cov = st.numeric_moments(w)
    assert np.allclose(mean, w.mean, atol=1e-8)
    assert np.allclose(cov, w.covariance, atol=1e-8)


def test_lespats_variance_closed_form():
    w = st.make_evaluator(st.SpatsSpec(1, 0.4))
    assert np.allclose(w.covariance, 0.85 * np.eye(2), atol=1e-14)
    r = mp.quad(lambda s: s**3 * mp_lespats(1, 0.4, s * s) * mp.pi, [0, mp.inf])  # int r^2 W dA / 2
    assert float(r) == pytest.approx(0.85, rel=1e-12)


def test_gaussian_moments_translated():
    w = st.make_evaluator(st.GaussianStateSpec((2, -1), 0.25 * np.eye(2)))
    mean, _ = st.numeric_moments(w)
    assert np.allclose(mean, [2, -1], atol=1e-8)


def test_moments_region_too_small():
    w = st.make_evaluator(st.thermal(5))
    with pytest.raises(RegionTooSmallError):
        st.numeric_moments(w, QuadratureSpec((0.0, 0.0), 1.0))


def test_vacuum_gradient_sup():
    w = st.make_evaluator(st.vacuum())
    exact = (2 / math.pi) * 2 * math.exp(-0.5)
    assert exact <= w.declared_gradient_sup <= 1.25 * exact * (1 + 1e-12)
    assert st.make_evaluator(st.thermal(0.5)).declared_gradient_sup < w.declared_gradient_sup


def test_lespats_gradient_sup_dominates_grid():
    w = st.make_evaluator(st.SpatsSpec(1, 0.4))
    q = np.linspace(-6, 6, 801)
    Q, P = np.meshgrid(q, q)
    gq, gp = w.gradient(Q, P)
    observed = np.max(np.hypot(gq, gp))
    assert observed <= w.declared_gradient_sup
    assert w.declared_gradient_sup / 1.25 == pytest.approx(observed, rel=0.01)


def test_gradient_matches_finite_differences():
    w = st.make_evaluator(st.SpatsSpec(2, 0.3))
    h = 1e-6
    for q, p in [(0.3, -0.2), (1.1, 0.7)]:
        gq, gp = w.gradient(q, p)
        assert gq == pytest.approx((w.evaluate(q + h, p) - w.evaluate(q - h, p)) / (2 * h), rel=1e-6)
        assert gp == pytest.approx((w.evaluate(q, p + h) - w.evaluate(q, p - h)) / (2 * h), rel=1e-6)


def test_peak_matches_grid():
    for spec in (st.SpatsSpec(1, 0.4), st.SpatsSpec(5, 0.5), st.SpatsSpec(0.2, 0.1)):
        w = st.make_evaluator(spec)
        r = np.linspace(0, 8, 200001)
        assert w.peak == pytest.approx(np.max(w.evaluate(r, 0 * r)), rel=1e-9)


def test_outside_mass_chebyshev():
    w = st.make_evaluator(st.vacuum())
    tail = st.outside_mass(w, math.sqrt(160))
    assert 0 <= tail <= 4 * 0.5 / 160
    assert tail < 1e-30


def test_grid_oracle_tolerance():
    w = st.make_evaluator(st.vacuum())
    oracle = w.oracle(0.1, 1e-6)
    assert oracle(0, 0) == pytest.approx(2 / math.pi)
    with pytest.raises(ConfigError):
        w.oracle(0.1, 1e-20)
