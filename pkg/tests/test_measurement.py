import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hst

from wigsim import states as st
from wigsim.errors import ConfigError, DimensionError, ResourceError
from wigsim.measurement import GaussianMeasurementSpec, born_probability_density, conditional_density
from wigsim.phase_space import beam_splitter, displacement, identity, phase_shifter
from wigsim.quadrature import integrate_square


def test_density_peak_and_example(quarter_meas):
    assert conditional_density(quarter_meas, np.zeros(2), np.zeros(2)) == pytest.approx(4 / math.pi)
    k = np.array([0.5, 0.0])
    assert conditional_density(quarter_meas, k, np.zeros(2)) == pytest.approx(4 / math.pi * math.exp(-1))


@given(hst.floats(-2, 2), hst.floats(-2, 2))
def test_density_even(dq, dp):
    spec = GaussianMeasurementSpec((np.array([[0.5, 0.1], [0.1, 0.3]]),))
    d = np.array([dq, dp])
    assert conditional_density(spec, d, np.zeros(2)) == pytest.approx(conditional_density(spec, -d, np.zeros(2)))


def test_density_normalised():
    spec = GaussianMeasurementSpec((np.array([[0.5, 0.1], [0.1, 0.3]]),))
    total = integrate_square(lambda q, p: conditional_density(spec, np.stack([q, p], -1), np.zeros(2)), (0, 0), 6)
    assert total == pytest.approx(1, abs=1e-10)


def test_outcome_noise_is_half_covariance():
    V = np.array([[0.5, 0.1], [0.1, 0.3]])
    spec = GaussianMeasurementSpec((V,))
    f = lambda q, p: q * q * conditional_density(spec, np.stack([q, p], -1), np.zeros(2))
    assert integrate_square(f, (0, 0), 6) == pytest.approx(V[0, 0] / 2, abs=1e-10)
    assert np.allclose(spec.outcome_covariance(0), V / 2)


def test_validation():
    with pytest.raises(ConfigError, match=r"measurement\[0\]"):
        GaussianMeasurementSpec((np.diag([1.0, 0.0]),))
    with pytest.raises(ConfigError):
        GaussianMeasurementSpec((np.array([[1, 0.5], [0.2, 1]]),))
    with pytest.raises(DimensionError):
        conditional_density(GaussianMeasurementSpec.heterodyne(2), np.zeros(2), np.zeros(2))


def test_heterodyne_preset():
    spec = GaussianMeasurementSpec.heterodyne(3)
    assert spec.modes == 3 and np.array_equal(spec.covs[2], 0.5 * np.eye(2))


def test_born_density_vacuum_at_origin(vacuum_w, quarter_meas):
    # vacuum variance 1/4 plus outcome noise 1/8 per quadrature
    assert born_probability_density([vacuum_w], identity(1), quarter_meas, np.zeros(2)) == pytest.approx(
        1 / (2 * math.pi * 0.375), rel=1e-10
    )


def test_born_density_translation(quarter_meas):
    w = st.make_evaluator(st.SpatsSpec(1, 0.3))
    d = np.array([0.4, -0.7])
    k = np.array([0.2, 0.1])
    before = born_probability_density([w], identity(1), quarter_meas, k)
    after = born_probability_density([w], displacement(*d, 0, 1), quarter_meas, k + d)
    assert after == pytest.approx(before, abs=1e-8)


def test_born_density_total_mass(quarter_meas):
    w = st.make_evaluator(st.SpatsSpec(1, 0.4))
    q = np.linspace(-7, 7, 71)
    Q, P = np.meshgrid(q, q, indexing="ij")
    dens = born_probability_density([w], phase_shifter(0.3, 0, 1), quarter_meas,
                                    np.column_stack([Q.ravel(), P.ravel()]), panels=16)
    assert np.sum(dens) * (q[1] - q[0]) ** 2 >= 1 - 1e-4


def test_born_two_modes_and_caps():
    states = [st.make_evaluator(st.vacuum()), st.make_evaluator(st.thermal(1))]
    spec = GaussianMeasurementSpec.heterodyne(2)
    val = born_probability_density(states, beam_splitter(0.4, 0, 1, 2), spec, np.zeros(4), panels=10)
    # all-Gaussian: compare with the closed-form output density at 0
    from wigsim.oracle import output_law_of_states

    mean, cov = output_law_of_states(states, beam_splitter(0.4, 0, 1, 2), spec)
    exact = 1 / ((2 * math.pi) ** 2 * math.sqrt(np.linalg.det(cov)))
    assert val == pytest.approx(exact, rel=1e-6)
    with pytest.raises(ResourceError):
        born_probability_density(states * 2, identity(4), GaussianMeasurementSpec.heterodyne(4), np.zeros(8))
    with pytest.raises(ResourceError):
        born_probability_density(states, identity(2), spec, np.zeros(4), max_evals=10)
