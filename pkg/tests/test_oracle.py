import math

import numpy as np
import pytest
from scipy import integrate

from wigsim import states as st
from wigsim.errors import ConfigError, OracleUnavailableError, ResourceError
from wigsim.measurement import GaussianMeasurementSpec
from wigsim.measurement import mode_rule
from wigsim.oracle import (
    DiscreteOutcomeDistribution,
    _mode_bin_factor,
    state_rule,
    binned_gaussian,
    gaussian_output_law,
    histogram,
    oracle_distribution,
    output_law_of_states,
    quadrature_outcome_distribution,
    tv_distance,
)
from wigsim.phase_space import apply_affine, beam_splitter, displacement, identity, phase_shifter, squeezer

Q = 0.25 * np.eye(2)


def test_gaussian_law_examples():
    meas = GaussianMeasurementSpec((Q,))
    mean, cov = gaussian_output_law([Q], [np.zeros(2)], identity(1), meas)
    assert np.allclose(cov, 0.375 * np.eye(2)) and np.allclose(mean, 0)
    _, cov = gaussian_output_law([Q], [np.zeros(2)], squeezer(0.4, 0, 1), meas)
    assert cov[0, 0] == pytest.approx(math.exp(0.8) / 4 + 1 / 8)
    mean, cov2 = gaussian_output_law([Q], [np.zeros(2)], displacement(1, 2, 0, 1), meas)
    assert np.allclose(mean, [1, 2]) and np.allclose(cov2, 0.375 * np.eye(2))
    with pytest.raises(OracleUnavailableError):
        output_law_of_states([st.make_evaluator(st.SpatsSpec(1, 0.2))], identity(1), meas)


def test_binned_gaussian_against_scipy():
    # independent 2-D integration of a correlated Gaussian over three bins
    mean, cov = np.array([0.1, -0.2]), np.array([[0.4, 0.15], [0.15, 0.3]])
    d = binned_gaussian(mean, cov, 0.5, np.zeros(2), 8)
    Ci, norm = np.linalg.inv(cov), 1 / (2 * math.pi * math.sqrt(np.linalg.det(cov)))

    def f(p, q):
        x = np.array([q, p]) - mean
        return norm * math.exp(-0.5 * x @ Ci @ x)

    for idx in [(0, 0), (1, -1), (-2, 1)]:
        q0, p0 = 0.5 * idx[0], 0.5 * idx[1]
        ref, _ = integrate.dblquad(f, q0 - 0.25, q0 + 0.25, p0 - 0.25, p0 + 0.25, epsabs=1e-13)
        assert d[idx] == pytest.approx(ref, abs=1e-10)


def test_quadrature_matches_gaussian_law():
    w = st.make_evaluator(st.squeezed(0.3, 0.5))
    meas = GaussianMeasurementSpec((np.array([[0.5, 0.1], [0.1, 0.4]]),))
    amap = phase_shifter(0.7, 0, 1)
    mean, cov = output_law_of_states([w], amap, meas)
    q = quadrature_outcome_distribution([w], amap, meas, 0.3, mean, 12)
    g = binned_gaussian(mean, cov, 0.3, mean, 12)
    assert max(abs(q[k] - g[k]) for k in g.bins) <= 1e-6
    assert tv_distance(q, g)[0] <= 1e-6


def test_quadrature_mass_and_symmetry():
    w = st.make_evaluator(st.SpatsSpec(1, 0.4))
    meas = GaussianMeasurementSpec.heterodyne(1)
    d = quadrature_outcome_distribution([w], phase_shifter(math.pi / 5, 0, 1), meas, 0.25, np.zeros(2), 26)
    assert d.total >= 1 - 1e-4
    assert d.meta["refinement_change"] <= 1e-7
    for k, v in d.bins.items():
        assert d[(-k[0], -k[1])] == pytest.approx(v, abs=1e-9)


def test_two_mode_quadrature_small():
    ws = [st.make_evaluator(st.SpatsSpec(0.5, 0.3)), st.make_evaluator(st.vacuum())]
    meas = GaussianMeasurementSpec.heterodyne(2)
    amap = beam_splitter(math.pi / 4, 0, 1, 2)
    mean, cov = gaussian_output_law([w.covariance for w in ws], [w.mean for w in ws], amap, meas)
    d = quadrature_outcome_distribution(ws, amap, meas, 1.0, mean, 3)
    assert d.meta["refinement_change"] <= 1e-7
    assert d.total == pytest.approx(1, abs=2e-3)
    # the second moment of the binned law approximates the exact output covariance plus Gamma^2/12
    keys = np.array(list(d.bins))
    p = np.array(list(d.bins.values()))
    var = np.sum(p * keys[:, 0] ** 2) / np.sum(p)
    assert var == pytest.approx(cov[0, 0] + 1 / 12, rel=0.05)
    with pytest.raises(ResourceError):
        quadrature_outcome_distribution(ws, amap, meas, 0.1, mean, 40, max_evals=10**6)


def test_oracle_dispatch():
    ws = [st.make_evaluator(st.SpatsSpec(1, 0.2))] * 3
    with pytest.raises(OracleUnavailableError):
        oracle_distribution(ws, identity(3), GaussianMeasurementSpec.heterodyne(3), 0.5, np.zeros(6), 2)
    g = [st.make_evaluator(st.vacuum())] * 3
    d = oracle_distribution(g, identity(3), GaussianMeasurementSpec.heterodyne(3), 1.0, np.zeros(6), 2)
    assert d.meta["method"] == "normal-cdf"


def test_histogram_examples():
    h = histogram(np.zeros((1, 2)), 0.5, np.zeros(2))
    assert h.bins == {(0, 0): 1.0}
    h = histogram(np.tile([1.0, -0.5], (10, 1)), 0.5, np.zeros(2))
    assert h.bins == {(2, -1): 1.0}
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 2, size=(4_000_000, 2)) * 0.5
    h = histogram(pts, 0.5, np.zeros(2))
    assert all(abs(v - 0.25) < 0.002 for v in h.bins.values()) and len(h.bins) == 4
    h = histogram(np.array([[0.0, 0.0], [5.0, 0.0]]), 1.0, np.zeros(2), half_bins=2)
    assert h.tail == 0.5


def test_tv_examples():
    a = DiscreteOutcomeDistribution(1.0, [0.0], {(0,): 0.6, (1,): 0.4})
    b = DiscreteOutcomeDistribution(1.0, [0.0], {(0,): 0.5, (1,): 0.5})
    assert tv_distance(a, a) == (0.0, 0.0)
    assert tv_distance(a, b) == pytest.approx((0.2, 0.1))
    c = DiscreteOutcomeDistribution(1.0, [0.0], {(5,): 1.0})
    d = DiscreteOutcomeDistribution(1.0, [0.0], {(7,): 1.0})
    assert tv_distance(c, d) == (2.0, 1.0)
    shifted = DiscreteOutcomeDistribution(1.0, [2.0], {(3,): 1.0})
    assert tv_distance(c, shifted) == (0.0, 0.0)
    with pytest.raises(ConfigError):
        tv_distance(c, DiscreteOutcomeDistribution(1.0, [0.5], {(0,): 1.0}))
    with pytest.raises(ConfigError):
        tv_distance(c, DiscreteOutcomeDistribution(0.5, [0.0], {(0,): 1.0}))


def test_dump_roundtrip(tmp_path):
    d = binned_gaussian(np.zeros(2), 0.375 * np.eye(2), 0.25, np.zeros(2), 10)
    d.dump(tmp_path / "d.json")
    e = DiscreteOutcomeDistribution.load(tmp_path / "d.json")
    assert e.bins == d.bins and e.gamma == d.gamma and e.tail == d.tail


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteOutcomeDistribution(1.0, [0.0], {(0,): -0.1})
    with pytest.raises(ValueError):
        DiscreteOutcomeDistribution(1.0, [0.0], {(0,): 0.7, (1,): 0.7})


def test_hermite_and_legendre_state_rules_agree():
    # two unrelated quadrature families must give the same binned law
    w = st.make_evaluator(st.SpatsSpec(1, 0.4))
    meas = GaussianMeasurementSpec.heterodyne(1)
    amap = phase_shifter(math.pi / 5, 0, 1)
    herm = quadrature_outcome_distribution([w], amap, meas, 0.25, np.zeros(2), 20)
    nodes, weights = mode_rule(w, 60, 8)
    v = apply_affine(amap, nodes)
    centers = 0.25 * np.arange(-20, 21)
    G = _mode_bin_factor(meas.covs[0], v[:, 0], v[:, 1], centers, centers, 0.25, 8)
    leg = (G @ weights).reshape(41, 41)
    assert max(abs(herm[(i - 20, j - 20)] - leg[i, j]) for i in range(41) for j in range(41)) <= 1e-9


def test_state_rule_exact_for_moments():
    w = st.make_evaluator(st.SpatsSpec(2, 0.35))
    nodes, weights = state_rule(w, 12)
    assert weights.sum() == pytest.approx(1, abs=1e-13)
    assert np.sum(weights * nodes[:, 0] ** 2) == pytest.approx(w.covariance[0, 0], rel=1e-12)
