import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hst

from wigsim.errors import ConfigError, DimensionError
from wigsim.phase_space import (
    AffineSymplecticMap,
    PhasePoint,
    apply_affine,
    beam_splitter,
    compose,
    displacement,
    identity,
    phase_shifter,
    spectral_norm,
    squeezer,
    symplectic_form,
    symplectic_residual,
)

angles = hst.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
small = hst.floats(-2, 2, allow_nan=False)


def test_symplectic_form_one_mode():
    assert np.array_equal(symplectic_form(1), [[0, 1], [-1, 0]])


def test_phase_shifter_quarter_turn():
    out = apply_affine(phase_shifter(math.pi / 2, 0, 1), PhasePoint([1.0, 0.0]))
    assert np.allclose(out.coords, [0.0, -1.0], atol=1e-15)


def test_beam_splitter_swap_with_sign():
    out = apply_affine(beam_splitter(math.pi / 2, 0, 1, 2), PhasePoint([1.0, 2.0, 3.0, 4.0]))
    assert np.allclose(out.coords, [3.0, 4.0, -1.0, -2.0], atol=1e-15)


def test_squeezer_and_displacement():
    out = apply_affine(squeezer(math.log(2), 0, 1), PhasePoint([1.0, 1.0]))
    assert np.allclose(out.coords, [2.0, 0.5])
    out = apply_affine(displacement(0.5, -1.0, 1, 2), PhasePoint([0, 0, 0, 0]))
    assert np.array_equal(out.coords, [0, 0, 0.5, -1.0])


def test_identity_and_composition_order():
    a, b = phase_shifter(0.3, 0, 1), squeezer(0.7, 0, 1)
    ab = compose(b, a)
    u = PhasePoint([0.4, -1.1])
    assert np.allclose(apply_affine(ab, u).coords, apply_affine(b, apply_affine(a, u)).coords, atol=1e-14)
    assert compose(identity(1), a).allclose(a)


def test_rejects_non_symplectic():
    with pytest.raises(ConfigError):
        AffineSymplecticMap(np.diag([2.0, 2.0]), np.zeros(2))
    with pytest.raises(DimensionError):
        AffineSymplecticMap(np.eye(3), np.zeros(3))
    with pytest.raises(DimensionError):
        apply_affine(identity(2), PhasePoint([1.0, 2.0]))


def test_gate_target_validation():
    with pytest.raises(ConfigError):
        phase_shifter(0.1, 2, 2)
    with pytest.raises(ConfigError):
        beam_splitter(0.1, 1, 1, 2)


def test_spectral_norm_of_squeezer():
    assert spectral_norm(squeezer(0.8, 0, 1).matrix) == pytest.approx(math.exp(0.8), rel=1e-12)


@given(angles, angles, small, small)
def test_gate_products_remain_symplectic(t1, t2, r1, r2):
    n = 2
    m = identity(n)
    for g in (phase_shifter(t1, 0, n), beam_splitter(t2, 0, 1, n), squeezer(r1, 1, n), squeezer(r2, 0, n),
              displacement(r1, r2, 1, n)):
        m = compose(g, m)
    assert symplectic_residual(m.matrix) < 1e-9 * max(1.0, spectral_norm(m.matrix) ** 2)


@given(angles, hst.lists(small, min_size=4, max_size=4))
def test_orthogonal_gates_preserve_norm(theta, u):
    m = compose(phase_shifter(theta, 1, 2), beam_splitter(theta, 0, 1, 2))
    out = apply_affine(m, np.array(u))
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(u), abs=1e-12)


@given(hst.lists(small, min_size=2, max_size=2), hst.integers(1, 300))
def test_batched_apply_independent_of_batch(u0, size):
    m = compose(squeezer(0.3, 0, 1), phase_shifter(0.9, 0, 1))
    rows = np.random.default_rng(size).normal(size=(size, 2))
    rows[0] = u0
    full = apply_affine(m, rows)
    assert np.array_equal(full[0], apply_affine(m, PhasePoint(u0)).coords)
    assert np.array_equal(full[size // 2 :], apply_affine(m, rows[size // 2 :]))


def test_phase_point_immutable():
    p = PhasePoint([1, 2])
    with pytest.raises(ValueError):
        p.coords[0] = 3.0
    with pytest.raises(DimensionError):
        PhasePoint([1, 2, 3])
