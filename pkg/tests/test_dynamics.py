import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncphase import GaussFactor, PhysParams, SepGaussFunction, derive, f_infinity, smooth
from ncphase.dynamics import (
    OMEGA,
    evolution_matrix,
    evolved_hbar0,
    hbar0_cancellation,
    recover_period,
    smooth_evolved,
    smooth_evolved_closed_form,
    symplectic_residual,
    weyl_label_flow,
)
from ncphase.smoothing import QuadratureSpec

from .strategies import phys_params

BUMP = GaussFactor(1.0, 0.0, 1.0, 1.0)
GAUSS = SepGaussFunction.gaussian(centers=(0.5, -0.3, 0.2, 0.4))
R = np.array([0.4, -0.2, 0.6, 0.1])
times = st.floats(-50.0, 50.0)


def test_identity_at_t0():
    assert np.array_equal(evolution_matrix(0.0, PhysParams(1, 1)).matrix, np.eye(4))


@pytest.mark.parametrize("t", [0.3, 1.0, 4.0])
def test_commutative_single_frequency(t):
    A = evolution_matrix(t, PhysParams(hbar=1, theta=0)).matrix
    c, s = math.cos(t), math.sin(t)
    expected = np.array([[c, 0, -s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, s, 0, c]])
    np.testing.assert_allclose(A, expected, atol=1e-15)


def test_hbar_zero_freezes_second_block():
    p = PhysParams(hbar=0, theta=1)
    A = evolution_matrix(2.0, p).matrix
    assert A[1, 1] == 1 and A[3, 3] == 1 and A[1, 3] == 0 and A[3, 1] == 0
    assert A[0, 0] == pytest.approx(math.cos(2.0))


@settings(max_examples=100, deadline=None)
@given(phys_params(hbar=(1e-2, 1e2), theta=(1e-2, 1e2), mass=(0.2, 5), omega=(0.2, 5)), times, times)
def test_symplectic_group_and_determinant(p, t, s):
    A_t, A_s = evolution_matrix(t, p).matrix, evolution_matrix(s, p).matrix
    A_minus = evolution_matrix(-t, p).matrix
    assert np.linalg.norm(OMEGA @ A_t - A_minus.T @ OMEGA) < 1e-12
    assert symplectic_residual(A_t) < 1e-12
    assert evolution_matrix(t, p).det == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(A_t @ A_s - evolution_matrix(t + s, p).matrix) < 1e-12


@settings(max_examples=50, deadline=None)
@given(phys_params(theta=(1.0, 1.0), mass=(0.2, 5), omega=(0.2, 5)).map(lambda p: p.replace(theta=0.0)), st.floats(-5, 5))
def test_period_at_theta_zero(p, t):
    T = 2 * math.pi / p.omega
    assert np.linalg.norm(evolution_matrix(t + T, p).matrix - evolution_matrix(t, p).matrix) < 1e-12


@pytest.mark.parametrize("omega", [1.0, 2.5, 0.3])
def test_recover_period(omega):
    p = PhysParams(hbar=1e-6, theta=0, omega=omega)
    assert recover_period(p) == pytest.approx(2 * math.pi / omega, abs=1e-6)


def test_smooth_evolved_at_t0_is_smooth():
    p = PhysParams(0.3, 0.2)
    assert smooth_evolved(GAUSS, R, 0.0, p) == smooth(GAUSS, R, p)


@pytest.mark.parametrize("t", [0.5, 2.0, 4.5])
def test_classical_trajectory_commutative(t):
    p = PhysParams(hbar=1e-10, theta=0)
    expected = float(GAUSS(evolution_matrix(-t, p).matrix @ R))
    assert smooth_evolved(GAUSS, R, t, p).value == pytest.approx(expected, abs=1e-6)


def test_classical_limit_along_diagonal_with_time():
    # along hbar = theta the frequency ratio stays fixed, so the limit keeps both frequencies
    p = PhysParams(hbar=1e-9, theta=1e-9)
    d = derive(p)
    assert d.omega_plus == pytest.approx(1.0)
    assert d.omega_minus == pytest.approx((math.sqrt(5) - 1) / (math.sqrt(5) + 1))
    t = 1.3
    expected = float(GAUSS(evolution_matrix(-t, p).matrix @ R))
    assert smooth_evolved(GAUSS, R, t, p).value == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("flow", ["block", "exact"])
def test_quadrature_matches_closed_form(flow):
    p = PhysParams(0.2, 0.1)
    q = QuadratureSpec(hermite_order=40)
    res = smooth_evolved(GAUSS, R, 1.7, p, q, flow=flow)
    assert res.value == pytest.approx(smooth_evolved_closed_form(GAUSS, R, 1.7, p, flow=flow), abs=1e-10)


def test_flows_agree_at_small_theta():
    p = PhysParams(1.0, 1e-7)
    for t in (0.4, 2.2):
        a = smooth_evolved_closed_form(GAUSS, R, t, p, flow="block")
        b = smooth_evolved_closed_form(GAUSS, R, t, p, flow="exact")
        assert a == pytest.approx(b, abs=1e-6)
        np.testing.assert_allclose(weyl_label_flow(t, p), evolution_matrix(t, p).matrix, atol=1e-6)


def test_label_flow_is_a_one_parameter_group():
    p = PhysParams(0.6, 1.4, 1.3, 0.8)
    T = lambda t: weyl_label_flow(t, p)
    np.testing.assert_allclose(T(0.7) @ T(1.1), T(1.8), atol=1e-12)
    np.testing.assert_allclose(T(0.7) @ T(-0.7), np.eye(4), atol=1e-12)


def test_unknown_flow():
    with pytest.raises(ValueError):
        smooth_evolved(GAUSS, R, 1.0, PhysParams(1, 1), flow="other")


F_HB = SepGaussFunction(factors=(BUMP, BUMP, BUMP, GaussFactor(1.0, 0.3, 1.0, 0.0)))


def test_evolved_hbar0_constant_function():
    assert evolved_hbar0(SepGaussFunction.one(), R, 3.0, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_evolved_hbar0_independent_of_t_and_positions():
    ref = evolved_hbar0(F_HB, [0, 0, 0, 0.2], 0.0, 0.5)
    for t in (0.0, 1.0, 10.0):
        for x1 in (0.0, 5.0, 50.0):
            for x2, y1 in [(0.0, 0.0), (3.0, -2.0)]:
                assert evolved_hbar0(F_HB, [x1, x2, y1, 0.2], t, 0.5) == pytest.approx(ref, abs=1e-12)


def test_evolved_hbar0_classical_limit():
    F_inf = f_infinity(F_HB, ["x1", "x2", "y1"])
    for y2 in (-0.5, 0.0, 0.8):
        assert evolved_hbar0(F_HB, [0, 0, 0, y2], 2.0, 1e-10) == pytest.approx(float(F_inf([0, 0, 0, y2])), abs=1e-8)


def test_evolved_hbar0_rejects():
    with pytest.raises(TypeError):
        evolved_hbar0(SepGaussFunction.from_callable(lambda r: r[..., 0]), R, 1.0, 1.0)
    with pytest.raises(ValueError):
        evolved_hbar0(F_HB, R, 1.0, 0.0)


def test_hbar0_cancellation_trend():
    rows = hbar0_cancellation(10.0 ** -np.arange(1, 7), t=1.0, theta=1.0)
    f = [row[1] for row in rows]
    prod = [abs(row[3]) for row in rows]
    assert all(a < b for a, b in zip(f, f[1:]))
    assert all(a > b for a, b in zip(prod, prod[1:]))
    assert prod[-1] < 1e-5
    # omega_minus vanishes like hbar^2
    d1, d2 = derive(PhysParams(1e-3, 1.0)), derive(PhysParams(1e-4, 1.0))
    assert d1.omega_minus / d2.omega_minus == pytest.approx(100, rel=1e-4)
