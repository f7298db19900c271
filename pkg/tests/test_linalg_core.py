import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from singlq.exceptions import (NoStabilizingSolution, NotPositiveDefinite, NotSymmetric,
                               Overflow, RankDeficient, SingularShift)
from singlq.linalg_core import (are_residual, complement_basis, expm, newton_kleinman,
                                numerical_rank, solve_are, solve_shifted_linear, spd_sqrt,
                                spectral_abscissa)

from conftest import nk_oracle


def random_stable(rng, n):
    A = rng.standard_normal((n, n))
    return A - (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(n)


# ---------------------------------------------------------------- spd_sqrt

def test_spd_sqrt_identity():
    assert_allclose(spd_sqrt(np.eye(2)), np.eye(2), atol=1e-15)


def test_spd_sqrt_diagonal():
    assert_allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)


def test_spd_sqrt_tracking_d2():
    assert_allclose(spd_sqrt([[1.0]]), [[1.0]])


def test_spd_sqrt_errors():
    with pytest.raises(NotSymmetric):
        spd_sqrt([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        spd_sqrt(np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefinite):
        spd_sqrt(np.diag([1.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
def test_spd_sqrt_properties(n, seed):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((n, n))
    M = L @ L.T + 0.1 * np.eye(n)
    R = spd_sqrt(M)
    assert_allclose(R, R.T, atol=0)
    assert np.linalg.norm(R @ R - M) <= 1e-12 * np.linalg.norm(M) * 10
    assert_allclose(np.sort(np.linalg.eigvalsh(R)), np.sqrt(np.sort(np.linalg.eigvalsh(M))),
                    rtol=1e-10)


# ------------------------------------------------------- spectral abscissa

def test_spectral_abscissa_examples():
    assert spectral_abscissa([[-2.0]]).abscissa == pytest.approx(-2.0)
    rep = spectral_abscissa(np.eye(2))
    assert rep.abscissa == pytest.approx(1.0) and not rep.is_hurwitz
    rep = spectral_abscissa([[0.0, 1.0], [0.0, 0.0]])
    assert rep.abscissa == pytest.approx(0.0, abs=1e-12) and not rep.is_hurwitz
    assert spectral_abscissa([[-2.0]]).is_hurwitz


# --------------------------------------------------------------- solve_are

def test_are_scalar_reduced():
    assert_allclose(solve_are([[0.0]], [[2.0]], [[2.0]]), [[1.0]], atol=1e-14)


def test_are_zero_data():
    assert_allclose(solve_are([[-1.0]], [[0.0]], [[0.0]]), [[0.0]], atol=1e-14)


def test_are_double_integrator_closed_form():
    # x'' = u, cost q1 x^2 + q2 v^2 + r u^2: classical closed form
    q1, q2, r = 2.0, 1.0, 0.01
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    S = np.array([[0.0, 0.0], [0.0, 1.0 / r]])
    P = solve_are(A, S, np.diag([q1, q2]))
    p12 = np.sqrt(q1 * r)
    p22 = np.sqrt(r * (q2 + 2 * p12))
    p11 = p12 * p22 / r
    assert_allclose(P, [[p11, p12], [p12, p22]], rtol=1e-12)


def test_are_unstabilizable_raises():
    # unstable mode, no control, observed: no stabilizing solution
    with pytest.raises(NoStabilizingSolution):
        solve_are([[1.0]], [[0.0]], [[1.0]])


@pytest.mark.parametrize("seed", range(8))
def test_are_matches_newton_kleinman_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 5))
    A = random_stable(rng, n)
    B = rng.standard_normal((n, max(1, n - 1)))
    C = rng.standard_normal((n, n))
    S, D = B @ B.T, C.T @ C
    P = solve_are(A, S, D)
    P_or = nk_oracle(A, S, D, np.zeros((n, n)))
    assert_allclose(P, P_or, atol=1e-8 * max(1.0, np.abs(P_or).max()))
    assert are_residual(P, A, S, D) < 1e-10
    assert spectral_abscissa(A - S @ P).is_hurwitz


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1))
def test_are_postconditions(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, n))
    S = B @ B.T + 1e-3 * np.eye(n)
    D = np.eye(n)
    P = solve_are(A, S, D)
    assert are_residual(P, A, S, D) < 1e-10
    assert spectral_abscissa(A - S @ P).is_hurwitz
    assert np.min(np.linalg.eigvalsh(P)) >= -1e-10


def test_newton_kleinman_polishes_seed():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    S = np.diag([0.0, 100.0])
    D = np.diag([2.0, 1.0])
    exact = solve_are(A, S, D)
    P = newton_kleinman(A, S, D, exact + 0.01 * np.eye(2))
    assert_allclose(P, exact, rtol=1e-12)


# ----------------------------------------------------- solve_shifted_linear

def test_shifted_examples():
    assert_allclose(solve_shifted_linear([[-2.0]], 1.0, [4.0]), [4.0 / 3.0])
    c = np.array([1.5, -2.0, 7.0])
    assert_allclose(solve_shifted_linear(np.zeros((3, 3)), 1.0, c), c)
    assert_allclose(solve_shifted_linear(np.diag([-1.0, -3.0]), 2.0, [3.0, 5.0]), [1.0, 1.0])


def test_shifted_resonance():
    with pytest.raises(SingularShift):
        solve_shifted_linear(np.diag([1.0, -1.0]), 1.0, [1.0, 1.0])


def test_shifted_mode_solves_ode_by_finite_differences():
    # h(t) = v e^{-gamma t} with v = (gamma I - M)^{-1} c solves h' = -M h - c e^{-gamma t}
    rng = np.random.default_rng(7)
    M = random_stable(rng, 3)
    c = rng.standard_normal(3)
    gamma = 0.8
    v = solve_shifted_linear(M, gamma, c)
    h = lambda t: v * np.exp(-gamma * t)
    dt = 1e-5
    for t in np.linspace(0.0, 5.0, 10):
        fd = (h(t + dt) - h(t - dt)) / (2 * dt)
        assert np.linalg.norm(fd - (-M @ h(t) - c * np.exp(-gamma * t))) <= 1e-6


# ------------------------------------------------------------ complement

def test_complement_axis():
    Bc = complement_basis(np.array([[0.0], [1.0]]))
    assert_allclose(np.abs(Bc), [[1.0], [0.0]])


def test_complement_full():
    assert complement_basis(np.eye(3)).shape == (3, 0)


def test_complement_diagonal_direction():
    Bc = complement_basis(np.array([[1.0], [1.0]]) / np.sqrt(2))
    assert_allclose(np.abs(Bc.ravel()), [1 / np.sqrt(2)] * 2, atol=1e-14)
    assert abs(Bc[:, 0] @ np.array([1.0, 1.0])) < 1e-14
    assert Bc[0, 0] > 0  # sign convention


def test_complement_rank_deficient():
    with pytest.raises(RankDeficient):
        complement_basis(np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]))
    assert numerical_rank(np.zeros((3, 2))) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 31 - 1), st.data())
def test_complement_properties(n, seed, data):
    r = data.draw(st.integers(1, n))
    B = np.random.default_rng(seed).standard_normal((n, r))
    Bc = complement_basis(B)
    assert Bc.shape == (n, n - r)
    assert np.abs(Bc.T @ B).max(initial=0.0) <= 1e-12 * np.abs(B).max()
    assert_allclose(Bc.T @ Bc, np.eye(n - r), atol=1e-12)
    assert abs(np.linalg.det(np.hstack([Bc, B]))) > 1e-12


# ------------------------------------------------------------------ expm

def test_expm_examples():
    M = np.random.default_rng(0).standard_normal((3, 3))
    assert_allclose(expm(M, 0.0), np.eye(3), atol=0)
    assert_allclose(expm(np.diag([-1.0, -2.0]), 1.0), np.diag([np.exp(-1), np.exp(-2)]), rtol=1e-14)
    assert_allclose(expm([[0.0, 1.0], [0.0, 0.0]], 1.0), [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)


def test_expm_overflow():
    with pytest.raises(Overflow):
        expm([[1000.0]], 10.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31 - 1),
       st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_expm_semigroup(n, seed, t, s):
    M = np.random.default_rng(seed).standard_normal((n, n))
    M *= min(1.0, 5.0 / np.linalg.norm(M, 2))
    gap = np.linalg.norm(expm(M, t) @ expm(M, s) - expm(M, t + s))
    assert gap <= 1e-9 * max(1.0, np.linalg.norm(expm(M, t + s)))
