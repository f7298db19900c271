import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from singlq.exceptions import DimensionMismatch, NotPSD, NotSymmetric, StructureViolation
from singlq.problem_model import (ExpSignal, Oocp, RawProblem, bilinear, factor_d1,
                                  hautus_margin, tail_antiderivative, validate_oocp,
                                  validate_raw, validate_reduced)


def track_raw(**kw):
    data = dict(Acal=[[0.0, 1.0], [0.0, 0.0]], Bcal=[[0.0], [1.0]], Dcal=np.diag([2.0, 1.0]),
                g=[], disturbance=ExpSignal([1.0], [[4.0, 2.0]]), Z0=[2.0, 1.0], q=0)
    data.update(kw)
    return RawProblem(**data)


# ------------------------------------------------------------- ExpSignal

def test_expsignal_evaluation_exact():
    f = ExpSignal([1.0, 3.0], [[1.0, 2.0], [-1.0, 0.5]])
    t = 0.7
    assert_allclose(f(t), np.array([1.0, 2.0]) * np.exp(-t) + np.array([-1.0, 0.5]) * np.exp(-3 * t),
                    rtol=1e-15)
    grid = np.array([0.0, 1.0, 2.0])
    assert f(grid).shape == (3, 2)
    assert_allclose(f(grid)[1], f(1.0))


def test_expsignal_merges_equal_rates():
    f = ExpSignal([2.0, 2.0], [[1.0], [3.0]])
    assert f.rates.tolist() == [2.0]
    assert_allclose(f.coefs, [[4.0]])


def test_expsignal_rejects_nonpositive_rates():
    with pytest.raises(ValueError):
        ExpSignal([0.0], [[1.0]])
    with pytest.raises(ValueError):
        ExpSignal([-1.0], [[1.0]])


def test_expsignal_zero_and_algebra():
    z = ExpSignal.zero(3)
    assert z.is_zero and z.dim == 3
    assert_allclose(z(5.0), np.zeros(3))
    f = ExpSignal([1.0], [[1.0, 2.0]])
    g = ExpSignal([2.0], [[3.0, -1.0]])
    t = 0.3
    assert_allclose((f + g)(t), f(t) + g(t))
    assert_allclose((f - g)(t), f(t) - g(t))
    assert_allclose(f.map(np.array([[1.0, 1.0]]))(t), [f(t).sum()])
    assert_allclose(f.derivative()(t), -f(t))
    assert_allclose(ExpSignal.concat(f, g)(t), np.concatenate([f(t), g(t)]))
    assert_allclose(ExpSignal.concat(f, g).block(2, 4)(t), g(t))


def test_bilinear_and_tail_antiderivative():
    f = ExpSignal([1.0, 2.0], [[1.0, 0.0], [0.5, 1.0]])
    M = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = bilinear(f, M, f)
    for t in (0.0, 0.4, 2.0):
        assert_allclose(b(t), [f(t) @ M @ f(t)], rtol=1e-14)
    # S(t) = -int_t^inf b; check S' = b numerically
    S = tail_antiderivative(b)
    dt = 1e-6
    for t in (0.1, 1.0):
        assert_allclose((S(t + dt) - S(t - dt)) / (2 * dt), b(t), rtol=1e-7)
    assert_allclose(S(60.0), [0.0], atol=1e-20)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
def test_expsignal_bound(dim, modes, seed):
    rng = np.random.default_rng(seed)
    f = ExpSignal(rng.uniform(0.1, 5.0, modes), rng.standard_normal((modes, dim)))
    for t in np.linspace(0.0, 10.0, 25):
        assert np.linalg.norm(f(t)) <= f.bound_constant() * np.exp(-f.min_rate * t) * (1 + 1e-12)


# ------------------------------------------------------------ RawProblem

def test_rawproblem_fields():
    p = track_raw()
    assert (p.n, p.r, p.q) == (2, 1, 0)
    assert_allclose(p.G, np.zeros((1, 1)))
    assert p.B1.shape == (2, 0)


def test_rawproblem_validation_errors():
    with pytest.raises(NotSymmetric):
        track_raw(Dcal=[[2.0, 1.0], [0.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        track_raw(Z0=[1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatch):
        track_raw(q=1)


def test_validate_raw_tracking_passes():
    rep = validate_raw(track_raw())
    assert rep.all_pass
    assert rep["A3"].message.startswith("vacuous")


def test_validate_raw_zero_b_fails_a1():
    rep = validate_raw(track_raw(Bcal=[[0.0], [0.0]]))
    assert not rep["A1"].passed
    assert rep["A1"].witness == 0


def test_validate_raw_zero_d_fails_a5():
    rep = validate_raw(track_raw(Dcal=np.zeros((2, 2))))
    assert not rep["A5"].passed
    assert rep["A2"].passed


def test_validate_raw_indefinite_d_fails_a2():
    rep = validate_raw(track_raw(Dcal=np.diag([-1.0, 1.0])))
    assert not rep["A2"].passed


# ------------------------------------------------------------------ Oocp

def test_oocp_enforces_structure():
    with pytest.raises(StructureViolation):
        Oocp(A=np.zeros((2, 2)), B=[[1.0], [1.0]], D1=[[1.0]], D2=[[1.0]], g=[],
             disturbance=ExpSignal.zero(2), z0=[0, 0], q=0)
    o = Oocp(A=np.zeros((2, 2)), B=[[1e-12], [1.0]], D1=[[1.0]], D2=[[1.0]], g=[],
             disturbance=ExpSignal.zero(2), z0=[0, 0], q=0)
    assert o.B[0, 0] == 0.0 and o.B[1, 0] == 1.0


def test_oocp_blocks_and_weights():
    rng = np.random.default_rng(1)
    n, r, q = 4, 2, 1
    n1, n2 = n - r + q, r - q
    B = np.zeros((n, r))
    B[n - r:n1, :q] = 1.0
    B[n1:, :q] = 0.7
    B[n1:, q:] = 1.0
    o = Oocp(A=rng.standard_normal((n, n)), B=B, D1=np.eye(n1), D2=[[2.0]], g=[3.0],
             disturbance=ExpSignal.zero(n), z0=np.ones(n), q=q)
    assert (o.n1, o.n2) == (3, 1)
    assert o.D[:n1, n1:].max() == 0.0
    # closed form of (G+E)^{-1}B' upper rows against direct inversion
    eps = 0.3
    W_direct = np.linalg.solve(np.diag([3.0, eps ** 2]), o.B.T)
    assert_allclose(W_direct[:q, :n1], o.H3)
    assert_allclose(W_direct[:q, n1:], o.H1)
    # S0 two forms
    S0a = o.A2 @ np.linalg.solve(o.D2, o.A2.T) + o.S1
    S0b = o.Bbar @ np.linalg.solve(o.Theta, o.Bbar.T)
    assert_allclose(S0a, S0b, atol=1e-12)


# ------------------------------------------------------------ factor_d1

def test_factor_d1_examples():
    assert_allclose(factor_d1([[2.0]]), [[np.sqrt(2.0)]])
    assert factor_d1(np.zeros((2, 2))).shape == (0, 2)
    F = factor_d1(np.eye(3))
    assert_allclose(F.T @ F, np.eye(3), atol=1e-15)
    assert F.shape == (3, 3)


def test_factor_d1_not_psd():
    with pytest.raises(NotPSD):
        factor_d1(np.diag([1.0, -1.0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 5), st.integers(0, 2 ** 31 - 1))
def test_factor_d1_roundtrip(m, k, seed):
    L = np.random.default_rng(seed).standard_normal((m, min(k, m)))
    D1 = L @ L.T
    F = factor_d1(D1)
    assert F.shape[0] == np.linalg.matrix_rank(D1, tol=1e-10 * max(1.0, np.abs(D1).max()))
    assert np.linalg.norm(F.T @ F - D1) <= 1e-12 * max(np.linalg.norm(D1), 1e-300) * 10


# ------------------------------------------------------ A6 / A7 (Hautus)

def reduced_only(A1, A2, D1, D2=1.0):
    """OOCP with n1 = 1 slow state, one singular control and given A1, A2."""
    A = np.array([[A1, A2], [0.0, 0.0]])
    return Oocp(A=A, B=[[0.0], [1.0]], D1=[[D1]], D2=[[D2]], g=[],
                disturbance=ExpSignal.zero(2), z0=[1.0, 0.0], q=0)


def test_a6_tracking_passes():
    rep = validate_reduced(reduced_only(0.0, 1.0, 2.0))
    assert rep["A6"].passed and rep["A6"].witness >= 1.0 - 1e-12


def test_a6_fails_uncontrollable_unstable():
    assert not validate_reduced(reduced_only(1.0, 0.0, 2.0))["A6"].passed


def test_a7_passes_for_stable_unobserved_mode():
    rep = validate_reduced(reduced_only(-1.0, 1.0, 0.0))
    assert rep["A7"].passed


def test_a7_fails_for_unstable_unobserved_mode():
    assert not validate_reduced(reduced_only(1.0, 1.0, 0.0))["A7"].passed


def test_hautus_margin_no_unstable_modes():
    assert hautus_margin([[-1.0]], np.zeros((1, 0))) == np.inf


def test_validate_oocp_report_complete():
    rep = validate_oocp(reduced_only(0.0, 1.0, 2.0))
    assert [c.name for c in rep.checks] == ["A2", "A3", "A4", "A5", "A6", "A7"]
    assert rep.all_pass
    assert "A6" in rep.render()
    assert rep.to_json()["all_pass"] is True
