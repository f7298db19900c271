import numpy as np
import pytest
from numpy.testing import assert_allclose

from singlq import AffineFeedback, evaluate_cost, simulate
from singlq.cheap_solver import (assemble_S, assemble_blocks, block_riccati_residuals,
                                 cheap_feedback, control_weight_matrix, extract_blocks,
                                 regularized_weight, solve_pccp)
from singlq.linalg_core import are_residual, solve_are, spectral_abscissa
from singlq.simulation import cost_tolerance

from conftest import zero_disturbance

EPS = (0.2, 0.1, 0.05, 0.025, 0.005, 0.001)


def track_closed_form(eps, q1=2.0, q2=1.0):
    """Scaled blocks of the double-integrator Riccati solution with control weight eps^2."""
    w = np.sqrt(q2 + 2 * eps * np.sqrt(q1))
    return np.sqrt(q1) * w, np.sqrt(q1), w


def test_assemble_s_tracking():
    from singlq import tracking_problem
    assert_allclose(assemble_S(tracking_problem(), 0.1), [[0.0, 0.0], [0.0, 100.0]], rtol=1e-14)


def test_s_block_forms(random_oocps):
    for o in random_oocps:
        S_a = assemble_S(o, 0.3)
        S_b = assemble_S(o, 0.07)
        n1 = o.n1
        assert_allclose(S_a[:n1, :n1], S_b[:n1, :n1], atol=1e-14)
        assert_allclose(S_a[:n1, :n1], o.S1, atol=1e-14)
        for eps in (0.3, 0.07):
            S = assemble_S(o, eps)
            assert_allclose(S[:n1, n1:], o.S2, atol=1e-12)
            assert_allclose(S[n1:, n1:], o.S3(eps) / eps ** 2, rtol=1e-12)
            assert np.linalg.eigvalsh(S).min() >= -1e-10 * np.abs(S).max()


def test_control_weight_matrix_matches_inverse(random_oocps):
    for o in random_oocps:
        for eps in (0.5, 0.01):
            W = control_weight_matrix(o, eps)
            assert_allclose(W, np.linalg.solve(regularized_weight(o, eps), o.B.T),
                            rtol=1e-12, atol=1e-12)


def test_rejects_nonpositive_epsilon(track):
    with pytest.raises(ValueError):
        solve_pccp(track, 0.0)
    with pytest.raises(ValueError):
        solve_pccp(track, 2.0)


@pytest.mark.parametrize("eps", EPS)
def test_tracking_riccati_closed_form(track, eps):
    sol = solve_pccp(track, eps)
    P1, P2, P3 = track_closed_form(eps)
    assert_allclose(sol.P1, [[P1]], rtol=1e-10)
    assert_allclose(sol.P2, [[P2]], rtol=1e-9)
    assert_allclose(sol.P3, [[P3]], rtol=1e-9)
    assert are_residual(sol.P, track.A, sol.S, track.D) < 1e-10
    assert spectral_abscissa(sol.Acl).is_hurwitz


def test_extract_blocks_example():
    P1, P2, P3 = extract_blocks(np.array([[1.0, 0.5], [0.5, 0.5]]), 0.5, 1)
    assert_allclose((P1, P2, P3), ([[1.0]], [[1.0]], [[1.0]]))
    P = np.array([[3.0, 0.2, 0.1], [0.2, 2.0, 0.3], [0.1, 0.3, 0.4]])
    assert_allclose(assemble_blocks(*extract_blocks(P, 0.1, 2), 0.1), P, atol=1e-15)


def test_extracted_blocks_tend_to_reduced(track, track_rs):
    sol = solve_pccp(track, 1e-4)
    P1, P2, P3 = sol.blocks
    assert_allclose(P1, track_rs.P10, atol=1e-3)
    assert_allclose(P2, track_rs.P20, atol=1e-3)
    assert_allclose(P3, track_rs.P30, atol=1e-3)
    assert_allclose(P1, P1.T)
    assert_allclose(P3, P3.T)


@pytest.mark.parametrize("eps", EPS)
def test_block_riccati_residuals(random_oocps, eps):
    for o in random_oocps:
        sol = solve_pccp(o, eps)
        res = block_riccati_residuals(o, eps, *sol.blocks)
        scale = 1.0 + np.linalg.norm(o.D)
        assert max(np.abs(R).max(initial=0.0) for R in res) < 1e-8 * scale


def test_small_eps_path_agrees_with_direct(random_oocps):
    for o in random_oocps:
        eps = 0.005
        sol = solve_pccp(o, eps)
        direct = solve_are(o.A, assemble_S(o, eps), o.D)
        assert_allclose(sol.P, direct, rtol=1e-8, atol=1e-9 * np.abs(direct).max())


def test_h_and_s_residuals(random_oocps, track):
    times = np.concatenate([[0.0], np.logspace(-3, 1, 19)])
    for o in [track] + list(random_oocps):
        for eps in (0.2, 0.02):
            sol = solve_pccp(o, eps)
            dh = sol.h.derivative()
            ds = sol.s.derivative()
            for t in times:
                h, f = sol.h(t), o.disturbance(t)
                r_h = dh(t) + sol.Acl.T @ h + sol.P @ f
                assert np.linalg.norm(r_h) <= 1e-9 * max(1.0, np.linalg.norm(sol.P @ f))
                r_s = ds(t)[0] + 2 * h @ f - h @ sol.S @ h
                assert abs(r_s) <= 1e-9 * max(1.0, abs(h @ sol.S @ h))


def test_zero_disturbance(random_oocps):
    for o in random_oocps:
        oz = zero_disturbance(o)
        sol = solve_pccp(oz, 0.1)
        assert sol.h.is_zero and sol.s.is_zero
        assert sol.Jstar == pytest.approx(oz.z0 @ sol.P @ oz.z0, rel=1e-14)
        assert solve_pccp(zero_disturbance(o, np.zeros(o.n)), 0.1).Jstar == 0.0


def test_tracking_feedback_form(track):
    eps = 0.1
    sol = solve_pccp(track, eps)
    law = cheap_feedback(sol, track)
    rng = np.random.default_rng(0)
    for _ in range(5):
        z, t = rng.standard_normal(2), rng.uniform(0, 3)
        expected = -(sol.P[1] @ z + sol.h(t)[1]) / eps ** 2
        assert_allclose(law(z, t), [expected], rtol=1e-12)


def test_feedback_kernel_case(track):
    sol = solve_pccp(track, 0.1)
    law = cheap_feedback(sol, track)
    t = 0.5
    # choose z with (P z + h(t))_2 = 0, i.e. in the kernel of B'
    z1 = 0.3
    z2 = -(sol.P[1, 0] * z1 + sol.h(t)[1]) / sol.P[1, 1]
    assert_allclose(law(np.array([z1, z2]), t), [0.0], atol=1e-10)
    pure = cheap_feedback(solve_pccp(zero_disturbance(track), 0.1), track)
    assert pure.feedforward.is_zero


def test_cost_consistency_with_simulation(track):
    for eps in (0.2, 0.05):
        sol = solve_pccp(track, eps)
        tr = simulate(track, cheap_feedback(sol, track), epsilon=eps,
                      control_weight=regularized_weight(track, eps))
        assert abs(evaluate_cost(tr, track) - sol.Jstar) <= cost_tolerance(tr) + tr.tail_bound


def test_optimality_against_perturbed_laws(random_oocps):
    rng = np.random.default_rng(5)
    small = [o for o in random_oocps if o.n <= 6][:2]
    for o in small:
        eps = 0.2
        sol = solve_pccp(o, eps)
        base = cheap_feedback(sol, o)
        Gw = regularized_weight(o, eps)
        tried = 0
        while tried < 20:
            K = base.gain * (1 + 0.2 * rng.standard_normal(base.gain.shape))
            law = AffineFeedback(K, base.feedforward)
            if not spectral_abscissa(law.closed_loop(o.A, o.B)).is_hurwitz:
                continue
            tried += 1
            tr = simulate(o, law, epsilon=eps, control_weight=Gw)
            J = evaluate_cost(tr, o)
            assert J >= sol.Jstar - cost_tolerance(tr) - tr.tail_bound


def test_jstar_nonincreasing_in_eps(track, random_oocps):
    for o in [track] + list(random_oocps):
        js = [solve_pccp(o, e).Jstar for e in (0.2, 0.1, 0.05, 0.025, 0.01)]
        assert all(b <= a + 1e-9 for a, b in zip(js, js[1:]))
