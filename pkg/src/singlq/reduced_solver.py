"""Zero-order asymptotics of the cheap control problem and minimizing feedbacks.

The reduced problem lives on the slow state ``x`` (dimension ``n1``):

    dx/dt = A1 x + Bbar ubar + f1(t),    Jbar = int x'D1x + ubar' Theta ubar,

and its solution yields the infimum of the singular problem and two
sequences of feedback laws ``u_{eps,1}``, ``u_{eps,2}`` whose costs tend to
that infimum as ``eps -> 0``.
"""

from dataclasses import dataclass

import numpy as np

from .cheap_solver import control_weight_matrix, feedforward_modes, cost_offset
from .feedback import AffineFeedback
from .linalg_core import solve_are, spd_sqrt, spectral_abscissa
from .problem_model import ExpSignal

__all__ = [
    "ReducedSolution",
    "solve_reduced",
    "zero_order_residuals",
    "reduced_feedback",
    "minimizing_feedback_1",
    "minimizing_feedback_2",
    "zero_order_feedback",
]

ALPHA_SAFETY = 0.99


@dataclass(frozen=True, eq=False)
class ReducedSolution:
    P10: np.ndarray
    P20: np.ndarray
    P30: np.ndarray
    S0: np.ndarray
    Bbar: np.ndarray
    Theta: np.ndarray
    Acl0: np.ndarray
    h10: ExpSignal
    h20: ExpSignal
    s0: ExpSignal
    Jbar: float
    alpha: float
    mu: float
    x0: np.ndarray
    H1: np.ndarray
    H3: np.ndarray
    Gtilde: np.ndarray
    A2: np.ndarray
    D2: np.ndarray

    @property
    def n1(self):
        return self.P10.shape[0]

    @property
    def q(self):
        return self.H3.shape[0]

    @property
    def beta(self):
        """Smallest eigenvalue of ``D2^{1/2}`` (boundary-layer decay rate)."""
        return float(np.linalg.eigvalsh(self.P30).min())


def solve_reduced(o):
    """Zero-order terms of the cheap control asymptotics for ``o``."""
    A1, A2, D1, D2 = o.A1, o.A2, o.D1, o.D2
    D2inv = np.linalg.inv(D2)
    S0 = A2 @ D2inv @ A2.T + o.S1
    S0 = 0.5 * (S0 + S0.T)
    Bbar, Theta = o.Bbar, o.Theta
    S0_alt = Bbar @ np.linalg.solve(Theta, Bbar.T)
    gap = np.linalg.norm(S0 - S0_alt)
    if gap > 1e-10 * max(1.0, np.linalg.norm(S0)):
        raise ArithmeticError(f"two forms of S0 disagree by {gap:.3e}")

    P10 = solve_are(A1, S0, D1)
    P30 = spd_sqrt(D2)
    P20 = P10 @ A2 @ np.linalg.inv(P30)
    Acl0 = A1 - S0 @ P10

    f1 = o.f1
    h10 = feedforward_modes(Acl0, P10, f1)
    h20 = h10.map(np.linalg.solve(P30, A2.T))
    s0 = cost_offset(h10, f1, S0)
    x0 = o.x0
    Jbar = float(x0 @ P10 @ x0 + 2.0 * h10(0.0) @ x0 + s0(0.0)[0])

    alpha = ALPHA_SAFETY * spectral_abscissa(Acl0).decay_margin
    mu = min(alpha, o.disturbance.min_rate)
    return ReducedSolution(
        P10=P10, P20=P20, P30=P30, S0=S0, Bbar=Bbar, Theta=Theta, Acl0=Acl0,
        h10=h10, h20=h20, s0=s0, Jbar=Jbar, alpha=float(alpha), mu=float(mu),
        x0=x0.copy(), H1=o.H1, H3=o.H3, Gtilde=o.Gtilde, A2=A2.copy(), D2=D2.copy())


def zero_order_residuals(o, rs):
    """Residuals of the zero-order block equations for ``(P10, P20, P30)``."""
    R1 = (rs.P10 @ o.A1 + o.A1.T @ rs.P10 - rs.P10 @ o.S1 @ rs.P10
          - rs.P20 @ rs.P20.T + o.D1)
    R2 = rs.P10 @ o.A2 - rs.P20 @ rs.P30
    R3 = rs.P30 @ rs.P30 - o.D2
    return R1, R2, R3


def reduced_feedback(rs):
    """Optimal reduced-problem law ``ubar = -Theta^{-1} Bbar' (P10 x + h10(t))``.

    The first ``q`` outputs form ``ubar_1`` and the rest ``ubar_2``.
    """
    M = np.linalg.solve(rs.Theta, rs.Bbar.T)
    return AffineFeedback(-M @ rs.P10, rs.h10.map(-M))


def _lower_block(rs, o, epsilon):
    gain = -np.hstack([rs.P20.T, rs.P30]) / epsilon
    return AffineFeedback(gain, rs.h20.scale(-1.0 / epsilon))


def minimizing_feedback_1(rs, o, epsilon):
    """``u_{eps,1}``: the cheap-control law with the zero-order ``P`` and ``h``.

    Upper block ``-(K1 x + eps K2 y + H3 h10 + eps H1 h20)`` with
    ``K1 = H3 P10 + eps H1 P20'`` and ``K2 = H3 P20 + H1 P30``; lower block
    ``-(P20' x + P30 y + h20) / eps``.
    """
    e = epsilon
    K1 = rs.H3 @ rs.P10 + e * rs.H1 @ rs.P20.T
    K2 = rs.H3 @ rs.P20 + rs.H1 @ rs.P30
    upper_gain = -np.hstack([K1, e * K2])
    upper_ff = ExpSignal.concat(rs.h10, rs.h20).map(-np.hstack([rs.H3, e * rs.H1]))
    upper = AffineFeedback(upper_gain, upper_ff)
    return upper.stack(_lower_block(rs, o, e))


def minimizing_feedback_2(rs, o, epsilon):
    """``u_{eps,2}``: upper block replaced by its limit ``ubar_1(x, t)``."""
    upper_gain = np.hstack([-rs.H3 @ rs.P10, np.zeros((o.q, o.n2))])
    upper = AffineFeedback(upper_gain, rs.h10.map(-rs.H3))
    return upper.stack(_lower_block(rs, o, epsilon))


def zero_order_feedback(rs, o, epsilon):
    """Same law as :func:`minimizing_feedback_1`, built from ``(G+E)^{-1}B'``.

    Kept as a cross-check of the block expansion.
    """
    from .cheap_solver import assemble_blocks
    W = control_weight_matrix(o, epsilon)
    P0 = assemble_blocks(rs.P10, rs.P20, rs.P30, epsilon)
    h0 = ExpSignal.concat(rs.h10, rs.h20.scale(epsilon))
    return AffineFeedback(-W @ P0, h0.map(-W))
