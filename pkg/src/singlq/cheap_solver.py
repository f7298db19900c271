"""Exact solution of the partial cheap control problem for a fixed epsilon.

The singular control coordinates get the weight ``epsilon**2``; the
resulting regular LQ problem is solved through its algebraic Riccati
equation and the closed-form (exponential-mode) feedforward ``h`` and
cost offset ``s``.
"""

from dataclasses import dataclass

import numpy as np

from .feedback import AffineFeedback
from .linalg_core import solve_are, solve_shifted_linear, spectral_abscissa
from .problem_model import ExpSignal, bilinear, tail_antiderivative
from .exceptions import NoStabilizingSolution

__all__ = [
    "CheapSolution",
    "assemble_S",
    "control_weight_matrix",
    "regularized_weight",
    "solve_pccp",
    "cheap_feedback",
    "extract_blocks",
    "assemble_blocks",
    "block_riccati_residuals",
    "feedforward_modes",
    "cost_offset",
]

SMALL_EPSILON = 1e-2


def assemble_S(o, epsilon):
    """``S(eps) = B (G + E)^{-1} B'`` with ``E = diag(0_q, eps^2 I)``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    w = np.concatenate([o.g, np.full(o.n2, epsilon ** 2)])
    S = (o.B / w) @ o.B.T
    return 0.5 * (S + S.T)


def regularized_weight(o, epsilon):
    """Control weight ``G + E(eps)`` of the partial cheap control cost."""
    return np.diag(np.concatenate([o.g, np.full(o.n2, float(epsilon) ** 2)]))


def control_weight_matrix(o, epsilon):
    """``(G + E)^{-1} B'`` assembled from its block closed form.

    Upper ``q`` rows are ``(H3, H1)``, lower rows ``(0, I / eps^2)``.
    """
    W = np.zeros((o.r, o.n))
    W[:o.q, :o.n1] = o.H3
    W[:o.q, o.n1:] = o.H1
    W[o.q:, o.n1:] = np.eye(o.n2) / epsilon ** 2
    return W


def extract_blocks(P, epsilon, n1):
    """Split ``P = [[P1, eps P2], [eps P2', eps P3]]`` into ``(P1, P2, P3)``."""
    P = np.asarray(P, dtype=float)
    return P[:n1, :n1].copy(), P[:n1, n1:] / epsilon, P[n1:, n1:] / epsilon


def assemble_blocks(P1, P2, P3, epsilon):
    return np.block([[P1, epsilon * P2], [epsilon * P2.T, epsilon * P3]])


def block_riccati_residuals(o, epsilon, P1, P2, P3):
    """Residual matrices of the three block Riccati equations.

    This is the full Riccati equation rewritten in the scaled blocks;
    it is evaluated term by term without forming ``S(eps)``.
    """
    e = epsilon
    A1, A2, A3, A4 = o.A1, o.A2, o.A3, o.A4
    S1, S2, S3 = o.S1, o.S2, o.S3(e)
    R1 = (P1 @ A1 + e * P2 @ A3 + A1.T @ P1 + e * A3.T @ P2.T - P1 @ S1 @ P1
          - e * P2 @ S2.T @ P1 - e * P1 @ S2 @ P2.T - P2 @ S3 @ P2.T + o.D1)
    R2 = (P1 @ A2 + e * P2 @ A4 + e * A1.T @ P2 + e * A3.T @ P3 - e * P1 @ S1 @ P2
          - e ** 2 * P2 @ S2.T @ P2 - e * P1 @ S2 @ P3 - P2 @ S3 @ P3)
    R3 = (e * P2.T @ A2 + e * P3 @ A4 + e * A2.T @ P2 + e * A4.T @ P3
          - e ** 2 * P2.T @ S1 @ P2 - e ** 2 * P3 @ S2.T @ P2 - e ** 2 * P2.T @ S2 @ P3
          - P3 @ S3 @ P3 + o.D2)
    return R1, R2, R3


def feedforward_modes(Acl, P, f):
    """Solve ``dh/dt = -Acl' h - P f``, ``h(+inf) = 0`` mode by mode."""
    coefs = [solve_shifted_linear(Acl.T, rate, P @ c) for rate, c in zip(f.rates, f.coefs)]
    if not coefs:
        return ExpSignal.zero(P.shape[0])
    return ExpSignal(f.rates, np.array(coefs), dim=P.shape[0])


def cost_offset(h, f, S):
    """Solve ``ds/dt = -2 h'f + h'S h``, ``s(+inf) = 0``."""
    rhs = bilinear(h, S, h) - bilinear(h, np.eye(h.dim), f).scale(2.0)
    return tail_antiderivative(rhs)


@dataclass(frozen=True, eq=False)
class CheapSolution:
    epsilon: float
    P: np.ndarray
    S: np.ndarray
    Acl: np.ndarray
    h: ExpSignal
    s: ExpSignal
    Jstar: float
    n1: int

    @property
    def blocks(self):
        return extract_blocks(self.P, self.epsilon, self.n1)

    @property
    def P1(self):
        return self.blocks[0]

    @property
    def P2(self):
        return self.blocks[1]

    @property
    def P3(self):
        return self.blocks[2]

    @property
    def h1(self):
        return self.h.block(0, self.n1)

    @property
    def h2(self):
        """Scaled lower block: ``h = (h1, eps * h2)``."""
        return self.h.block(self.n1, self.h.dim).scale(1.0 / self.epsilon)


def _asymptotic_seed(o, epsilon, reduced):
    if reduced is None:
        from .reduced_solver import solve_reduced
        reduced = solve_reduced(o)
    return assemble_blocks(reduced.P10, reduced.P20, reduced.P30, epsilon)


def solve_pccp(o, epsilon, eps_max=1.0, reduced=None):
    """Solve the partial cheap control problem at ``epsilon``.

    For ``epsilon < 1e-2`` the Riccati solve is a Newton-Kleinman
    iteration started from the zero-order asymptotic solution (``reduced``
    if given, otherwise computed); larger values use the Hamiltonian
    method directly.

    Returns
    -------
    CheapSolution
    """
    if not 0 < epsilon <= eps_max:
        raise ValueError(f"epsilon must lie in (0, {eps_max}], got {epsilon!r}")
    A, D = o.A, o.D
    S = assemble_S(o, epsilon)
    P = None
    if epsilon < SMALL_EPSILON:
        seed = _asymptotic_seed(o, epsilon, reduced)
        if spectral_abscissa(A - S @ seed).is_hurwitz:
            try:
                P = solve_are(A, S, D, P0=seed)
            except NoStabilizingSolution:
                P = None
    if P is None:
        P = solve_are(A, S, D)
    Acl = A - S @ P
    h = feedforward_modes(Acl, P, o.disturbance)
    s = cost_offset(h, o.disturbance, S)
    z0 = o.z0
    Jstar = float(z0 @ P @ z0 + 2.0 * h(0.0) @ z0 + s(0.0)[0])
    return CheapSolution(epsilon=float(epsilon), P=P, S=S, Acl=Acl, h=h, s=s,
                         Jstar=Jstar, n1=o.n1)


def cheap_feedback(sol, o):
    """Optimal PCCP law ``u = -(G+E)^{-1} B' (P z + h(t))``."""
    W = control_weight_matrix(o, sol.epsilon)
    return AffineFeedback(-W @ sol.P, sol.h.map(-W))
