"""Coordinate change that block-diagonalizes the state weight.

With ``Bcal = (B1, B2)`` split into regular and singular columns and ``Bc``
an orthonormal complement of ``Bcal``, put ``Btc = (Bc, B1)`` and

    Hcal = (B2' Dcal B2)^{-1} B2' Dcal Btc,     Lcal = Btc - B2 Hcal.

The substitution ``Z = (Lcal, B2) z`` turns the raw problem into an
:class:`~singlq.problem_model.Oocp`.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import SingularTransform, StructureViolation
from .linalg_core import complement_basis
from .problem_model import ExpSignal, Oocp
from .feedback import AffineFeedback

__all__ = ["TransformData", "build_transform", "transform_problem", "lift_control"]

TRANSFORM_COND_MAX = 1e12
D_OFFBLOCK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransformData:
    Bc: np.ndarray
    Hcal: np.ndarray
    Lcal: np.ndarray
    T: np.ndarray
    Tinv: np.ndarray


def build_transform(p):
    """Assemble ``Bc``, ``Hcal``, ``Lcal`` and ``T = (Lcal, B2)`` for a raw problem."""
    Bc = complement_basis(p.Bcal)
    Btc = np.hstack([Bc, p.B1])
    B2 = p.B2
    D2 = B2.T @ p.Dcal @ B2
    Hcal = np.linalg.solve(D2, B2.T @ p.Dcal @ Btc)
    Lcal = Btc - B2 @ Hcal
    T = np.hstack([Lcal, B2])
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > TRANSFORM_COND_MAX:
        raise SingularTransform(f"transformation matrix has condition number {cond:.3e}")
    Tinv = np.linalg.inv(T)
    return TransformData(Bc=Bc, Hcal=Hcal, Lcal=Lcal, T=T, Tinv=Tinv)


def transform_problem(p, td=None):
    """Return the transformed problem.

    The control matrix and state weight are checked against the expected
    block structure; round-off in the zero blocks is then removed.
    """
    if td is None:
        td = build_transform(p)
    n, r, q = p.n, p.r, p.q
    n1, n2 = n - r + q, r - q
    T, Tinv = td.T, td.Tinv

    A = Tinv @ p.Acal @ T
    B = Tinv @ p.Bcal
    B_expected = np.zeros((n, r))
    B_expected[n - r:n1, :q] = np.eye(q)
    B_expected[n1:, :q] = td.Hcal[:, n - r:]
    B_expected[n1:, q:] = np.eye(n2)
    dev = np.max(np.abs(B - B_expected))
    if dev > 1e-8 * max(1.0, np.abs(B_expected).max()):
        raise StructureViolation(f"transformed B deviates from block structure by {dev:.3e}")

    D = T.T @ p.Dcal @ T
    D = 0.5 * (D + D.T)
    off = np.linalg.norm(D[:n1, n1:])
    if off > D_OFFBLOCK_TOL * max(1.0, np.linalg.norm(D)):
        raise StructureViolation(f"transformed D has off-diagonal block of norm {off:.3e}")

    f = p.disturbance.map(Tinv)
    z0 = Tinv @ p.Z0
    o = Oocp(A=A, B=B_expected, D1=D[:n1, :n1], D2=D[n1:, n1:], g=p.g,
             disturbance=f, z0=z0, q=q, Hcal=td.Hcal)
    return o


def lift_control(law, td):
    """Express a law ``u(z, t)`` in raw coordinates: ``U(Z, t) = u(Tinv Z, t)``."""
    if isinstance(law, AffineFeedback):
        return AffineFeedback(law.gain @ td.Tinv, law.feedforward)
    Tinv = td.Tinv

    def lifted(Z, t):
        return law(Tinv @ Z, t)

    return lifted
