"""Dense real linear algebra used throughout the package.

SPD square roots, spectral abscissa, stabilizing solutions of continuous
algebraic Riccati equations, shifted linear solves, orthonormal complement
bases and matrix exponentials.  All functions are pure.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .exceptions import (
    EigenFailure,
    NoStabilizingSolution,
    NotPositiveDefinite,
    NotSymmetric,
    Overflow,
    RankDeficient,
    SingularShift,
)

__all__ = [
    "SpectralReport",
    "spd_sqrt",
    "spectral_abscissa",
    "solve_are",
    "are_residual",
    "newton_kleinman",
    "solve_shifted_linear",
    "complement_basis",
    "numerical_rank",
    "expm",
]

SYM_TOL = 1e-10
RANK_RTOL = 1e-10
ARE_RESIDUAL_TOL = 1e-10
SHIFT_COND_MAX = 1e14


def _as_matrix(M, name="M"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def _check_square(M, name="M"):
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")


def _check_symmetric(M, name="M", tol=SYM_TOL):
    scale = max(1.0, np.linalg.norm(M, "fro"))
    asym = np.linalg.norm(M - M.T, "fro")
    if asym > tol * scale:
        raise NotSymmetric(f"{name} is not symmetric (asymmetry {asym:.3e})")


@dataclass(frozen=True)
class SpectralReport:
    """Largest real part of the spectrum of a square matrix."""

    abscissa: float
    margin_tolerance: float = 1e-12

    @property
    def is_hurwitz(self):
        return self.abscissa < -self.margin_tolerance

    @property
    def decay_margin(self):
        """Positive decay rate ``-abscissa`` (negative when unstable)."""
        return -self.abscissa


def spd_sqrt(M, sym_tol=SYM_TOL, allow_psd=False):
    """Unique symmetric positive definite square root of ``M``.

    Eigenvalues in ``[-1e-12*||M||, 0]`` are clamped to zero.  With
    ``allow_psd`` the resulting PSD root is returned; otherwise a singular
    input raises.

    Parameters
    ----------
    M : (m, m) array_like
        Symmetric positive definite matrix.

    Returns
    -------
    R : (m, m) ndarray
        Symmetric with ``R @ R == M``.
    """
    M = _as_matrix(M)
    _check_square(M)
    _check_symmetric(M, "M", sym_tol)
    if M.size == 0:
        return M.copy()
    Ms = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(Ms)
    scale = max(np.abs(w).max(), np.finfo(float).tiny)
    if w.min() < -1e-12 * scale:
        raise NotPositiveDefinite(f"minimum eigenvalue {w.min():.3e} < 0")
    w = np.clip(w, 0.0, None)
    if w.min() <= 0.0 and not allow_psd:
        raise NotPositiveDefinite("matrix is singular; no positive definite root")
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


def spectral_abscissa(M, margin_tolerance=1e-12):
    """Return the maximum real part of the eigenvalues of ``M``."""
    M = _as_matrix(M)
    _check_square(M)
    if M.size == 0:
        return SpectralReport(-np.inf, margin_tolerance)
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    return SpectralReport(float(np.max(ev.real)), margin_tolerance)


def are_residual(P, A, S, D):
    """Relative residual ``||PA + A'P - PSP + D||_F / max(1, ||D||_F)``."""
    R = P @ A + A.T @ P - P @ S @ P + D
    return np.linalg.norm(R, "fro") / max(1.0, np.linalg.norm(D, "fro"))


def _hamiltonian_solution(A, S, D):
    n = A.shape[0]
    H = np.block([[A, -S], [-D, -A.T]])
    try:
        T, Z, sdim = sla.schur(H, output="real", sort="lhp")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    if sdim != n:
        raise NoStabilizingSolution(
            f"stable invariant subspace has dimension {sdim}, expected {n}")
    X1, X2 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(X1) > 1e14:
        raise NoStabilizingSolution("stable subspace is not a graph (X1 singular)")
    P = np.linalg.solve(X1.T, X2.T).T
    return 0.5 * (P + P.T)


def newton_kleinman(A, S, D, P0, max_iter=50, tol=1e-14):
    """Newton-Kleinman iteration for ``PA + A'P - PSP + D = 0``.

    ``P0`` must be stabilizing (``A - S P0`` Hurwitz).  Each step solves the
    Lyapunov equation ``Ak' X + X Ak + D + Pk S Pk = 0`` with
    ``Ak = A - S Pk``.  Iteration stops when the relative update drops
    below ``tol`` or the residual stops improving.
    """
    P = np.array(P0, dtype=float)
    best, best_res = P, are_residual(P, A, S, D)
    stalls = 0
    for _ in range(max_iter):
        Ak = A - S @ P
        if not spectral_abscissa(Ak).is_hurwitz:
            raise NoStabilizingSolution("Newton-Kleinman iterate is not stabilizing")
        Pn = sla.solve_continuous_lyapunov(Ak.T, -(D + P @ S @ P))
        Pn = 0.5 * (Pn + Pn.T)
        step = np.linalg.norm(Pn - P, "fro") / max(1.0, np.linalg.norm(Pn, "fro"))
        P = Pn
        res = are_residual(P, A, S, D)
        if res < best_res:
            best, best_res, stalls = P, res, 0
        else:
            stalls += 1
        if step < tol or stalls >= 2:
            break
    return best


def solve_are(A, S, D, P0=None, check=True):
    """Stabilizing solution of ``PA + A'P - PSP + D = 0``.

    The primary route is the ordered real Schur form of the Hamiltonian
    ``[[A, -S], [-D, -A']]``; the result is then polished by Newton-Kleinman
    steps.  When a stabilizing seed ``P0`` is supplied the Hamiltonian stage
    is skipped and the iteration starts from ``P0`` (useful when ``S`` is
    badly scaled).

    Parameters
    ----------
    A : (n, n) array_like
    S, D : (n, n) array_like
        Symmetric positive semi-definite.
    P0 : (n, n) array_like, optional
        Stabilizing initial guess.
    check : bool
        Enforce the residual and closed-loop stability postconditions.

    Returns
    -------
    P : (n, n) ndarray
        Symmetric PSD stabilizing solution.

    Raises
    ------
    NoStabilizingSolution
        The stable invariant subspace is deficient, Newton diverged or the
        postconditions fail.
    """
    A = _as_matrix(A, "A")
    S = _as_matrix(S, "S")
    D = _as_matrix(D, "D")
    _check_square(A, "A")
    n = A.shape[0]
    if S.shape != (n, n) or D.shape != (n, n):
        raise ValueError("A, S, D must share the same square shape")
    _check_symmetric(S, "S")
    _check_symmetric(D, "D")
    if n == 0:
        return np.zeros((0, 0))
    S = 0.5 * (S + S.T)
    D = 0.5 * (D + D.T)

    if P0 is None:
        P = _hamiltonian_solution(A, S, D)
    else:
        P = np.array(P0, dtype=float)
    if spectral_abscissa(A - S @ P).is_hurwitz:
        try:
            P = newton_kleinman(A, S, D, P)
        except NoStabilizingSolution:
            if P0 is not None:
                raise
    elif P0 is not None:
        raise NoStabilizingSolution("initial guess is not stabilizing")

    if check:
        res = are_residual(P, A, S, D)
        if not np.isfinite(res) or res >= ARE_RESIDUAL_TOL:
            raise NoStabilizingSolution(f"Riccati residual {res:.3e} too large")
        if not spectral_abscissa(A - S @ P).is_hurwitz:
            raise NoStabilizingSolution("closed-loop matrix is not Hurwitz")
    return P


def solve_shifted_linear(M, gamma, c):
    """Solve ``(gamma*I - M) v = c``.

    ``c`` may be a vector or a matrix of right-hand sides (columns).
    Raises :class:`SingularShift` when the shifted matrix has condition
    number above 1e14, i.e. ``gamma`` sits on the spectrum of ``M``.
    """
    M = _as_matrix(M)
    _check_square(M)
    c = np.asarray(c, dtype=float)
    n = M.shape[0]
    if n == 0:
        return c.copy()
    K = gamma * np.eye(n) - M
    if np.linalg.cond(K) > SHIFT_COND_MAX:
        raise SingularShift(f"shift gamma={gamma!r} collides with the spectrum")
    return np.linalg.solve(K, c)


def numerical_rank(B, rtol=RANK_RTOL):
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.size == 0:
        return 0
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def _fix_signs(Q, tol=1e-12):
    Q = Q.copy()
    for j in range(Q.shape[1]):
        col = Q[:, j]
        idx = np.flatnonzero(np.abs(col) > tol)
        if idx.size and col[idx[0]] < 0:
            Q[:, j] = -col
    return Q


def complement_basis(B):
    """Orthonormal basis of the orthogonal complement of ``col(B)``.

    Each returned column has its first nonzero entry positive, so the output
    is deterministic.  ``(Bc, B)`` is nonsingular whenever ``B`` has full
    column rank.
    """
    B = _as_matrix(B, "B")
    n, r = B.shape
    rank = numerical_rank(B)
    if rank != r:
        raise RankDeficient(f"B has rank {rank}, expected {r}")
    U = np.linalg.svd(B, full_matrices=True)[0]
    return _fix_signs(U[:, r:])


def expm(M, t=1.0):
    """Matrix exponential ``exp(M t)`` (Pade scaling and squaring)."""
    M = _as_matrix(M)
    _check_square(M)
    with np.errstate(over="ignore", invalid="ignore"):
        E = sla.expm(M * t)
    if not np.all(np.isfinite(E)):
        raise Overflow(f"exp(M t) overflowed for t={t!r}")
    return E
