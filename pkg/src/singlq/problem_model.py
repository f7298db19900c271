"""Problem data: exponential signals, raw and transformed problems, assumptions.

A raw problem is

    dZ/dt = Acal Z + Bcal U + F(t),   Z(0) = Z0,
    J(U)  = int_0^inf  Z' Dcal Z + U' G U  dt,   G = diag(g_1..g_q, 0..0),

with the disturbance ``F`` a finite sum of decaying exponentials.  The
transformed problem (:class:`Oocp`) has the same form in coordinates where
the state weight is block diagonal and the control matrix has the
canonical block structure produced by :mod:`singlq.state_transform`.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, NotPSD, NotSymmetric, StructureViolation
from .linalg_core import numerical_rank, spectral_abscissa

__all__ = [
    "ExpSignal",
    "RawProblem",
    "Oocp",
    "AssumptionCheck",
    "AssumptionReport",
    "validate_raw",
    "validate_reduced",
    "validate_oocp",
    "factor_d1",
    "hautus_margin",
    "bilinear",
    "tail_antiderivative",
]

PSD_TOL = 1e-10
HAUTUS_TOL = 1e-8
A5_TOL = 1e-10


# --------------------------------------------------------------------------
# exponential signals
# --------------------------------------------------------------------------

class ExpSignal:
    """Vector signal ``f(t) = sum_j coef_j * exp(-rate_j * t)``.

    Rates are strictly positive.  Coefficients are stored as a
    ``(modes, dim)`` array; modes with equal rates are merged.
    """

    __slots__ = ("rates", "coefs")

    def __init__(self, rates, coefs, dim=None):
        rates = np.asarray(rates, dtype=float).reshape(-1)
        coefs = np.asarray(coefs, dtype=float)
        if coefs.size == 0 and dim is not None:
            coefs = coefs.reshape(len(rates), dim)
        if coefs.ndim == 1:
            coefs = coefs.reshape(len(rates), -1) if len(rates) else coefs.reshape(0, dim or 0)
        if coefs.shape[0] != rates.shape[0]:
            raise DimensionMismatch(
                f"{rates.shape[0]} rates but {coefs.shape[0]} coefficient rows")
        if dim is not None and coefs.shape[1] != dim:
            raise DimensionMismatch(f"coefficients have dimension {coefs.shape[1]}, expected {dim}")
        if np.any(~np.isfinite(rates)) or np.any(rates <= 0):
            raise ValueError("every rate must be finite and > 0")
        if not np.all(np.isfinite(coefs)):
            raise ValueError("coefficients must be finite")
        order = np.argsort(rates, kind="stable")
        rates, coefs = rates[order], coefs[order]
        # merge equal rates
        keep_r, keep_c = [], []
        for rate, c in zip(rates, coefs):
            if keep_r and abs(rate - keep_r[-1]) <= 1e-14 * rate:
                keep_c[-1] = keep_c[-1] + c
            else:
                keep_r.append(rate)
                keep_c.append(c.copy())
        self.rates = np.array(keep_r, dtype=float)
        self.coefs = (np.array(keep_c, dtype=float) if keep_c
                      else np.zeros((0, coefs.shape[1])))
        self.rates.setflags(write=False)
        self.coefs.setflags(write=False)

    @classmethod
    def zero(cls, dim):
        return cls([], np.zeros((0, dim)), dim=dim)

    @classmethod
    def from_modes(cls, modes, dim):
        """Build from an iterable of ``(rate, coef)`` pairs."""
        modes = list(modes)
        if not modes:
            return cls.zero(dim)
        rates = [m[0] for m in modes]
        coefs = np.array([np.asarray(m[1], dtype=float).reshape(-1) for m in modes])
        return cls(rates, coefs, dim=dim)

    @property
    def dim(self):
        return self.coefs.shape[1]

    @property
    def modes(self):
        return [(float(r), c.copy()) for r, c in zip(self.rates, self.coefs)]

    @property
    def is_zero(self):
        return self.coefs.size == 0 or not np.any(self.coefs)

    @property
    def min_rate(self):
        """Slowest decay rate, ``inf`` for the zero signal."""
        nz = [r for r, c in zip(self.rates, self.coefs) if np.any(c)]
        return min(nz) if nz else np.inf

    def bound_constant(self):
        """``sum_j ||coef_j||`` so that ``||f(t)|| <= C exp(-min_rate t)``."""
        return float(np.sum(np.linalg.norm(self.coefs, axis=1))) if self.coefs.size else 0.0

    def __call__(self, t):
        """Evaluate at scalar ``t`` (shape ``(dim,)``) or array ``t`` (``(len(t), dim)``)."""
        t_arr = np.asarray(t, dtype=float)
        e = np.exp(-np.multiply.outer(t_arr, self.rates))
        return e @ self.coefs

    def derivative(self):
        return ExpSignal(self.rates, -self.rates[:, None] * self.coefs, dim=self.dim)

    def map(self, M):
        """Signal ``M @ f(t)``."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[1] != self.dim:
            raise DimensionMismatch(f"cannot apply {M.shape} matrix to a {self.dim}-signal")
        return ExpSignal(self.rates, self.coefs @ M.T, dim=M.shape[0])

    def block(self, start, stop):
        return ExpSignal(self.rates, self.coefs[:, start:stop], dim=stop - start)

    def scale(self, a):
        return ExpSignal(self.rates, a * self.coefs, dim=self.dim)

    def __add__(self, other):
        if not isinstance(other, ExpSignal):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionMismatch("signal dimensions differ")
        return ExpSignal(np.concatenate([self.rates, other.rates]),
                         np.vstack([self.coefs, other.coefs]), dim=self.dim)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    @staticmethod
    def concat(*signals):
        """Stack signals vertically into one signal of summed dimension."""
        dims = [s.dim for s in signals]
        total = sum(dims)
        parts = []
        offset = 0
        for s, d in zip(signals, dims):
            c = np.zeros((len(s.rates), total))
            c[:, offset:offset + d] = s.coefs
            parts.append(ExpSignal(s.rates, c, dim=total))
            offset += d
        out = ExpSignal.zero(total)
        for p in parts:
            out = out + p
        return out

    def equals(self, other, tol=0.0):
        return (self.dim == other.dim and self.rates.shape == other.rates.shape
                and np.allclose(self.rates, other.rates, rtol=tol, atol=0)
                and np.allclose(self.coefs, other.coefs, rtol=tol, atol=tol))

    def to_json(self):
        return [{"rate": float(r), "coef": [float(x) for x in c]}
                for r, c in zip(self.rates, self.coefs)]

    def __repr__(self):
        return f"ExpSignal(dim={self.dim}, rates={self.rates.tolist()})"


def bilinear(u, M, v):
    """Scalar signal ``u(t)' M v(t)`` (rates add pairwise)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rates, coefs = [], []
    W = v.coefs @ M.T  # rows: M v_j
    for i, ri in enumerate(u.rates):
        for j, rj in enumerate(v.rates):
            rates.append(ri + rj)
            coefs.append([float(u.coefs[i] @ W[j])])
    if not rates:
        return ExpSignal.zero(1)
    return ExpSignal(rates, np.array(coefs), dim=1)


def tail_antiderivative(g):
    """Signal ``s`` with ``ds/dt = g`` and ``s(+inf) = 0``."""
    return ExpSignal(g.rates, -g.coefs / g.rates[:, None], dim=g.dim)


# --------------------------------------------------------------------------
# problems
# --------------------------------------------------------------------------

def _mat(x, name, shape=None):
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if shape is not None and a.shape != shape:
        raise DimensionMismatch(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _vec(x, name, n):
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.shape != (n,):
        raise DimensionMismatch(f"{name} has length {a.size}, expected {n}")
    return a


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class RawProblem:
    """Untransformed singular LQ problem.

    ``q`` is the number of regular (positively weighted) control
    coordinates; the remaining ``r - q`` are singular.
    """

    Acal: np.ndarray
    Bcal: np.ndarray
    Dcal: np.ndarray
    g: np.ndarray
    disturbance: ExpSignal
    Z0: np.ndarray
    q: int

    def __post_init__(self):
        Bcal = _mat(self.Bcal, "Bcal")
        n, r = Bcal.shape
        q = int(self.q)
        if not 0 <= q < r <= n:
            raise DimensionMismatch(f"need 0 <= q < r <= n, got q={q}, r={r}, n={n}")
        Acal = _mat(self.Acal, "Acal", (n, n))
        Dcal = _mat(self.Dcal, "Dcal", (n, n))
        if np.max(np.abs(Dcal - Dcal.T), initial=0.0) > 1e-12 * max(1.0, np.abs(Dcal).max()):
            raise NotSymmetric("Dcal is not symmetric")
        Dcal = 0.5 * (Dcal + Dcal.T)
        g = np.asarray(self.g, dtype=float).reshape(-1)
        if g.shape != (q,):
            raise DimensionMismatch(f"g has length {g.size}, expected q={q}")
        if not isinstance(self.disturbance, ExpSignal) or self.disturbance.dim != n:
            raise DimensionMismatch("disturbance must be an ExpSignal of dimension n")
        Z0 = _vec(self.Z0, "Z0", n)
        _freeze(Acal, Bcal, Dcal, g, Z0)
        for k, v in dict(Acal=Acal, Bcal=Bcal, Dcal=Dcal, g=g, Z0=Z0, q=q).items():
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.Bcal.shape[0]

    @property
    def r(self):
        return self.Bcal.shape[1]

    @property
    def G(self):
        return np.diag(np.concatenate([self.g, np.zeros(self.r - self.q)]))

    @property
    def B1(self):
        return self.Bcal[:, :self.q]

    @property
    def B2(self):
        return self.Bcal[:, self.q:]

    # uniform names used by the simulator
    @property
    def A(self):
        return self.Acal

    @property
    def B(self):
        return self.Bcal

    @property
    def D(self):
        return self.Dcal

    @property
    def z0(self):
        return self.Z0


@dataclass(frozen=True, eq=False)
class Oocp:
    """Transformed problem with block structure.

    State ``z = (x, y)`` with ``x`` of size ``n1 = n - r + q`` and ``y`` of
    size ``n2 = r - q``.  The state weight is ``diag(D1, D2)``; ``B`` has
    upper block ``(0; [I_q, 0])`` and lower block ``H B1 + [0, I]``.

    ``Hcal`` (the coupling matrix of the transform) is optional; only its
    last ``q`` columns influence the problem and those are recoverable
    from ``B``.
    """

    A: np.ndarray
    B: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    g: np.ndarray
    disturbance: ExpSignal
    z0: np.ndarray
    q: int
    Hcal: np.ndarray = field(default=None)

    def __post_init__(self):
        B = _mat(self.B, "B")
        n, r = B.shape
        q = int(self.q)
        if not 0 <= q < r <= n:
            raise DimensionMismatch(f"need 0 <= q < r <= n, got q={q}, r={r}, n={n}")
        n1, n2 = n - r + q, r - q
        A = _mat(self.A, "A", (n, n))
        D1 = _mat(self.D1, "D1", (n1, n1)) if n1 else np.zeros((0, 0))
        D2 = _mat(self.D2, "D2", (n2, n2))
        for name, M in (("D1", D1), ("D2", D2)):
            if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(1.0, np.abs(M).max(initial=0.0)):
                raise NotSymmetric(f"{name} is not symmetric")
        D1 = 0.5 * (D1 + D1.T)
        D2 = 0.5 * (D2 + D2.T)
        g = np.asarray(self.g, dtype=float).reshape(-1)
        if g.shape != (q,):
            raise DimensionMismatch(f"g has length {g.size}, expected q={q}")
        if not isinstance(self.disturbance, ExpSignal) or self.disturbance.dim != n:
            raise DimensionMismatch("disturbance must be an ExpSignal of dimension n")
        z0 = _vec(self.z0, "z0", n)

        # enforce the canonical control structure
        B1_expected = np.zeros((n1, r))
        B1_expected[n - r:, :q] = np.eye(q)
        B1 = B[:n1]
        if np.max(np.abs(B1 - B1_expected), initial=0.0) > 1e-9:
            raise StructureViolation("upper block of B is not (0; [I_q, 0])")
        B2 = B[n1:]
        if np.max(np.abs(B2[:, q:] - np.eye(n2)), initial=0.0) > 1e-9:
            raise StructureViolation("lower block of B does not end with I_{r-q}")
        B = B.copy()
        B[:n1] = B1_expected
        B[n1:, q:] = np.eye(n2)

        Hcal = self.Hcal
        if Hcal is not None:
            Hcal = _mat(Hcal, "Hcal", (n2, n1))
            if np.max(np.abs(Hcal[:, n - r:] - B2[:, :q]), initial=0.0) > 1e-9 * max(1.0, np.abs(Hcal).max(initial=0.0)):
                raise StructureViolation("Hcal inconsistent with the lower block of B")
            _freeze(Hcal)
        _freeze(A, B, D1, D2, g, z0)
        for k, v in dict(A=A, B=B, D1=D1, D2=D2, g=g, z0=z0, q=q, Hcal=Hcal).items():
            object.__setattr__(self, k, v)

    # dimensions
    @property
    def n(self):
        return self.A.shape[0]

    @property
    def r(self):
        return self.B.shape[1]

    @property
    def n1(self):
        return self.n - self.r + self.q

    @property
    def n2(self):
        return self.r - self.q

    # blocks
    @property
    def A1(self):
        return self.A[:self.n1, :self.n1]

    @property
    def A2(self):
        return self.A[:self.n1, self.n1:]

    @property
    def A3(self):
        return self.A[self.n1:, :self.n1]

    @property
    def A4(self):
        return self.A[self.n1:, self.n1:]

    @property
    def B1(self):
        return self.B[:self.n1]

    @property
    def B2(self):
        return self.B[self.n1:]

    @property
    def D(self):
        n1, n2 = self.n1, self.n2
        D = np.zeros((self.n, self.n))
        D[:n1, :n1] = self.D1
        D[n1:, n1:] = self.D2
        return D

    @property
    def G(self):
        return np.diag(np.concatenate([self.g, np.zeros(self.n2)]))

    @property
    def Gtilde(self):
        return np.diag(self.g)

    @property
    def f1(self):
        return self.disturbance.block(0, self.n1)

    @property
    def f2(self):
        return self.disturbance.block(self.n1, self.n)

    @property
    def x0(self):
        return self.z0[:self.n1]

    @property
    def y0(self):
        return self.z0[self.n1:]

    # matrices of the cheap-control block calculus
    @property
    def H3(self):
        """``(0_{q x (n-r)}, Gtilde^{-1})``."""
        H3 = np.zeros((self.q, self.n1))
        H3[:, self.n - self.r:] = np.diag(1.0 / self.g)
        return H3

    @property
    def Hq(self):
        """Last ``q`` columns of the coupling matrix (read off ``B``)."""
        return self.B2[:, :self.q]

    @property
    def H1(self):
        """``H3 Hcal'`` (q x (r-q))."""
        return np.diag(1.0 / self.g) @ self.Hq.T

    @property
    def H2(self):
        """``Hcal (0; H1)`` ((r-q) x (r-q))."""
        return self.Hq @ self.H1

    @property
    def S1(self):
        S1 = np.zeros((self.n1, self.n1))
        k = self.n - self.r
        S1[k:, k:] = np.diag(1.0 / self.g)
        return S1

    @property
    def S2(self):
        S2 = np.zeros((self.n1, self.n2))
        S2[self.n - self.r:, :] = self.H1
        return S2

    def S3(self, epsilon):
        return epsilon ** 2 * self.H2 + np.eye(self.n2)

    @property
    def Btilde(self):
        Bt = np.zeros((self.n1, self.q))
        Bt[self.n - self.r:, :] = np.eye(self.q)
        return Bt

    @property
    def Bbar(self):
        return np.hstack([self.Btilde, self.A2])

    @property
    def Theta(self):
        Th = np.zeros((self.r, self.r))
        Th[:self.q, :self.q] = self.Gtilde
        Th[self.q:, self.q:] = self.D2
        return Th


# --------------------------------------------------------------------------
# assumptions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    witness: float
    message: str

    def to_json(self):
        w = self.witness
        return {"name": self.name, "passed": bool(self.passed),
                "witness": None if w is None or not np.isfinite(w) else float(w),
                "message": self.message}


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple

    @property
    def all_pass(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name):
        return any(c.name == name for c in self.checks)

    def merge(self, other):
        return AssumptionReport(self.checks + other.checks)

    def to_json(self):
        return {"all_pass": self.all_pass, "checks": [c.to_json() for c in self.checks]}

    def render(self):
        lines = []
        for c in self.checks:
            flag = "PASS" if c.passed else "FAIL"
            w = "n/a" if c.witness is None else f"{c.witness:.6g}"
            lines.append(f"{c.name:4s} {flag}  witness={w}  {c.message}")
        lines.append("all assumptions pass" if self.all_pass else "assumption check FAILED")
        return "\n".join(lines)


def _min_eig(M):
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


def validate_raw(p):
    """Check (A1)-(A5) on a :class:`RawProblem`."""
    checks = []
    rank = numerical_rank(p.Bcal)
    checks.append(AssumptionCheck(
        "A1", rank == p.r, float(rank), f"rank(Bcal) = {rank}, r = {p.r}"))

    lam = _min_eig(p.Dcal)
    scale = max(np.linalg.norm(p.Dcal, 2), 1e-300)
    checks.append(AssumptionCheck(
        "A2", lam >= -PSD_TOL * scale, lam, f"min eigenvalue of Dcal = {lam:.6g}"))

    gmin = float(p.g.min()) if p.q else np.inf
    checks.append(AssumptionCheck(
        "A3", bool(p.q == 0 or gmin > 0), gmin,
        "vacuous (q = 0)" if p.q == 0 else f"min g = {gmin:.6g}"))

    rate = p.disturbance.min_rate
    checks.append(AssumptionCheck(
        "A4", bool(np.all(p.disturbance.rates > 0)), float(rate),
        f"disturbance decays with rate {rate:.6g}"))

    M = p.B2.T @ p.Dcal @ p.B2
    ev = np.linalg.eigvals(M)
    w = float(np.min(np.abs(ev))) if ev.size else np.inf
    checks.append(AssumptionCheck(
        "A5", w > A5_TOL, w, f"min |eig(B2' Dcal B2)| = {w:.6g}"))
    return AssumptionReport(tuple(checks))


def factor_d1(D1, tol=PSD_TOL):
    """Thin factor ``F1`` with ``F1' F1 = D1`` and ``rank(D1)`` rows."""
    D1 = np.atleast_2d(np.asarray(D1, dtype=float))
    m = D1.shape[0]
    if D1.size == 0:
        return np.zeros((0, m))
    if np.max(np.abs(D1 - D1.T)) > 1e-10 * max(1.0, np.abs(D1).max()):
        raise NotSymmetric("D1 is not symmetric")
    w, V = np.linalg.eigh(0.5 * (D1 + D1.T))
    scale = max(np.abs(w).max(), 0.0)
    if scale == 0.0:
        return np.zeros((0, m))
    if w.min() < -tol * scale:
        raise NotPSD(f"D1 has eigenvalue {w.min():.3e} < 0")
    keep = w > tol * scale
    return np.sqrt(w[keep])[:, None] * V[:, keep].T


def hautus_margin(A, B, unstable_tol=0.0):
    """Smallest ``sigma_min([A - lam I, B])`` over eigenvalues with ``Re lam >= 0``.

    Returns ``inf`` when ``A`` has no such eigenvalue.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float)
    B = B.reshape(n, B.size // n if n else 0)
    if n == 0:
        return np.inf
    worst = np.inf
    for lam in np.linalg.eigvals(A):
        if lam.real < -unstable_tol:
            continue
        M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        worst = min(worst, float(np.linalg.svd(M, compute_uv=False)[-1]))
    return worst


def validate_reduced(o):
    """Check (A6) stabilizability of ``(A1, Bbar)`` and (A7) detectability of ``(A1, F1)``."""
    F1 = factor_d1(o.D1)
    m6 = hautus_margin(o.A1, o.Bbar)
    m7 = hautus_margin(o.A1.T, F1.T)
    checks = (
        AssumptionCheck("A6", m6 > HAUTUS_TOL, m6,
                        f"Hautus margin of (A1, Bbar) = {m6:.6g}"),
        AssumptionCheck("A7", m7 > HAUTUS_TOL, m7,
                        f"Hautus margin of (A1', F1') = {m7:.6g}"),
    )
    return AssumptionReport(checks)


def validate_oocp(o):
    """(A2), (A3), (A5) restated for an already transformed problem, plus (A6)-(A7)."""
    checks = []
    lam1 = _min_eig(o.D1)
    s1 = max(np.linalg.norm(o.D1, 2) if o.D1.size else 0.0, 1e-300)
    checks.append(AssumptionCheck("A2", lam1 >= -PSD_TOL * s1, lam1,
                                  f"min eigenvalue of D1 = {lam1:.6g}"))
    gmin = float(o.g.min()) if o.q else np.inf
    checks.append(AssumptionCheck("A3", bool(o.q == 0 or gmin > 0), gmin,
                                  "vacuous (q = 0)" if o.q == 0 else f"min g = {gmin:.6g}"))
    rate = o.disturbance.min_rate
    checks.append(AssumptionCheck("A4", True, float(rate),
                                  f"disturbance decays with rate {rate:.6g}"))
    lam2 = _min_eig(o.D2)
    checks.append(AssumptionCheck("A5", lam2 > A5_TOL, lam2,
                                  f"min eigenvalue of D2 = {lam2:.6g}"))
    return AssumptionReport(tuple(checks)).merge(validate_reduced(o))
