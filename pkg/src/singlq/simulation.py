"""Closed-loop simulation, infinite-horizon costs and asymptotic references.

``simulate`` integrates ``dz/dt = A z + B u(z, t) + f(t)`` together with
the running cost ``z'Dz + u'Gu`` using an adaptive embedded Runge-Kutta
pair; the truncated tail of the cost integral is estimated from an
exponential fit of the integrand on the last tenth of the horizon.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import nnls

from .exceptions import Divergence, StepUnderflow, TailNotDecaying
from .feedback import AffineFeedback
from .linalg_core import expm, solve_shifted_linear, spectral_abscissa
from .problem_model import ExpSignal

__all__ = [
    "Trajectory",
    "simulate",
    "evaluate_cost",
    "cost_tolerance",
    "AsymptoticTrajectory",
    "asymptotic_reference",
    "reduced_cost_integral",
    "singular_perturbation_generator",
    "DecayProbeReport",
    "transition_decay_probe",
    "write_trajectory_csv",
]

DIVERGENCE_NORM = 1e12
MIN_STEP = 1e-14
TAIL_FRACTION = 0.1
TAIL_RELATIVE_TARGET = 1e-3


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    running_cost: np.ndarray
    tail_bound: float
    tol: float
    dense: object = None

    @property
    def horizon(self):
        return float(self.times[-1])

    def state_at(self, t):
        """Dense-output state at ``t`` (scalar or array), shape ``(..., n)``."""
        t = np.asarray(t, dtype=float)
        return self.dense(t)[:-1].T if t.ndim else self.dense(t)[:-1]


def _system(problem, control_weight=None):
    A = np.asarray(problem.A, dtype=float)
    B = np.asarray(problem.B, dtype=float)
    D = np.asarray(problem.D, dtype=float)
    G = np.asarray(problem.G if control_weight is None else control_weight, dtype=float)
    return A, B, D, G, problem.disturbance, np.asarray(problem.z0, dtype=float)


def _default_rate(A, B, law, f):
    rate = f.min_rate
    if isinstance(law, AffineFeedback):
        rate = min(rate, spectral_abscissa(law.closed_loop(A, B)).decay_margin)
        if law.feedforward.dim and not law.feedforward.is_zero:
            rate = min(rate, law.feedforward.min_rate)
    if not np.isfinite(rate):
        rate = 1.0
    if rate <= 0:
        raise Divergence("closed loop is not asymptotically stable")
    return rate


def _tail(times_fit, integrand, horizon):
    pos = integrand > 0
    if not np.any(pos):
        return 0.0
    if np.count_nonzero(pos) < 3:
        return 0.0 if integrand[-1] <= 0 else np.inf
    slope, _ = np.polyfit(times_fit[pos], np.log(integrand[pos]), 1)
    rate = -slope
    if rate <= 0:
        return np.inf
    return float(integrand[-1] / rate)


def _integrate(A, B, D, G, f, z0, law, horizon, tol, first_step):
    n = A.shape[0]
    affine = isinstance(law, AffineFeedback)
    if affine:
        Acl = law.closed_loop(A, B)
        K = law.gain
        ff = law.feedforward

        def rhs(t, w):
            z = w[:n]
            u = K @ z + ff(t)
            dz = Acl @ z + B @ ff(t) + f(t)
            return np.append(dz, z @ D @ z + u @ G @ u)
    else:
        def rhs(t, w):
            z = w[:n]
            u = np.asarray(law(z, t), dtype=float)
            return np.append(A @ z + B @ u + f(t), z @ D @ z + u @ G @ u)

    def blowup(t, w):
        return DIVERGENCE_NORM - np.linalg.norm(w[:n])

    blowup.terminal = True
    w0 = np.append(z0, 0.0)
    scale = max(1.0, float(np.linalg.norm(z0)), f.bound_constant())
    sol = solve_ivp(rhs, (0.0, horizon), w0, method="DOP853", rtol=tol,
                    atol=tol * 1e-2 * scale, first_step=first_step,
                    dense_output=True, events=blowup)
    if sol.status == 1:
        raise Divergence(f"|z| exceeded {DIVERGENCE_NORM:g} at t={sol.t[-1]:.4g}")
    if sol.status != 0:
        raise StepUnderflow(sol.message)
    return sol


def simulate(problem, law, horizon=None, tol=1e-9, epsilon=None, control_weight=None,
             retry=True):
    """Integrate the closed loop of ``problem`` under ``law``.

    Parameters
    ----------
    problem : Oocp or RawProblem
        Anything exposing ``A, B, D, G, disturbance, z0``.
    law : callable ``(z, t) -> u``
        :class:`AffineFeedback` instances are integrated faster.
    horizon : float, optional
        Final time.  Defaults to ``10 / rate`` with ``rate`` the slowest of
        the closed-loop and disturbance decay rates; the horizon is doubled
        once if the tail estimate exceeds 1e-3 of the accumulated cost.
    tol : float
        Relative local error tolerance.
    epsilon : float, optional
        Boundary-layer scale of the law; caps the initial step at
        ``epsilon / 10``.
    control_weight : array_like, optional
        Replaces ``problem.G`` in the running cost (e.g. ``G + E(eps)`` to
        price a law in the regularized problem).

    Returns
    -------
    Trajectory
    """
    A, B, D, G, f, z0 = _system(problem, control_weight)
    auto = horizon is None
    if auto:
        horizon = 10.0 / _default_rate(A, B, law, f)
    first_step = None
    if epsilon is not None:
        first_step = epsilon / 10.0
    elif isinstance(law, AffineFeedback):
        rho = np.max(np.abs(np.linalg.eigvals(law.closed_loop(A, B))), initial=0.0)
        if rho > 0:
            first_step = min(0.1 / rho, horizon / 10.0)
    if first_step is not None and first_step < MIN_STEP:
        raise StepUnderflow(f"initial step {first_step:.3e} below {MIN_STEP:g}")

    sol = _integrate(A, B, D, G, f, z0, law, horizon, tol, first_step)
    traj = _build(sol, law, D, G, tol, horizon)
    if auto and retry and not (traj.tail_bound <= TAIL_RELATIVE_TARGET * max(traj.running_cost[-1], 1e-300)):
        sol = _integrate(A, B, D, G, f, z0, law, 2.0 * horizon, tol, first_step)
        traj = _build(sol, law, D, G, tol, 2.0 * horizon)
    return traj


def _build(sol, law, D, G, tol, horizon):
    n = D.shape[0]
    times = sol.t
    states = sol.y[:n].T
    controls = np.array([np.asarray(law(z, t), dtype=float) for t, z in zip(times, states)])
    running = np.maximum.accumulate(np.maximum(sol.y[n], 0.0))
    t_fit = np.linspace((1.0 - TAIL_FRACTION) * horizon, horizon, 25)
    zf = sol.sol(t_fit)[:n].T
    uf = np.array([np.asarray(law(z, t), dtype=float) for t, z in zip(t_fit, zf)])
    integrand = np.einsum("ij,jk,ik->i", zf, D, zf) + np.einsum("ij,jk,ik->i", uf, G, uf)
    tail = _tail(t_fit, integrand, horizon)
    for a in (times, states, controls, running):
        a.setflags(write=False)
    return Trajectory(times=times, states=states, controls=controls,
                      running_cost=running, tail_bound=tail, tol=tol, dense=sol.sol)


def evaluate_cost(traj, problem=None):
    """Infinite-horizon cost: accumulated cost plus the tail estimate.

    ``traj.tail_bound`` is the uncertainty attached to the returned value.
    """
    if problem is not None and traj.states.shape[1] != np.asarray(problem.A).shape[0]:
        raise ValueError("trajectory does not belong to this problem")
    if not np.isfinite(traj.tail_bound):
        raise TailNotDecaying("cost integrand is not decaying at the horizon")
    return float(traj.running_cost[-1] + traj.tail_bound)


def cost_tolerance(traj):
    """Integration error allowance for :func:`evaluate_cost` (tail excluded)."""
    return 10.0 * traj.tol * max(1.0, float(traj.running_cost[-1])) * max(1.0, traj.horizon)


def write_trajectory_csv(path, traj, n_digits=17):
    n = traj.states.shape[1]
    r = traj.controls.shape[1]
    header = ",".join(["t"] + [f"z_{i + 1}" for i in range(n)]
                      + [f"u_{i + 1}" for i in range(r)] + ["running_cost"])
    data = np.column_stack([traj.times, traj.states, traj.controls, traj.running_cost])
    fmt = f"%.{n_digits}g"
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)


# --------------------------------------------------------------------------
# asymptotic reference (outer solution + boundary layer)
# --------------------------------------------------------------------------

class AsymptoticTrajectory:
    """Zero-order outer solution ``(x_o, y_o)`` and layer term ``y_b(t/eps)``."""

    def __init__(self, Acl0, x0, x_particular, homogeneous0, Ky, ky, P30, yb0, epsilon):
        self.Acl0 = Acl0
        self.x0 = x0
        self.x_particular = x_particular
        self.homogeneous0 = homogeneous0
        self._Ky = Ky          # y_o = Ky x_o + ky(t)
        self._ky = ky
        self.P30 = P30
        self.yb0 = yb0
        self.epsilon = epsilon

    def x_outer(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return expm(self.Acl0, float(t)) @ self.homogeneous0 + self.x_particular(t)
        return np.array([self.x_outer(tt) for tt in t])

    def x_outer_derivative(self, t, forcing):
        return self.Acl0 @ self.x_outer(t) + forcing(t)

    def y_outer(self, t):
        x = self.x_outer(t)
        return x @ self._Ky.T + self._ky(t)

    def y_layer(self, tau):
        tau = np.asarray(tau, dtype=float)
        if tau.ndim == 0:
            return expm(-self.P30, float(tau)) @ self.yb0
        return np.array([self.y_layer(tt) for tt in tau])

    def y_asymptotic(self, t):
        t = np.asarray(t, dtype=float)
        return self.y_outer(t) + self.y_layer(t / self.epsilon)


def _outer_forcing(rs, o):
    return o.f1 - rs.h10.map(rs.S0)


def asymptotic_reference(rs, o, epsilon):
    """Outer solution and boundary-layer correction of the ``u_{eps,1}`` loop.

    ``x_o`` solves ``dx/dt = Acl0 x - S0 h10(t) + f1(t)``, ``x_o(0) = x0``
    in closed form; ``y_o = -D2^{-1} A2' (P10 x_o + h10)`` and
    ``y_b(tau) = exp(-D2^{1/2} tau) (y0 - y_o(0))``.
    """
    forcing = _outer_forcing(rs, o)
    vs = [solve_shifted_linear(-rs.Acl0, rate, -c) for rate, c in zip(forcing.rates, forcing.coefs)]
    xp = ExpSignal(forcing.rates, np.array(vs), dim=o.n1) if vs else ExpSignal.zero(o.n1)
    hom0 = o.x0 - xp(0.0)
    M = np.linalg.solve(o.D2, o.A2.T)
    Ky = -M @ rs.P10
    ky = rs.h10.map(-M)
    yo0 = Ky @ o.x0 + ky(0.0)
    return AsymptoticTrajectory(rs.Acl0, o.x0.copy(), xp, hom0, Ky, ky, rs.P30,
                                o.y0 - yo0, epsilon)


def reduced_cost_integral(rs, o, epsabs=1e-13, epsrel=1e-13):
    """Adaptive quadrature of the reduced cost along the outer trajectory.

    Integrand ``x_o'D1x_o + (P10 x_o + h10)' S0 (P10 x_o + h10)``; this is
    independent of the closed-form value ``rs.Jbar``.
    """
    ref = asymptotic_reference(rs, o, 1.0)

    def integrand(t):
        x = ref.x_outer(t)
        v = rs.P10 @ x + rs.h10(t)
        return float(x @ o.D1 @ x + v @ rs.S0 @ v)

    rate = max(min(rs.mu, 1.0), 1e-3)
    split = 40.0 / rate
    head, _ = quad(integrand, 0.0, split, epsabs=epsabs, epsrel=epsrel, limit=500)
    tail, _ = quad(integrand, split, np.inf, epsabs=epsabs, epsrel=epsrel, limit=200)
    return head + tail


# --------------------------------------------------------------------------
# transition matrix decay probe
# --------------------------------------------------------------------------

def singular_perturbation_generator(Acl, epsilon, n1):
    """``C = Sigma^{-1} Acl' Sigma`` with ``Sigma = diag(I, eps I)``.

    For the cheap-control closed loop this has the form
    ``[[C1, C2], [C3/eps, C4/eps]]`` with ``C1..C4`` bounded in ``eps``.
    """
    n = Acl.shape[0]
    sig = np.ones(n)
    sig[n1:] = epsilon
    return (Acl.T * sig[None, :]) / sig[:, None]


@dataclass(frozen=True)
class DecayProbeReport:
    kappa: float
    omega: float
    block_sup: tuple       # sup of ||Psi_i|| e^{kappa t}, i = 1..3 (Psi_2 divided by eps)
    block_envelope: tuple  # fitted constants (median of the same weighted norms)
    psi4_fit: tuple        # (c1, c2) of c1*eps*e^{-kappa t} + c2*e^{-omega t/eps}
    psi4_excess: float     # max ||Psi_4|| / fitted envelope
    violation: bool

    @property
    def block_excess(self):
        return tuple(s / e if e > 0 else (0.0 if s == 0 else np.inf)
                     for s, e in zip(self.block_sup, self.block_envelope))


def transition_decay_probe(Acl, epsilon, T, n1, num=200):
    """Block-wise decay envelopes of the transition matrix ``Psi(t) = exp(C t)``.

    ``C`` is the two-scale generator of :func:`singular_perturbation_generator`.
    Rates ``kappa`` and ``omega`` are 99 % of the decay margins of the slow
    matrix ``C1 - C2 C4^{-1} C3`` and of ``C4``.  Envelopes are fitted
    (the constants of the decay bounds are existential) and a violation is
    flagged when a block exceeds its envelope by more than 10x.
    """
    C = singular_perturbation_generator(np.asarray(Acl, dtype=float), epsilon, n1)
    C1 = C[:n1, :n1]
    C2 = C[:n1, n1:]
    C3 = epsilon * C[n1:, :n1]
    C4 = epsilon * C[n1:, n1:]
    omega = 0.99 * spectral_abscissa(C4).decay_margin
    if n1:
        Cbar = C1 - C2 @ np.linalg.solve(C4, C3)
        kappa = 0.99 * spectral_abscissa(Cbar).decay_margin
    else:
        kappa = omega / epsilon
    layer = 5.0 * epsilon / max(omega, 1e-12)
    fast = np.linspace(0.0, min(2.0 * layer, T), 60)
    grid = np.unique(np.concatenate([np.linspace(0.0, T, num), fast]))

    norms = np.zeros((4, grid.size))
    for k, t in enumerate(grid):
        Psi = expm(C, float(t))
        blocks = (Psi[:n1, :n1], Psi[:n1, n1:], Psi[n1:, :n1], Psi[n1:, n1:])
        norms[:, k] = [np.linalg.norm(b, 2) if b.size else 0.0 for b in blocks]

    weight = np.exp(kappa * grid)
    weighted = (norms[0] * weight, norms[1] * weight / epsilon, norms[2] * weight)
    sups = tuple(float(w.max()) for w in weighted)
    envs = tuple(float(np.median(w)) for w in weighted)

    slow_basis = epsilon * np.exp(-kappa * grid)
    fast_basis = np.exp(-omega * grid / epsilon)
    slow = grid >= layer
    c1 = float(np.median(norms[3][slow] / slow_basis[slow])) if np.any(slow) else 0.0
    inner = ~slow
    resid = np.maximum(norms[3] - c1 * slow_basis, 0.0)
    c2 = float(np.max(resid[inner] / fast_basis[inner])) if np.any(inner) else 0.0
    env = c1 * slow_basis + c2 * fast_basis
    pos = norms[3] > 0
    excess = float(np.max(norms[3][pos] / np.maximum(env[pos], 1e-300))) if np.any(pos) else 0.0
    block_bad = any(s > 10.0 * e for s, e in zip(sups, envs) if s > 0)
    return DecayProbeReport(kappa=float(kappa), omega=float(omega), block_sup=sups,
                            block_envelope=envs, psi4_fit=(c1, c2), psi4_excess=excess,
                            violation=bool(block_bad or excess > 10.0))
