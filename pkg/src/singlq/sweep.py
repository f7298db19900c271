"""Epsilon sweeps: exact vs zero-order quantities and O(eps) ratio diagnostics."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .cheap_solver import block_riccati_residuals, solve_pccp
from .linalg_core import are_residual, spectral_abscissa
from .reduced_solver import minimizing_feedback_1, minimizing_feedback_2, solve_reduced
from .simulation import asymptotic_reference, evaluate_cost, simulate

__all__ = [
    "DEFAULT_EPSILONS",
    "RatioDiagnostic",
    "ratio_check",
    "band_check",
    "SweepRow",
    "SweepReport",
    "sweep_row",
    "run_sweep",
    "thread_count",
]

DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)
RATIO_FACTOR = 4.0
ZERO_FLOOR = 1e-9
GRID_POINTS = 30


@dataclass(frozen=True)
class RatioDiagnostic:
    name: str
    ratios: tuple
    spread: float
    passed: bool
    note: str = ""


def ratio_check(name, epsilons, values, factor=RATIO_FACTOR, floor=ZERO_FLOOR, power=1):
    """``values / eps**power`` must vary by at most ``factor`` across the sweep.

    Values at or below ``floor`` are treated as exactly zero (an error that
    vanishes identically is trivially ``O(eps)``); the spread is taken over
    the remaining entries.
    """
    eps = np.asarray(epsilons, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    ratios = v / eps ** power
    live = v > floor
    if np.count_nonzero(live) < 2:
        note = "identically zero" if not live.any() else "single nonzero entry"
        return RatioDiagnostic(name, tuple(ratios.tolist()), 1.0, True, note)
    spread = float(ratios[live].max() / ratios[live].min())
    note = "" if live.all() else f"{int((~live).sum())} entries below {floor:g}"
    return RatioDiagnostic(name, tuple(ratios.tolist()), spread, spread <= factor, note)


def band_check(name, values, factor=RATIO_FACTOR):
    """Positive values bounded above and below within ``factor``."""
    v = np.abs(np.asarray(values, dtype=float))
    if np.any(v <= 0):
        return RatioDiagnostic(name, tuple(v.tolist()), np.inf, False, "zero entry")
    spread = float(v.max() / v.min())
    return RatioDiagnostic(name, tuple(v.tolist()), spread, spread <= factor)


@dataclass
class SweepRow:
    epsilon: float
    status: str = "ok"
    Jstar: float = np.nan
    are_residual: float = np.nan
    block_residual: float = np.nan
    closed_loop_abscissa: float = np.nan
    P_err: tuple = (np.nan, np.nan, np.nan)
    h_err: tuple = (np.nan, np.nan)
    s_err: float = np.nan
    J_u1: float = np.nan
    J_u1_tail: float = np.nan
    J_u2: float = np.nan
    J_u2_tail: float = np.nan
    u1_lower_max: float = np.nan
    u1_at_zero: tuple = ()
    x_err: float = np.nan
    y_err: float = np.nan
    trajectories: dict = field(default_factory=dict, repr=False)

    def to_json(self):
        d = asdict(self)
        d.pop("trajectories")
        return _clean(d)


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def _grid(rs):
    return np.linspace(0.0, 5.0 / rs.mu, GRID_POINTS)


def _sup_weighted(diff, grid, mu):
    return float(np.max(np.linalg.norm(diff, axis=-1) * np.exp(mu * grid)))


def sweep_row(o, rs, epsilon, tol=1e-9, horizon=None, simulate_laws=True, keep=False):
    """All per-epsilon quantities of a sweep (exact solve, simulations, errors)."""
    row = SweepRow(epsilon=float(epsilon))
    sol = solve_pccp(o, epsilon, reduced=rs)
    row.Jstar = sol.Jstar
    row.are_residual = are_residual(sol.P, o.A, sol.S, o.D)
    P1, P2, P3 = sol.blocks
    row.block_residual = float(max(np.abs(R).max(initial=0.0)
                                   for R in block_riccati_residuals(o, epsilon, P1, P2, P3)))
    row.closed_loop_abscissa = spectral_abscissa(sol.Acl).abscissa
    row.P_err = (float(np.linalg.norm(P1 - rs.P10, 2)) if P1.size else 0.0,
                 float(np.linalg.norm(P2 - rs.P20, 2)) if P2.size else 0.0,
                 float(np.linalg.norm(P3 - rs.P30, 2)))
    grid = _grid(rs)
    row.h_err = (_sup_weighted(sol.h1(grid) - rs.h10(grid), grid, rs.mu),
                 _sup_weighted(sol.h2(grid) - rs.h20(grid), grid, rs.mu))
    row.s_err = float(np.max(np.abs(sol.s(grid) - rs.s0(grid))))
    if simulate_laws:
        u1 = minimizing_feedback_1(rs, o, epsilon)
        u2 = minimizing_feedback_2(rs, o, epsilon)
        t1 = simulate(o, u1, horizon=horizon, tol=tol, epsilon=epsilon)
        t2 = simulate(o, u2, horizon=horizon, tol=tol, epsilon=epsilon)
        row.J_u1, row.J_u1_tail = evaluate_cost(t1, o), t1.tail_bound
        row.J_u2, row.J_u2_tail = evaluate_cost(t2, o), t2.tail_bound
        row.u1_lower_max = float(np.max(np.linalg.norm(t1.controls[:, o.q:], axis=1)))
        row.u1_at_zero = tuple(float(v) for v in u1(o.z0, 0.0))
        ref = asymptotic_reference(rs, o, epsilon)
        mask = t1.times <= 8.0 / rs.mu
        tt = t1.times[mask]
        x = t1.states[mask, :o.n1]
        y = t1.states[mask, o.n1:]
        row.x_err = _sup_weighted(x - ref.x_outer(tt), tt, rs.mu) if o.n1 else 0.0
        row.y_err = _sup_weighted(y - ref.y_asymptotic(tt), tt, rs.mu)
        if keep:
            row.trajectories = {"u1": t1, "u2": t2}
    return row


def thread_count():
    """Worker count from ``SINGLQ_THREADS`` (``0`` or unset means serial)."""
    raw = os.environ.get("SINGLQ_THREADS", "0").strip() or "0"
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"SINGLQ_THREADS must be an integer, got {raw!r}")
    return max(k, 0)


@dataclass
class SweepReport:
    epsilons: tuple
    rows: list
    Jbar: float
    mu: float
    diagnostics: list = field(default_factory=list)

    def diagnostic(self, name):
        for d in self.diagnostics:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def all_pass(self):
        return all(d.passed for d in self.diagnostics)

    def to_json(self):
        return _clean({
            "epsilons": list(self.epsilons),
            "Jbar": self.Jbar,
            "mu": self.mu,
            "rows": [r.to_json() for r in self.rows],
            "diagnostics": [asdict(d) for d in self.diagnostics],
        })

    CSV_COLUMNS = ("epsilon", "status", "Jstar", "J_u1", "J_u1_tail", "J_u2", "J_u2_tail",
                   "P1_err", "P2_err", "P3_err", "h1_err", "h2_err", "s_err",
                   "eps_u1_lower_max", "x_err", "y_err", "are_residual")

    def csv_rows(self):
        out = []
        for r in self.rows:
            out.append((r.epsilon, r.status, r.Jstar, r.J_u1, r.J_u1_tail, r.J_u2, r.J_u2_tail,
                        *r.P_err, *r.h_err, r.s_err, r.epsilon * r.u1_lower_max,
                        r.x_err, r.y_err, r.are_residual))
        return out


def _diagnostics(rows, Jbar, simulated):
    ok = [r for r in rows if r.status == "ok"]
    eps = [r.epsilon for r in ok]
    if len(ok) < 2:
        return [RatioDiagnostic("successful rows", (float(len(ok)),), np.inf, False,
                                "fewer than two epsilon values solved")]
    d = []
    for i in range(3):
        d.append(ratio_check(f"P{i + 1}_err/eps", eps, [r.P_err[i] for r in ok]))
    for i in range(2):
        d.append(ratio_check(f"h{i + 1}_err/eps", eps, [r.h_err[i] for r in ok]))
    d.append(ratio_check("s_err/eps", eps, [r.s_err for r in ok]))
    d.append(ratio_check("(Jstar-Jbar)/eps", eps, [r.Jstar - Jbar for r in ok]))
    js = [r.Jstar for r in ok]
    mono = all(b <= a + 1e-9 for a, b in zip(js, js[1:]))
    d.append(RatioDiagnostic("Jstar nonincreasing", tuple(js), 1.0, mono))
    if simulated:
        for key in ("J_u1", "J_u2"):
            vals = [getattr(r, key) for r in ok]
            d.append(ratio_check(f"({key}-Jbar)/eps", eps, [v - Jbar for v in vals]))
            strict = all(b < a for a, b in zip(vals, vals[1:]))
            d.append(RatioDiagnostic(f"{key} strictly decreasing", tuple(vals), 1.0, strict))
        d.append(ratio_check("x_err/eps", eps, [r.x_err for r in ok]))
        d.append(ratio_check("y_err/eps", eps, [r.y_err for r in ok]))
        d.append(band_check("eps*max|u_lower|", [r.epsilon * r.u1_lower_max for r in ok]))
    return d


def run_sweep(o, epsilons=DEFAULT_EPSILONS, tol=1e-9, horizon=None, simulate_laws=True,
              threads=None, keep=False, rs=None):
    """Solve and (optionally) simulate for each epsilon; rows sorted by decreasing eps.

    A failing epsilon is recorded with its error message in ``status`` and
    excluded from the diagnostics.
    """
    eps = sorted({float(e) for e in epsilons}, reverse=True)
    if len(eps) < 2:
        raise ValueError("a sweep needs at least two distinct epsilon values")
    if rs is None:
        rs = solve_reduced(o)
    threads = thread_count() if threads is None else threads

    def work(e):
        try:
            return sweep_row(o, rs, e, tol=tol, horizon=horizon,
                             simulate_laws=simulate_laws, keep=keep)
        except (ArithmeticError, OverflowError, ValueError) as exc:
            return SweepRow(epsilon=e, status=f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, eps))
    else:
        rows = [work(e) for e in eps]
    return SweepReport(epsilons=tuple(eps), rows=rows, Jbar=rs.Jbar, mu=rs.mu,
                       diagnostics=_diagnostics(rows, rs.Jbar, simulate_laws))
