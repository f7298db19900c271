"""Built-in problems: the double-integrator tracking example and random instances."""

import numpy as np

from .problem_model import ExpSignal, Oocp, RawProblem, validate_raw, validate_reduced
from .exceptions import SinglqError

__all__ = ["tracking_problem", "tracking_from_nominal", "random_raw_problem", "random_oocp"]


def tracking_problem(a1=4.0, a2=2.0, gamma=1.0, x0=2.0, y0=1.0, d1=2.0, d2=1.0):
    """Double integrator ``x' = y + a1 e^{-gamma t}``, ``y' = u + a2 e^{-gamma t}``.

    Cost ``int d1 x^2 + d2 y^2``; the control is entirely singular (``q = 0``).
    """
    if d1 <= 0 or d2 <= 0 or gamma <= 0:
        raise ValueError("d1, d2 and gamma must be positive")
    return Oocp(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]], D1=[[d1]], D2=[[d2]], g=[],
                disturbance=ExpSignal([gamma], [[a1, a2]]), z0=[x0, y0], q=0)


def tracking_from_nominal(at1, at2, gamma, xt0, yt0, d1, d2):
    """Tracking of the nominal path ``(at1, at2) e^{-gamma t}`` from ``(xt0, yt0)``.

    Shifting the state by the nominal path yields :func:`tracking_problem`
    with ``a1 = at1 gamma + at2``, ``a2 = at2 gamma``, ``x0 = xt0 - at1``,
    ``y0 = yt0 - at2``.
    """
    return tracking_problem(a1=at1 * gamma + at2, a2=at2 * gamma, gamma=gamma,
                            x0=xt0 - at1, y0=yt0 - at2, d1=d1, d2=d2)


def _draw_raw(rng, n, r, q, scale):
    A = scale * rng.standard_normal((n, n))
    B = rng.standard_normal((n, r))
    L = rng.standard_normal((n, n))
    D = L @ L.T / n + 0.2 * np.eye(n)
    g = rng.uniform(0.5, 2.0, size=q)
    modes = int(rng.integers(1, 3))
    rates = rng.uniform(0.5, 2.0, size=modes)
    coefs = rng.standard_normal((modes, n))
    z0 = rng.standard_normal(n)
    return RawProblem(Acal=A, Bcal=B, Dcal=D, g=g, disturbance=ExpSignal(rates, coefs),
                      Z0=z0, q=q)


def random_raw_problem(seed, n=None, r=None, q=None, scale=0.5, min_margin=0.05,
                       max_tries=100):
    """Random raw problem passing (A1)-(A7), reproducible from ``seed``.

    Dimensions default to random values with ``n <= 6``, ``r <= 3``,
    ``q <= 2``.  Draws whose stabilizability or detectability margin is
    below ``min_margin`` are rejected (their Riccati solutions are badly
    conditioned).
    """
    from .state_transform import transform_problem

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        nn = int(rng.integers(2, 7)) if n is None else n
        rr = int(rng.integers(1, min(3, nn) + 1)) if r is None else r
        qq = int(rng.integers(0, min(2, rr - 1) + 1)) if q is None else q
        p = _draw_raw(rng, nn, rr, qq, scale)
        if not validate_raw(p).all_pass:
            continue
        try:
            o = transform_problem(p)
        except SinglqError:
            continue
        rep = validate_reduced(o)
        if rep.all_pass and min(c.witness for c in rep.checks) >= min_margin:
            return p
    raise RuntimeError(f"no admissible instance after {max_tries} draws")


def random_oocp(seed, **kw):
    """Transformed counterpart of :func:`random_raw_problem`."""
    from .state_transform import transform_problem
    return transform_problem(random_raw_problem(seed, **kw))
