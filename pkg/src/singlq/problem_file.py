"""JSON problem files.

Raw mode::

    {"schema_version": "1", "mode": "raw", "n": 2, "r": 1, "q": 0,
     "A": [[...]], "B": [[...]], "D": [[...]], "g": [],
     "disturbance": [{"rate": 1.0, "coef": [...]}], "initial_state": [...]}

Transformed mode (``"mode": "oocp"``) replaces ``D`` with ``D1`` and ``D2``
and may carry the coupling matrix ``H``.  Matrices are row-major nested
lists.  Unknown fields are rejected.
"""

import json

import numpy as np

from .exceptions import ParseError, SinglqError
from .problem_model import ExpSignal, Oocp, RawProblem

__all__ = ["SCHEMA_VERSION", "parse_problem", "load_problem", "problem_to_dict",
           "dump_problem", "save_problem"]

SCHEMA_VERSION = "1"
SYM_TOL = 1e-12

_COMMON = {"schema_version", "mode", "n", "r", "q", "A", "B", "g", "disturbance",
           "initial_state"}
_FIELDS = {"raw": _COMMON | {"D"}, "oocp": _COMMON | {"D1", "D2", "H"}}
_OPTIONAL = {"H"}


def _int(d, key):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ParseError(f"field '{key}': expected a nonnegative integer, got {v!r}")
    return v


def _matrix(d, key, rows, cols):
    v = d[key]
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field '{key}': not a numeric matrix")
    if rows * cols == 0 and a.size == 0:
        return np.zeros((rows, cols))
    if a.ndim != 2 or a.shape != (rows, cols):
        raise ParseError(f"field '{key}': expected shape ({rows}, {cols}), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParseError(f"field '{key}': non-finite entries")
    return a


def _symmetric(d, key, size):
    a = _matrix(d, key, size, size)
    if np.max(np.abs(a - a.T), initial=0.0) > SYM_TOL * max(1.0, np.abs(a).max(initial=0.0)):
        raise ParseError(f"field '{key}': matrix is not symmetric")
    return a


def _vector(d, key, length):
    v = d[key]
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"field '{key}': not a numeric array")
    if a.ndim != 1 or a.shape[0] != length:
        raise ParseError(f"field '{key}': expected length {length}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParseError(f"field '{key}': non-finite entries")
    return a


def _disturbance(d, n):
    modes = d["disturbance"]
    if not isinstance(modes, list):
        raise ParseError("field 'disturbance': expected a list of {rate, coef}")
    rates, coefs = [], []
    for k, m in enumerate(modes):
        where = f"disturbance[{k}]"
        if not isinstance(m, dict) or set(m) != {"rate", "coef"}:
            raise ParseError(f"field '{where}': expected exactly the keys 'rate' and 'coef'")
        rate = m["rate"]
        if isinstance(rate, bool) or not isinstance(rate, (int, float)) or not rate > 0 \
                or not np.isfinite(rate):
            raise ParseError(f"field '{where}.rate': expected a positive number")
        rates.append(float(rate))
        coefs.append(_vector({f"{where}.coef": m["coef"]}, f"{where}.coef", n))
    try:
        return ExpSignal(rates, np.array(coefs).reshape(len(rates), n), dim=n)
    except (ValueError, SinglqError) as exc:
        raise ParseError(f"field 'disturbance': {exc}")


def parse_problem(data):
    """Build a :class:`RawProblem` or :class:`Oocp` from a decoded JSON object."""
    if not isinstance(data, dict):
        raise ParseError("top level: expected a JSON object")
    mode = data.get("mode")
    if mode not in _FIELDS:
        raise ParseError(f"field 'mode': expected 'raw' or 'oocp', got {mode!r}")
    allowed = _FIELDS[mode]
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ParseError(f"field '{unknown[0]}': unknown field for mode '{mode}'")
    missing = sorted(allowed - _OPTIONAL - set(data))
    if missing:
        raise ParseError(f"field '{missing[0]}': missing")
    if str(data["schema_version"]) != SCHEMA_VERSION:
        raise ParseError(f"field 'schema_version': unsupported version {data['schema_version']!r}")
    n, r, q = _int(data, "n"), _int(data, "r"), _int(data, "q")
    if not 0 <= q < r <= n:
        raise ParseError(f"field 'q': need 0 <= q < r <= n, got n={n}, r={r}, q={q}")
    A = _matrix(data, "A", n, n)
    B = _matrix(data, "B", n, r)
    g = _vector(data, "g", q)
    f = _disturbance(data, n)
    z0 = _vector(data, "initial_state", n)
    try:
        if mode == "raw":
            D = _symmetric(data, "D", n)
            return RawProblem(Acal=A, Bcal=B, Dcal=D, g=g, disturbance=f, Z0=z0, q=q)
        n1, n2 = n - r + q, r - q
        D1 = _symmetric(data, "D1", n1)
        D2 = _symmetric(data, "D2", n2)
        H = _matrix(data, "H", n2, n1) if "H" in data else None
        return Oocp(A=A, B=B, D1=D1, D2=D2, g=g, disturbance=f, z0=z0, q=q, Hcal=H)
    except ParseError:
        raise
    except SinglqError as exc:
        raise ParseError(f"field 'B': {exc}" if mode == "oocp" else str(exc))


def load_problem(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}")
    return parse_problem(data)


def _rows(M):
    return [[float(x) for x in row] for row in np.asarray(M)]


def problem_to_dict(p):
    f = p.disturbance
    base = {
        "schema_version": SCHEMA_VERSION,
        "n": int(p.n), "r": int(p.r), "q": int(p.q),
        "g": [float(x) for x in p.g],
        "disturbance": f.to_json(),
    }
    if isinstance(p, RawProblem):
        base.update(mode="raw", A=_rows(p.Acal), B=_rows(p.Bcal), D=_rows(p.Dcal),
                    initial_state=[float(x) for x in p.Z0])
    else:
        base.update(mode="oocp", A=_rows(p.A), B=_rows(p.B), D1=_rows(p.D1), D2=_rows(p.D2),
                    initial_state=[float(x) for x in p.z0])
        if p.Hcal is not None:
            base["H"] = _rows(p.Hcal)
    return base


def dump_problem(p):
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(problem_to_dict(p), sort_keys=True, indent=2) + "\n"


def save_problem(p, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_problem(p))
