"""Strictly increasing production functions with reliable numeric inversion.

A ProductionFunction wraps either a parsed expression or an arbitrary
scalar callable.  Monotonicity is certified by grid sampling rather than
symbolically: the verified interval and grid size are recorded on the
certificate so downstream consumers know exactly what was checked.

Inverses are computed by bisection, which monotonicity makes bracketing-
safe.  Values below the function's range invert to 0 by convention; this
convention is applied globally and surfaced in run reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expr import EvalDomainError, Expression, parse

__all__ = [
    "ProductionFunction",
    "Modulation",
    "MonotonicityCertificate",
    "MonotonicityViolation",
    "PositivityCertificate",
    "PositivityViolation",
    "InverseRangeError",
    "verify_increasing",
    "inverse",
    "inverse_auto",
    "inverse_function",
    "make_separator",
]

DEFAULT_INVERSE_TOL = 1e-12
DEFAULT_GRID = 10_001
BRACKET_CAP = 2.0**50


@dataclass(frozen=True)
class MonotonicityCertificate:
    x_max: float
    n_grid: int
    plateau_fraction: float = 0.0


@dataclass(frozen=True)
class MonotonicityViolation:
    kind: str  # "not-increasing" | "not-positive" | "domain-error"
    x_left: float
    x_right: float
    f_left: float | None = None
    f_right: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class PositivityCertificate:
    x_max: float
    n_grid: int


@dataclass(frozen=True)
class PositivityViolation:
    x: float
    value: float | None
    detail: str = ""


class InverseRangeError(ValueError):
    """Requested value lies above the function's value at the bracket top;
    the caller must enlarge the working interval."""

    def __init__(self, y: float, bracket_hi: float, f_hi: float):
        self.y = y
        self.bracket_hi = bracket_hi
        self.f_hi = f_hi
        super().__init__(
            f"target {y!r} exceeds f({bracket_hi!r}) = {f_hi!r}; enlarge the bracket"
        )


def _vectorize(fn: Callable[[float], float]) -> Callable[[np.ndarray], np.ndarray]:
    def array_fn(vs: np.ndarray) -> np.ndarray:
        vs = np.asarray(vs, dtype=float)
        out = np.empty(vs.shape, dtype=float)
        flat = vs.ravel()
        dst = out.ravel()
        for i in range(flat.size):
            dst[i] = fn(float(flat[i]))
        return out

    return array_fn


class ProductionFunction:
    """A strictly increasing scalar map on the non-negative reals."""

    __slots__ = ("_fn", "_array_fn", "source", "name", "certificate", "_inverse_fn", "_inverse_array_fn")

    def __init__(
        self,
        fn: Callable[[float], float],
        array_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        *,
        source: str | None = None,
        name: str | None = None,
        inverse_fn: Callable[[float], float] | None = None,
        inverse_array_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    ):
        self._fn = fn
        self._array_fn = array_fn if array_fn is not None else _vectorize(fn)
        self.source = source
        self.name = name or source or getattr(fn, "__name__", "f")
        self.certificate: MonotonicityCertificate | None = None
        self._inverse_fn = inverse_fn
        self._inverse_array_fn = inverse_array_fn

    @classmethod
    def from_expression(cls, body: str | Expression, var: str = "x") -> "ProductionFunction":
        e = body if isinstance(body, Expression) else parse(body, var=var)
        return cls(e.evaluate, e.evaluate_array, source=e.serialize(), name=e.serialize())

    @classmethod
    def from_callable(
        cls,
        fn: Callable[[float], float],
        array_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        **kw,
    ) -> "ProductionFunction":
        return cls(fn, array_fn, **kw)

    def __call__(self, v: float) -> float:
        return self._fn(v)

    def eval_array(self, vs: np.ndarray) -> np.ndarray:
        return self._array_fn(np.asarray(vs, dtype=float))

    def __repr__(self) -> str:
        return f"ProductionFunction({self.name!r})"

    # -- verification -------------------------------------------------

    def verify(self, x_max: float, n_grid: int = DEFAULT_GRID):
        result = verify_increasing(self, x_max, n_grid)
        if isinstance(result, MonotonicityCertificate):
            self.certificate = result
        return result

    # -- inversion ----------------------------------------------------

    def inverse(self, y: float, bracket_hi: float, tol: float = DEFAULT_INVERSE_TOL) -> float:
        if self._inverse_fn is not None:
            return max(0.0, self._inverse_fn(y))
        return inverse(self, y, bracket_hi, tol)

    def inverse_array(self, ys: np.ndarray, bracket_hi: float, tol: float = DEFAULT_INVERSE_TOL) -> np.ndarray:
        if self._inverse_array_fn is not None:
            return np.maximum(0.0, self._inverse_array_fn(np.asarray(ys, dtype=float)))
        return _bisect_array(self._array_fn, self._fn, np.asarray(ys, dtype=float), bracket_hi, tol)


class Modulation:
    """A state-dependent growth modulation, positive for positive states."""

    __slots__ = ("_fn", "_array_fn", "source", "name", "certificate")

    def __init__(self, fn, array_fn=None, *, source=None, name=None):
        self._fn = fn
        self._array_fn = array_fn if array_fn is not None else _vectorize(fn)
        self.source = source
        self.name = name or source or "G"
        self.certificate: PositivityCertificate | None = None

    @classmethod
    def from_expression(cls, body: str | Expression, var: str = "x") -> "Modulation":
        e = body if isinstance(body, Expression) else parse(body, var=var)
        return cls(e.evaluate, e.evaluate_array, source=e.serialize(), name=e.serialize())

    def __call__(self, v: float) -> float:
        return self._fn(v)

    def eval_array(self, vs):
        return self._array_fn(np.asarray(vs, dtype=float))

    def verify_positive(self, x_max: float, n_grid: int = DEFAULT_GRID):
        xs = np.linspace(0.0, x_max, n_grid)
        try:
            vals = self.eval_array(xs)
        except EvalDomainError as e:
            return PositivityViolation(x=float("nan"), value=None, detail=str(e))
        bad = np.nonzero((xs > 0.0) & (vals <= 0.0))[0]
        if bad.size:
            i = int(bad[0])
            return PositivityViolation(x=float(xs[i]), value=float(vals[i]))
        cert = PositivityCertificate(x_max=x_max, n_grid=n_grid)
        self.certificate = cert
        return cert


# ---------------------------------------------------------------------------


def verify_increasing(
    f: ProductionFunction, x_max: float, n_grid: int = DEFAULT_GRID
) -> MonotonicityCertificate | MonotonicityViolation:
    """Sample f on a uniform grid of [0, x_max] and check strict increase
    plus positivity for positive arguments.  Returns the first offending
    adjacent pair, or a certificate recording what was verified.

    Adjacent equal values are tolerated as float-resolution plateaus
    (saturating functions stop resolving near their ceiling), but a
    plateau covering more than 20% of the grid means the function is
    genuinely flat somewhere and is rejected."""
    if x_max <= 0 or n_grid < 2:
        raise ValueError("x_max must be positive and n_grid at least 2")
    xs = np.linspace(0.0, x_max, n_grid)
    try:
        vals = f.eval_array(xs)
    except EvalDomainError as e:
        return MonotonicityViolation("domain-error", 0.0, x_max, detail=str(e))
    diffs = np.diff(vals)
    bad = np.nonzero(diffs < 0.0)[0]
    if bad.size:
        i = int(bad[0])
        return MonotonicityViolation(
            "not-increasing", float(xs[i]), float(xs[i + 1]), float(vals[i]), float(vals[i + 1])
        )
    flat = np.nonzero(diffs == 0.0)[0]
    plateau = flat.size / diffs.size
    if plateau > 0.2:
        i = int(flat[0])
        return MonotonicityViolation(
            "not-increasing",
            float(xs[i]),
            float(xs[i + 1]),
            float(vals[i]),
            float(vals[i + 1]),
            detail=f"flat over {100.0 * plateau:.1f}% of [0, {x_max:g}]",
        )
    nonpos = np.nonzero((xs > 0.0) & (vals <= 0.0))[0]
    if nonpos.size:
        i = int(nonpos[0])
        return MonotonicityViolation(
            "not-positive", float(xs[i]), float(xs[i]), float(vals[i]), float(vals[i])
        )
    return MonotonicityCertificate(
        x_max=float(x_max), n_grid=int(n_grid), plateau_fraction=float(plateau)
    )


def inverse(
    f: ProductionFunction | Callable[[float], float],
    y: float,
    bracket_hi: float,
    tol: float = DEFAULT_INVERSE_TOL,
) -> float:
    """Invert a verified-increasing f on [0, bracket_hi] by bisection.

    Values below f(0) return 0 by convention; values above f(bracket_hi)
    raise InverseRangeError so the caller can enlarge the interval.  The
    result x satisfies |f(x) - y| <= tol * max(1, |y|).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    fn = f if callable(f) and not isinstance(f, ProductionFunction) else f.__call__
    f_lo = fn(0.0)
    if y <= f_lo:
        return 0.0
    f_hi = fn(bracket_hi)
    if y > f_hi:
        raise InverseRangeError(y, bracket_hi, f_hi)
    lo, hi = 0.0, float(bracket_hi)
    budget = tol * max(1.0, abs(y))
    best_x, best_err = lo, abs(f_lo - y)
    if abs(f_hi - y) < best_err:
        best_x, best_err = hi, abs(f_hi - y)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        err = abs(fm - y)
        if err < best_err:
            best_x, best_err = mid, err
        if err <= budget:
            return mid
        if fm < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= math.ulp(hi):
            break
    return best_x


def inverse_auto(
    f: ProductionFunction,
    y: float,
    bracket_hi: float,
    tol: float = DEFAULT_INVERSE_TOL,
    cap: float = BRACKET_CAP,
) -> float:
    """Inverse with geometric bracket enlargement (x2) up to cap."""
    hi = float(bracket_hi)
    while True:
        try:
            return f.inverse(y, hi, tol)
        except InverseRangeError:
            if hi >= cap:
                raise
            hi = min(cap, 2.0 * hi)


def _bisect_array(array_fn, scalar_fn, ys: np.ndarray, bracket_hi: float, tol: float) -> np.ndarray:
    ys = np.asarray(ys, dtype=float)
    lo = np.zeros_like(ys)
    hi = np.full_like(ys, float(bracket_hi))
    f_lo = scalar_fn(0.0)
    f_hi = scalar_fn(float(bracket_hi))
    below = ys <= f_lo
    above = ys > f_hi
    if np.any(above):
        bad = float(ys[above].max())
        raise InverseRangeError(bad, bracket_hi, f_hi)
    budget = tol * np.maximum(1.0, np.abs(ys))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = array_fn(mid)
        err = np.abs(fm - ys)
        if np.all((err <= budget) | below):
            lo = hi = mid
            break
        go_up = fm < ys
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
        # stop once every bracket is at float resolution (per element)
        if np.all((hi - lo) <= np.spacing(np.maximum(np.abs(hi), 1.0))):
            break
    out = 0.5 * (lo + hi)
    out[below] = 0.0
    return out


def inverse_function(
    f: ProductionFunction,
    bracket_hi: float,
    tol: float = DEFAULT_INVERSE_TOL,
    cap: float = BRACKET_CAP,
    above_range: str = "raise",
) -> ProductionFunction:
    """The inverse of f as a ProductionFunction (0 below f's range), with
    the bracket enlarged geometrically on demand.

    For a bounded f, targets above its range either raise (default) or,
    with above_range="inf", return +inf: no finite argument reaches them.
    """
    if above_range not in ("raise", "inf"):
        raise ValueError("above_range must be 'raise' or 'inf'")

    def scalar(y: float) -> float:
        try:
            return inverse_auto(f, y, bracket_hi, tol, cap)
        except InverseRangeError:
            if above_range == "inf":
                return math.inf
            raise

    def array(ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        hi = float(bracket_hi)
        while True:
            try:
                return f.inverse_array(ys, hi, tol)
            except InverseRangeError:
                if hi >= cap:
                    if above_range == "inf":
                        f_hi = f(hi)
                        out = np.full(ys.shape, np.inf)
                        mask = ys <= f_hi
                        if np.any(mask):
                            out[mask] = f.inverse_array(ys[mask], hi, tol)
                        return out
                    raise
                hi = min(cap, 2.0 * hi)

    return ProductionFunction(
        scalar,
        array,
        name=f"{f.name}^-1",
        inverse_fn=f.__call__,
        inverse_array_fn=f.eval_array,
    )


def make_separator(
    f1: ProductionFunction,
    f2: ProductionFunction,
    alpha: float,
    bracket_hi: float,
    tol: float = DEFAULT_INVERSE_TOL,
) -> ProductionFunction:
    """The strictly increasing blend alpha * f1^-1 + (1 - alpha) * f2.

    Lies strictly between f1^-1 and f2 wherever they differ, which is what
    synchronizes the two components of the bound sequences.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    f1_inv = inverse_function(f1, bracket_hi, tol)

    def scalar(x: float) -> float:
        return alpha * f1_inv(x) + (1.0 - alpha) * f2(x)

    def array(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return alpha * f1_inv.eval_array(xs) + (1.0 - alpha) * f2.eval_array(xs)

    return ProductionFunction(
        scalar, array, name=f"{alpha}*{f1.name}^-1 + {1 - alpha}*{f2.name}"
    )
