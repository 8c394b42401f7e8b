"""Delay distributions and the feedback integrals against them.

Each kernel represents a time-indexed probability distribution over past
times with unit total mass: a point mass at a lagged instant, a uniform
or triangular density over a trailing window, or a general mixture of
atoms plus one density piece.  A purely singular-continuous distribution
is out of scope; atoms plus a density cover every supported model.

The feedback integral sum(w_j * f(u(lag_j(t)))) + integral density * f(u(s)) ds
is evaluated with composite Simpson panels for the density part.  Quadrature
nodes that fall before the start of recorded history raise
HistoryUnderflowError instead of extrapolating.

Atoms may sit exactly at the current time (zero lag): the integrand always
reads the opposite component's history, so no implicit equation arises.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .expr import EvalDomainError, Expression, parse
from .functions import ProductionFunction

__all__ = [
    "DelayKernel",
    "PointMassKernel",
    "UniformDensityKernel",
    "TriangularDensityKernel",
    "GeneralMixtureKernel",
    "HistoryUnderflowError",
    "KernelCertificate",
    "KernelViolation",
    "stieltjes_integrate",
    "support_floor",
    "validate_kernel",
    "as_component",
    "simpson_nodes_weights",
]

MASS_TOL = 1e-8
DEFAULT_PANELS = 64


class HistoryUnderflowError(LookupError):
    """A lookup was requested before the start of recorded history."""


class HistoryComponent(Protocol):
    def __call__(self, s: float) -> float: ...

    def array(self, ss: np.ndarray) -> np.ndarray: ...


class _FnComponent:
    __slots__ = ("_fn",)

    def __init__(self, fn: Callable):
        self._fn = fn

    def __call__(self, s: float) -> float:
        return float(self._fn(s))

    def array(self, ss: np.ndarray) -> np.ndarray:
        return np.asarray(self._fn(np.asarray(ss, dtype=float)), dtype=float)


def as_component(fn: Callable) -> HistoryComponent:
    """Wrap a numpy-compatible callable as a history component."""
    return _FnComponent(fn)


@dataclass(frozen=True)
class KernelCertificate:
    t_points: int
    max_mass_residual: float


@dataclass(frozen=True)
class KernelViolation:
    t: float
    kind: str  # "mass" | "advanced-lag" | "domain-error"
    detail: str


_WEIGHT_CACHE: dict[int, np.ndarray] = {}


def simpson_nodes_weights(a: float, b: float, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Simpson with n_panels parabolic panels
    (2*n_panels subintervals) on [a, b]."""
    if n_panels < 1:
        raise ValueError("need at least one Simpson panel")
    w = _WEIGHT_CACHE.get(n_panels)
    if w is None:
        w = np.ones(2 * n_panels + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w /= 3.0
        _WEIGHT_CACHE[n_panels] = w
    nodes = np.linspace(a, b, 2 * n_panels + 1)
    h = (b - a) / (2 * n_panels)
    return nodes, w * h


def _as_lag(lag: str | Expression) -> Expression:
    return lag if isinstance(lag, Expression) else parse(lag, var="t")


class DelayKernel:
    """Base class; subclasses define the distribution at each time t."""

    def support_floor(self, t: float) -> float:
        raise NotImplementedError

    def span(self, t: float) -> float:
        return t - self.support_floor(t)

    def integrate(
        self, f: ProductionFunction, u: HistoryComponent, t: float, n_quad: int = DEFAULT_PANELS
    ) -> float:
        raise NotImplementedError

    def mass(self, t: float, n_quad: int = DEFAULT_PANELS) -> float:
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


class PointMassKernel(DelayKernel):
    """Unit mass concentrated at s = h(t)."""

    __slots__ = ("lag",)

    def __init__(self, lag: str | Expression):
        self.lag = _as_lag(lag)

    def support_floor(self, t: float) -> float:
        return self.lag.evaluate(t)

    def integrate(self, f, u, t, n_quad=DEFAULT_PANELS):
        return f(u(self.lag.evaluate(t)))

    def mass(self, t, n_quad=DEFAULT_PANELS):
        return 1.0

    def describe(self) -> str:
        return f"point lag={self.lag.serialize()!r}"


class _DensityWindowKernel(DelayKernel):
    """Shared machinery for densities supported on [h(t), t]."""

    __slots__ = ("lag",)

    def __init__(self, lag: str | Expression):
        self.lag = _as_lag(lag)

    def support_floor(self, t: float) -> float:
        return self.lag.evaluate(t)

    def _density(self, nodes: np.ndarray, floor: float, span: float) -> np.ndarray:
        raise NotImplementedError

    def integrate(self, f, u, t, n_quad=DEFAULT_PANELS):
        if n_quad < 2:
            raise ValueError("density quadrature needs n_quad >= 2")
        floor = self.lag.evaluate(t)
        span = t - floor
        if span <= 0.0:
            raise ValueError(f"kernel window is empty at t={t!r} (floor {floor!r})")
        nodes, weights = simpson_nodes_weights(floor, t, n_quad)
        vals = f.eval_array(u.array(nodes))
        return float(np.dot(weights, vals * self._density(nodes, floor, span)))

    def mass(self, t, n_quad=DEFAULT_PANELS):
        floor = self.lag.evaluate(t)
        span = t - floor
        nodes, weights = simpson_nodes_weights(floor, t, n_quad)
        return float(np.dot(weights, self._density(nodes, floor, span)))


class UniformDensityKernel(_DensityWindowKernel):
    """Constant density 1/(t - h(t)) on [h(t), t]."""

    def _density(self, nodes, floor, span):
        return np.full(nodes.shape, 1.0 / span)

    def describe(self) -> str:
        return f"uniform lag={self.lag.serialize()!r}"


class TriangularDensityKernel(_DensityWindowKernel):
    """Density rising linearly from 0 at h(t) to 2/(t - h(t)) at t."""

    def _density(self, nodes, floor, span):
        return (2.0 / (span * span)) * (nodes - floor)

    def describe(self) -> str:
        return f"triangular lag={self.lag.serialize()!r}"


class GeneralMixtureKernel(DelayKernel):
    """Point masses plus one density piece.

    The density is an expression in the elapsed age a = t - s, supported
    on [lag(t), t]; atom weights plus the density integral must total 1.
    """

    __slots__ = ("atoms", "density", "density_lag")

    def __init__(
        self,
        atoms: Sequence[tuple[str | Expression, float]] = (),
        density: str | Expression | None = None,
        density_lag: str | Expression | None = None,
    ):
        self.atoms = tuple((_as_lag(lag), float(w)) for lag, w in atoms)
        if (density is None) != (density_lag is None):
            raise ValueError("a mixture density requires its lag expression")
        self.density = parse(density, var="u") if isinstance(density, str) else density
        self.density_lag = _as_lag(density_lag) if density_lag is not None else None
        if not self.atoms and self.density is None:
            raise ValueError("mixture kernel needs atoms or a density")
        for _, w in self.atoms:
            if w <= 0.0:
                raise ValueError("atom weights must be positive")

    def support_floor(self, t: float) -> float:
        floors = [lag.evaluate(t) for lag, _ in self.atoms]
        if self.density_lag is not None:
            floors.append(self.density_lag.evaluate(t))
        return min(floors)

    def integrate(self, f, u, t, n_quad=DEFAULT_PANELS):
        total = 0.0
        for lag, w in self.atoms:
            total += w * f(u(lag.evaluate(t)))
        if self.density is not None:
            if n_quad < 2:
                raise ValueError("density quadrature needs n_quad >= 2")
            floor = self.density_lag.evaluate(t)
            span = t - floor
            if span <= 0.0:
                raise ValueError(f"mixture density window is empty at t={t!r}")
            nodes, weights = simpson_nodes_weights(floor, t, n_quad)
            dens = self.density.evaluate_array(t - nodes)
            vals = f.eval_array(u.array(nodes))
            total += float(np.dot(weights, vals * dens))
        return total

    def mass(self, t, n_quad=DEFAULT_PANELS):
        total = sum(w for _, w in self.atoms)
        if self.density is not None:
            floor = self.density_lag.evaluate(t)
            nodes, weights = simpson_nodes_weights(floor, t, n_quad)
            total += float(np.dot(weights, self.density.evaluate_array(t - nodes)))
        return total

    def describe(self) -> str:
        parts = [f"({lag.serialize()}, {w})" for lag, w in self.atoms]
        if self.density is not None:
            parts.append(
                f"density {self.density.serialize()!r} lag={self.density_lag.serialize()!r}"
            )
        return "mixture " + " + ".join(parts)


# ---------------------------------------------------------------------------


def support_floor(kernel: DelayKernel, t: float) -> float:
    """Left endpoint of the kernel's support at time t."""
    return kernel.support_floor(t)


def stieltjes_integrate(
    kernel: DelayKernel,
    f: ProductionFunction,
    u: HistoryComponent | Callable,
    t: float,
    n_quad: int = DEFAULT_PANELS,
) -> float:
    """Integrate f(u(s)) against the kernel's distribution at time t."""
    if not hasattr(u, "array"):
        u = as_component(u)
    return kernel.integrate(f, u, t, n_quad)


def validate_kernel(
    kernel: DelayKernel, t_grid: Sequence[float], n_quad: int = DEFAULT_PANELS
) -> KernelCertificate | KernelViolation:
    """Check unit mass (to 1e-8) and non-advanced lags at every grid point."""
    t_grid = list(t_grid)
    if not t_grid:
        raise ValueError("validation grid must be non-empty")
    worst = 0.0
    for t in t_grid:
        try:
            floor = kernel.support_floor(t)
            if floor > t + 1e-12:
                return KernelViolation(
                    t, "advanced-lag", f"support floor {floor!r} exceeds t={t!r}"
                )
            if isinstance(kernel, GeneralMixtureKernel):
                for lag, _ in kernel.atoms:
                    lv = lag.evaluate(t)
                    if lv > t + 1e-12:
                        return KernelViolation(
                            t, "advanced-lag", f"atom lag {lv!r} exceeds t={t!r}"
                        )
            m = kernel.mass(t, n_quad)
        except EvalDomainError as e:
            return KernelViolation(t, "domain-error", str(e))
        residual = abs(m - 1.0)
        worst = max(worst, residual)
        if residual > MASS_TOL:
            return KernelViolation(t, "mass", f"total mass {m!r} at t={t!r}")
    return KernelCertificate(t_points=len(t_grid), max_mass_residual=worst)
