"""System assembly: production pair, rates, kernels, initial data.

The right-hand side of the integrated system is

    dx/dt = r1(t) * G1(x) * [ I1(t) - x ]
    dy/dt = r2(t) * G2(y) * [ I2(t) - y ]

where I1 integrates f1 over the y-history against kernel 1 and I2
integrates f2 over the x-history against kernel 2.  G1 and G2 default to
the constant 1, which removes the modulated layer without a separate
code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .expr import EvalDomainError, Expression, parse
from .functions import (
    Modulation,
    MonotonicityCertificate,
    PositivityViolation,
    ProductionFunction,
)
from .kernels import (
    DelayKernel,
    GeneralMixtureKernel,
    HistoryComponent,
    KernelCertificate,
    simpson_nodes_weights,
    validate_kernel,
)

__all__ = [
    "InitialFunction",
    "SystemSpec",
    "History",
    "SimpleHistory",
    "rhs",
    "check_rate_divergence",
    "validate_system",
    "ValidationReport",
    "RATE_DIVERGENCE_CAVEAT",
]

# wire name of the report caveat set when the rate-divergence heuristic fails
RATE_DIVERGENCE_CAVEAT = "a5-heuristic-failed"


class History(Protocol):
    x_component: HistoryComponent
    y_component: HistoryComponent


class _Comp:
    __slots__ = ("_fn",)

    def __init__(self, fn):
        self._fn = fn

    def __call__(self, s: float) -> float:
        return float(self._fn(s))

    def array(self, ss):
        return np.asarray(self._fn(np.asarray(ss, dtype=float)), dtype=float)


class SimpleHistory:
    """History backed by two numpy-compatible callables; test/demo helper."""

    def __init__(self, x_fn, y_fn):
        self.x_component = _Comp(x_fn)
        self.y_component = _Comp(y_fn)


class InitialFunction:
    """Initial data on the non-positive half-line.

    Continuous, bounded and non-negative for t < 0, strictly positive at
    t = 0.  The value at 0 may be overridden, e.g. to start a run off the
    tail of its pre-history.
    """

    __slots__ = ("body", "value_at_zero", "source")

    def __init__(self, body: str | Expression, value_at_zero: float | None = None):
        self.body = body if isinstance(body, Expression) else parse(body, var="t")
        self.source = self.body.serialize()
        self.value_at_zero = (
            float(value_at_zero) if value_at_zero is not None else self.body.evaluate(0.0)
        )

    def __call__(self, t: float) -> float:
        if t >= 0.0:
            return self.value_at_zero
        return self.body.evaluate(t)

    def array(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        out = self.body.evaluate_array(np.minimum(ts, 0.0))
        return np.where(ts >= 0.0, self.value_at_zero, out)

    def bounds(self, t_floor: float, n: int = 4001) -> tuple[float, float]:
        """Sampled (inf, sup) over [t_floor, 0]; exact for constant bodies."""
        if self.body.is_constant:
            c = self.body.evaluate(0.0)
            return min(c, self.value_at_zero), max(c, self.value_at_zero)
        ts = np.linspace(min(t_floor, -1e-9), 0.0, n)
        vals = self.array(ts)
        return float(np.min(vals)), float(np.max(vals))


@dataclass
class SystemSpec:
    """A complete instance of the delayed cooperative system."""

    f1: ProductionFunction
    f2: ProductionFunction
    r1: Expression
    r2: Expression
    k1: DelayKernel
    k2: DelayKernel
    phi: InitialFunction
    psi: InitialFunction
    g1: Modulation | None = None
    g2: Modulation | None = None
    unbounded_delay_ok: bool = False
    max_lag_bound: float = 1e3
    label: str = ""

    def max_span(self, t: float) -> float:
        return max(self.k1.span(t), self.k2.span(t))


def rhs(
    spec: SystemSpec,
    t: float,
    x: float,
    y: float,
    hist: History,
    n_quad: int = 64,
) -> tuple[float, float]:
    """Derivative pair at time t given the current state and dense history."""
    feed_x = spec.k1.integrate(spec.f1, hist.y_component, t, n_quad)
    feed_y = spec.k2.integrate(spec.f2, hist.x_component, t, n_quad)
    gx = spec.g1(x) if spec.g1 is not None else 1.0
    gy = spec.g2(y) if spec.g2 is not None else 1.0
    dx = spec.r1.evaluate(t) * (gx * (feed_x - x))
    dy = spec.r2.evaluate(t) * (gy * (feed_y - y))
    return dx, dy


def check_rate_divergence(
    spec: SystemSpec,
    horizon: float,
    n_grid: int = 2001,
    tail_threshold: float = 0.1,
) -> dict:
    """Heuristic for whether the rate integrals keep growing.

    Integrates each rate over [0, horizon] and flags a rate as divergent
    when its tail mass over [horizon/2, horizon] exceeds the threshold.
    This is a diagnostic, not a proof: a failing flag means convergence
    claims carry a caveat.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    panels = max(1, (n_grid - 1) // 2)
    out = {}
    for name, rate in (("r1", spec.r1), ("r2", spec.r2)):
        nodes, weights = simpson_nodes_weights(0.0, horizon, panels)
        vals = rate.evaluate_array(nodes)
        total = float(np.dot(weights, vals))
        nodes2, weights2 = simpson_nodes_weights(horizon / 2.0, horizon, panels)
        tail = float(np.dot(weights2, rate.evaluate_array(nodes2)))
        out[name] = {
            "integral": total,
            "tail": tail,
            "divergent": bool(tail > tail_threshold),
        }
    out["all_divergent"] = bool(out["r1"]["divergent"] and out["r2"]["divergent"])
    return out


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    kernel_mass_residual: float = 0.0
    max_observed_span: float = 0.0
    t_floor: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_system(
    spec: SystemSpec,
    horizon: float,
    x_max: float,
    *,
    a1_grid: int = 10_001,
    kernel_grid: int = 101,
    init_grid: int = 2001,
    n_quad: int = 64,
) -> ValidationReport:
    """Run every structural check the theory relies on.

    Covers strict monotonicity and positivity of the production pair,
    positivity of the modulations, kernel normalization and lag validity,
    non-negative bounded rates on the sampled horizon, and admissible
    initial data.  Sampled checks are noted as such.
    """
    rep = ValidationReport()

    for name, f in (("f1", spec.f1), ("f2", spec.f2)):
        res = f.verify(x_max, a1_grid)
        if not isinstance(res, MonotonicityCertificate):
            rep.errors.append(
                f"{name}: {res.kind} on [{res.x_left:.6g}, {res.x_right:.6g}] {res.detail}"
            )

    for name, g in (("g1", spec.g1), ("g2", spec.g2)):
        if g is None:
            continue
        res = g.verify_positive(x_max, a1_grid)
        if isinstance(res, PositivityViolation):
            rep.errors.append(f"{name}: not positive near x={res.x:.6g} {res.detail}")

    t_grid = np.linspace(0.0, horizon, kernel_grid)
    for name, k in (("kernel1", spec.k1), ("kernel2", spec.k2)):
        res = validate_kernel(k, t_grid.tolist(), n_quad)
        if isinstance(res, KernelCertificate):
            rep.kernel_mass_residual = max(rep.kernel_mass_residual, res.max_mass_residual)
        else:
            rep.errors.append(f"{name}: {res.kind} violation at t={res.t:.6g}: {res.detail}")
            continue
        spans = [k.span(float(t)) for t in t_grid]
        worst = max(spans)
        rep.max_observed_span = max(rep.max_observed_span, worst)
        if worst > spec.max_lag_bound and not spec.unbounded_delay_ok:
            rep.errors.append(
                f"{name}: delay span {worst:.6g} exceeds max_lag_bound "
                f"{spec.max_lag_bound:.6g}; set unbounded_delay_ok to attest"
            )

    for name, r in (("r1", spec.r1), ("r2", spec.r2)):
        try:
            vals = r.evaluate_array(t_grid)
        except EvalDomainError as e:
            rep.errors.append(f"{name}: {e}")
            continue
        if np.any(vals < 0.0):
            t_bad = float(t_grid[np.argmax(vals < 0.0)])
            rep.errors.append(f"{name}: negative rate at t={t_bad:.6g}")
    rep.notes.append("rates checked non-negative and bounded on the sampled horizon only")

    rep.t_floor = min(spec.k1.support_floor(0.0), spec.k2.support_floor(0.0), 0.0)
    t_floor = rep.t_floor - 1e-9
    for name, init in (("phi", spec.phi), ("psi", spec.psi)):
        if init.value_at_zero <= 0.0:
            rep.errors.append(f"{name}: value at 0 must be strictly positive")
        try:
            ts = np.linspace(t_floor, 0.0, init_grid)
            vals = init.array(ts)
        except EvalDomainError as e:
            rep.errors.append(f"{name}: {e}")
            continue
        if np.any(vals < 0.0):
            t_bad = float(ts[np.argmax(vals < 0.0)])
            rep.errors.append(f"{name}: negative initial data at t={t_bad:.6g}")
        if not init.body.is_constant:
            at0 = init.body.evaluate(0.0)
            if abs(at0 - init.value_at_zero) > 1e-9 * max(1.0, abs(at0)):
                rep.notes.append(
                    f"{name}: value at 0 overrides the expression tail "
                    f"({init.value_at_zero!r} vs {at0!r})"
                )

    if isinstance(spec.k1, GeneralMixtureKernel) or isinstance(spec.k2, GeneralMixtureKernel):
        rep.notes.append("mixture normalization verified by quadrature on the sampled grid")
    return rep
