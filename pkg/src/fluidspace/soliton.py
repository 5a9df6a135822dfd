"""eta-Ricci and eta-Einstein solitons on a perfect-fluid spacetime.

An eta-Ricci soliton satisfies ``L_xi g + 2S + 2a g + 2b eta (x) eta = 0``;
the eta-Einstein variant replaces ``2a g`` by ``(2a - scal) g``.  With the
fluid Ricci tensor both equations reduce to two scalar conditions, solved in
closed form by :func:`solve_coefficients`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Expr, as_expr, parse
from .fluid import FluidModel, FluidParams
from .geometry import (
    MetricField,
    PointGeometry,
    VectorField,
    divergence,
    gradient,
    laplacian,
    lie_derivative_metric,
)
from .tensor import Tensor, build_frame, frame_norm

STEADY_TOL = 1e-9
DEFAULT_SOLITON_TOL = 1e-8


class SolitonError(ValueError):
    pass


class SolitonKind(str, enum.Enum):
    ETA_RICCI = "eta-ricci"
    ETA_EINSTEIN = "eta-einstein"


class SolitonClass(str, enum.Enum):
    SHRINKING = "shrinking"
    STEADY = "steady"
    EXPANDING = "expanding"


@dataclass(frozen=True)
class SolitonCoefficients:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise SolitonError("soliton coefficients must be finite")


def _classify(a: float, tol: float) -> SolitonClass:
    if abs(a) < tol:
        return SolitonClass.STEADY
    return SolitonClass.EXPANDING if a > 0 else SolitonClass.SHRINKING


def soliton_residual(kind, metric: MetricField, xi: VectorField, coeffs: SolitonCoefficients, point) -> float:
    """Frame max-norm of the soliton equation's left-hand side, with geometric ``S`` and ``scal``."""
    kind = SolitonKind(kind)
    geo = point if isinstance(point, PointGeometry) else PointGeometry(metric, point)
    v = xi.at(geo.point)
    mg = geo.metric_at
    if abs(mg.inner(v, v) + 1.0) > 1e-9:
        raise SolitonError(f"xi must satisfy g(xi,xi)=-1; got {mg.inner(v, v):.12g}")
    eta = mg.lower(v)
    lie = lie_derivative_metric(xi, metric, geo).data
    g_coef = 2 * coeffs.a if kind is SolitonKind.ETA_RICCI else 2 * coeffs.a - geo.scal
    lhs = lie + 2 * geo.ricci + g_coef * geo.g + 2 * coeffs.b * np.outer(eta, eta)
    return frame_norm(Tensor(lhs, "dd"), build_frame(mg, v))


def solve_coefficients(kind, params: FluidParams, div_xi: float) -> SolitonCoefficients:
    kind = SolitonKind(kind)
    lam, k, sigma, p = params.lam, params.k, params.sigma, params.p
    b = -k * (sigma + p) - div_xi / 3
    if kind is SolitonKind.ETA_RICCI:
        a = -lam - k * (sigma - p) / 2 - div_xi / 3
    else:
        a = lam - k * p - div_xi / 3
    return SolitonCoefficients(a, b)


@dataclass(frozen=True)
class TraceAudit:
    """Residuals of the two scalar consequences of a soliton equation."""

    trace: float  # contracted identity, valid for any soliton
    xi_xi: float  # evaluation on (xi, xi) with the fluid Ricci tensor

    @property
    def max(self) -> float:
        return max(self.trace, self.xi_xi)


def trace_audit(kind, coeffs: SolitonCoefficients, params: FluidParams, div_xi: float, dim: int = 4) -> TraceAudit:
    """Check ``scal = -a dim + b - div`` (eta-Ricci) or ``(2-dim)/2 scal = -a dim + b - div`` (eta-Einstein),
    plus the ``(xi, xi)`` relation for ``a - b``."""
    kind = SolitonKind(kind)
    rhs = -coeffs.a * dim + coeffs.b - div_xi
    lam, k, sigma, p = params.lam, params.k, params.sigma, params.p
    if kind is SolitonKind.ETA_RICCI:
        lhs = params.scal
        a_minus_b = -lam + k * (sigma + 3 * p) / 2
    else:
        lhs = (2 - dim) / 2 * params.scal
        a_minus_b = lam + k * sigma
    return TraceAudit(abs(lhs - rhs), abs(coeffs.a - coeffs.b - a_minus_b))


# -- sampled solve ------------------------------------------------------------------------

@dataclass(frozen=True)
class SolitonSolution:
    kind: SolitonKind
    coefficients: SolitonCoefficients
    div_values: tuple[float, ...]
    div_spread: float
    coefficient_spread: float
    residuals: tuple[float, ...]

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


def solve_on_samples(
    kind,
    metric: MetricField,
    xi: VectorField,
    fluid: FluidModel | FluidParams,
    points: Sequence,
    tol: float = DEFAULT_SOLITON_TOL,
) -> SolitonSolution:
    """Solve for constant ``(a, b)`` using the geometric ``div(xi)`` at each sample.

    The coefficients must be constants, yet the closed forms involve
    ``div(xi)`` and the fluid scalars.  If either varies over the samples by
    more than ``tol`` the solve is refused instead of averaging.
    """
    kind = SolitonKind(kind)
    if not len(points):
        raise SolitonError("need at least one sample point")
    geos = [PointGeometry(metric, pt) for pt in points]
    divs = [divergence(xi, metric, geo) for geo in geos]
    params = [fluid if isinstance(fluid, FluidParams) else fluid.at(metric.coords, geo.point) for geo in geos]
    sols = [solve_coefficients(kind, pr, d) for pr, d in zip(params, divs)]
    div_spread = max(divs) - min(divs)
    a_vals = [s.a for s in sols]
    b_vals = [s.b for s in sols]
    coef_spread = max(max(a_vals) - min(a_vals), max(b_vals) - min(b_vals))
    if div_spread > tol:
        raise SolitonError(
            f"div(xi) varies by {div_spread:.3e} over the samples; soliton coefficients are constants, "
            "so a point-dependent div(xi) admits no single (a, b)"
        )
    if coef_spread > tol:
        raise SolitonError(
            f"solved (a, b) vary by {coef_spread:.3e} over the samples (non-constant fluid data); "
            "no constant soliton coefficients exist"
        )
    coeffs = SolitonCoefficients(float(np.mean(a_vals)), float(np.mean(b_vals)))
    residuals = tuple(soliton_residual(kind, metric, xi, coeffs, geo) for geo in geos)
    return SolitonSolution(kind, coeffs, tuple(divs), div_spread, coef_spread, residuals)


# -- classification -----------------------------------------------------------------------

def ricci_soliton_a(lam, k, sigma, p):
    """``a`` of the pure Ricci soliton (b = 0); accepts symbolic arguments."""
    return -lam + k * (sigma + 3 * p) / 2


def steady_pressure(lam, k, sigma):
    """Root in ``p`` of :func:`ricci_soliton_a`: ``(2/3)(lambda/k) - sigma/3``."""
    return (2 * lam / k - sigma) / 3


@dataclass(frozen=True)
class RicciSolitonReport:
    a: float
    soliton_class: SolitonClass
    steady_pressure: float
    implied_div: float

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "class": self.soliton_class.value,
            "steadyPressure": self.steady_pressure,
            "impliedDiv": self.implied_div,
        }


def classify_ricci_soliton(params: FluidParams, tol: float = STEADY_TOL) -> RicciSolitonReport:
    """The ``b = 0`` branch: ``a = -lambda + k(sigma + 3p)/2`` and ``div(xi) = -3k(sigma + p)``."""
    a = ricci_soliton_a(params.lam, params.k, params.sigma, params.p)
    return RicciSolitonReport(
        a=a,
        soliton_class=_classify(a, tol),
        steady_pressure=steady_pressure(params.lam, params.k, params.sigma),
        implied_div=-3 * params.k * (params.sigma + params.p),
    )


# -- Laplacian theorem --------------------------------------------------------------------

@dataclass(frozen=True)
class LaplacianReport:
    laplacians: tuple[float, ...]
    predicted: tuple[float, ...]
    unit_residual: float
    residual: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "laplacian": list(self.laplacians),
            "predicted": list(self.predicted),
            "unitResidual": self.unit_residual,
            "residual": self.residual,
            "pass": self.passed,
        }


def laplacian_equation_check(
    f: Expr | str,
    metric: MetricField,
    fluid: FluidModel | FluidParams,
    b: float,
    points: Sequence,
    tol: float = DEFAULT_SOLITON_TOL,
) -> LaplacianReport:
    """Compare ``Delta f`` with ``-3[b + k(sigma + p)]`` where ``grad f`` is the soliton field."""
    f = parse(f, metric.coords) if isinstance(f, str) else as_expr(f)
    laps, preds, units = [], [], []
    for pt in points:
        geo = PointGeometry(metric, pt)
        grad = gradient(f, metric, geo)
        norm = geo.metric_at.inner(grad, grad)
        unit = abs(norm + 1.0)
        if unit > 1e-9:
            raise SolitonError(f"grad f must be unit timelike (g(grad f, grad f)=-1); got {norm:.12g} at {geo.point.tolist()}")
        params = fluid if isinstance(fluid, FluidParams) else fluid.at(metric.coords, geo.point)
        laps.append(laplacian(f, metric, geo))
        preds.append(-3 * (b + params.k * (params.sigma + params.p)))
        units.append(unit)
    residual = max(abs(x - y) for x, y in zip(laps, preds)) if laps else 0.0
    return LaplacianReport(tuple(laps), tuple(preds), max(units, default=0.0), residual, residual < tol)


# -- remarks ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ConformalKillingReport:
    r: float
    steady_pressure: float
    soliton_class: SolitonClass
    a: float
    vacuum: bool

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "steadyPressure": self.steady_pressure,
            "class": self.soliton_class.value,
            "a": self.a,
            "vacuum": self.vacuum,
        }


def conformal_killing_analysis(params: FluidParams, r: float, tol: float = STEADY_TOL) -> ConformalKillingReport:
    """Ricci soliton (b = 0) whose field is conformal Killing, ``L_xi g = r g`` with ``r != 0``.

    The ``(xi, xi)`` component forces ``sigma + p = 0`` (vacuum) and then
    ``a = k p - lambda - r/2``.
    """
    if r == 0 or not math.isfinite(r):
        raise SolitonError("conformal factor r must be a finite nonzero number")
    a = params.k * params.p - params.lam - r / 2
    return ConformalKillingReport(
        r=r,
        steady_pressure=params.lam / params.k + r / (2 * params.k),
        soliton_class=_classify(a, tol),
        a=a,
        vacuum=True,
    )


@dataclass(frozen=True)
class TorseBoundReport:
    alpha: float
    div_xi: float
    lower: float
    within: bool
    alpha_mismatch: float

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "div": self.div_xi,
            "window": [self.lower, 0.0],
            "within": self.within,
            "alphaMismatch": self.alpha_mismatch,
        }


def torse_forming_soliton_bound(params: FluidParams, alpha: float | None = None) -> TorseBoundReport:
    """For ``nabla_X xi = alpha[X + eta(X) xi]``: ``alpha = -k(sigma + p)`` and the window ``-2k sigma <= alpha < 0``.

    A supplied ``alpha`` is compared against the forced value.
    """
    forced = -params.k * (params.sigma + params.p)
    lower = -2 * params.k * params.sigma
    mismatch = 0.0 if alpha is None else abs(alpha - forced)
    return TorseBoundReport(forced, 3 * forced, lower, lower <= forced < 0, mismatch)
