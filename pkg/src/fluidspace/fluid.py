"""Perfect-fluid matter model and the covariant-derivative classifiers.

The fluid is ``T = p g + (sigma + p) eta (x) eta`` with unit timelike velocity
``xi`` (``g(xi, xi) = -1``) and ``eta = g(xi, .)``.  With the field equations
``k T = S + (lambda - scal/2) g`` the Ricci tensor becomes quasi-Einstein,
``S = A g + B eta (x) eta`` with ``A = lambda + k(sigma - p)/2`` and
``B = k(sigma + p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import Expr, as_expr
from .geometry import (
    FieldJet,
    GeometryError,
    MetricField,
    PointGeometry,
    VectorField,
    eta_jet,
    nabla_vector,
    scalar_jet,
)
from .tensor import DIM, MetricAtPoint, Tensor, build_frame, frame_components, frame_norm

DEFAULT_CLASSIFY_TOL = 1e-7


class FluidError(ValueError):
    pass


@dataclass(frozen=True)
class FluidParams:
    """Cosmological constant, gravitational constant, energy density and pressure."""

    lam: float
    k: float
    sigma: float
    p: float

    def __post_init__(self):
        for name in ("lam", "k", "sigma", "p"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise FluidError(f"{name} must be finite, got {value!r}")
        if not self.k > 0:
            raise FluidError(f"gravitational constant k must be positive, got {self.k!r}")

    @property
    def A(self) -> float:
        return self.lam + self.k * (self.sigma - self.p) / 2

    @property
    def B(self) -> float:
        return self.k * (self.sigma + self.p)

    @property
    def scal(self) -> float:
        """Trace identity ``scal = 4 lambda + k(sigma - 3p)``."""
        return 4 * self.lam + self.k * (self.sigma - 3 * self.p)


@dataclass(frozen=True)
class FluidModel:
    """Fluid data attached to a spacetime: constant ``lambda``, ``k``; ``sigma``, ``p`` may vary."""

    lam: float
    k: float
    sigma: Expr
    p: Expr

    @classmethod
    def constant(cls, lam: float, k: float, sigma: float, p: float) -> FluidModel:
        FluidParams(lam, k, sigma, p)
        return cls(float(lam), float(k), as_expr(float(sigma)), as_expr(float(p)))

    @property
    def is_constant(self) -> bool:
        return self.sigma.is_constant and self.p.is_constant

    def at(self, coords: Sequence[str], point) -> FluidParams:
        sigma = scalar_jet(self.sigma, coords, point, 0)[0]
        p = scalar_jet(self.p, coords, point, 0)[0]
        return FluidParams(self.lam, self.k, sigma, p)

    def jets(self, coords: Sequence[str], point) -> tuple[float, np.ndarray, float, np.ndarray]:
        sigma, dsigma = scalar_jet(self.sigma, coords, point, 1)
        p, dp = scalar_jet(self.p, coords, point, 1)
        return sigma, dsigma, p, dp


def _check_unit(metric_at: MetricAtPoint, eta, tol: float) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    norm = float(eta @ metric_at.g_inv @ eta)
    if abs(norm + 1.0) > tol:
        raise FluidError(f"eta must be unit timelike (g(xi,xi)=-1); got {norm:.12g}")
    return eta


def energy_momentum(metric_at: MetricAtPoint, eta, params: FluidParams, tol: float = 1e-9) -> Tensor:
    eta = _check_unit(metric_at, eta, tol)
    return Tensor(params.p * metric_at.g + (params.sigma + params.p) * np.outer(eta, eta), "dd")


def effective_ricci(metric_at: MetricAtPoint, eta, params: FluidParams) -> Tensor:
    """Ricci tensor forced by the field equations, ``A g + B eta (x) eta``."""
    eta = np.asarray(eta, dtype=float)
    return Tensor(params.A * metric_at.g + params.B * np.outer(eta, eta), "dd")


def effective_ricci_trace(params: FluidParams) -> float:
    return params.scal


def energy_momentum_jet(fluid: FluidModel, xi: VectorField) -> FieldJet:
    """Field evaluator ``geo -> (T_jk, d_n T_jk)`` for :func:`geometry.covariant_derivative`."""

    def jet(geo: PointGeometry):
        sigma, dsigma, p, dp = fluid.jets(geo.metric.coords, geo.point)
        eta, deta = eta_jet(xi, geo, 1)
        ee = np.outer(eta, eta)
        dee = np.einsum("nj,k->njk", deta, eta) + np.einsum("j,nk->njk", eta, deta)
        value = p * geo.g + (sigma + p) * ee
        d = (
            np.einsum("n,jk->njk", dp, geo.g)
            + p * geo.dg
            + np.einsum("n,jk->njk", dsigma + dp, ee)
            + (sigma + p) * dee
        )
        return value, d

    return jet


def field_equation_residual(metric: MetricField, xi: VectorField, fluid: FluidModel | FluidParams, point) -> float:
    """Frame max-norm of ``k T - S - (lambda - scal/2) g`` at ``point``."""
    geo = point if isinstance(point, PointGeometry) else PointGeometry(metric, point)
    params = fluid if isinstance(fluid, FluidParams) else fluid.at(metric.coords, geo.point)
    v = xi.at(geo.point)
    mg = geo.metric_at
    T = energy_momentum(mg, mg.lower(v), params)
    lhs = params.k * T.data - geo.ricci - (params.lam - geo.scal / 2) * geo.g
    return frame_norm(Tensor(lhs, "dd"), build_frame(mg, v))


def recover_fluid(A: float, B: float, lam: float, k: float) -> tuple[float, float]:
    """``(sigma, p)`` from ``sigma + p = B/k`` and ``sigma - p = 2(A - lambda)/k``."""
    if not k > 0:
        raise FluidError("k must be positive")
    s_plus = B / k
    s_minus = 2 * (A - lam) / k
    return (s_plus + s_minus) / 2, (s_plus - s_minus) / 2


@dataclass(frozen=True)
class QuasiEinsteinFit:
    A: float
    B: float
    residual: float

    def recover_fluid(self, lam: float, k: float) -> tuple[float, float]:
        return recover_fluid(self.A, self.B, lam, k)


def fit_quasi_einstein(ricci_samples: Sequence[Tensor], metrics: Sequence[MetricAtPoint], etas) -> QuasiEinsteinFit:
    """Least-squares ``S ~ A g + B eta (x) eta`` over samples, in orthonormal frame components."""
    if not ricci_samples or len(ricci_samples) != len(metrics) or len(metrics) != len(etas):
        raise FluidError("need matching, non-empty Ricci/metric/eta samples")
    rows_g, rows_e, rhs = [], [], []
    frames = []
    for S, mg, eta in zip(ricci_samples, metrics, etas):
        eta = np.asarray(eta, dtype=float)
        xi = mg.raise_(eta)
        try:
            frame = build_frame(mg, xi)
        except ValueError as exc:
            raise FluidError(f"singular quasi-Einstein fit: {exc}") from exc
        frames.append(frame)
        rows_g.append(frame_components(Tensor(mg.g, "dd"), frame).ravel())
        rows_e.append(frame_components(Tensor(np.outer(eta, eta), "dd"), frame).ravel())
        rhs.append(frame_components(S, frame).ravel())
    design = np.column_stack([np.concatenate(rows_g), np.concatenate(rows_e)])
    target = np.concatenate(rhs)
    if np.linalg.matrix_rank(design) < 2:
        raise FluidError("singular quasi-Einstein fit: g and eta(x)eta are not independent")
    (A, B), *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.max(np.abs(design @ [A, B] - target)))
    return QuasiEinsteinFit(float(A), float(B), residual)


def pseudo_ricci_pressure(lam, k, sigma):
    """Pressure forced by a (weakly) pseudo Ricci-symmetric fluid, ``(2 lambda - k sigma)/(3k)``.

    Plain arithmetic, so symbolic arguments work too.
    """
    return (2 * lam - k * sigma) / (3 * k)


def predicted_xi_eigenvalue(params: FluidParams) -> float:
    """Eigenvalue of the Ricci operator on ``xi``: ``lambda - k(sigma + 3p)/2``."""
    return params.lam - params.k * (params.sigma + 3 * params.p) / 2


def ricci_eigenvalue_of_xi(metric: MetricField, xi: VectorField, point) -> tuple[float, float]:
    """``(mu, |Q xi - mu xi|)`` with ``mu`` the least-squares eigenvalue of ``Q = S^sharp`` on ``xi``."""
    geo = point if isinstance(point, PointGeometry) else PointGeometry(metric, point)
    v = xi.at(geo.point)
    frame = build_frame(geo.metric_at, v)
    q_xi = frame_components(Tensor(geo.g_inv @ geo.ricci @ v, "u"), frame)
    xi_f = frame_components(Tensor(v, "u"), frame)
    mu = float(q_xi @ xi_f / (xi_f @ xi_f))
    return mu, float(np.max(np.abs(q_xi - mu * xi_f)))


@dataclass(frozen=True)
class PlebanskiReport:
    energy_nonnegative: bool
    pressure_bounded: bool
    density_lower_bound: float
    density_above_bound: bool

    @property
    def all_pass(self) -> bool:
        return self.energy_nonnegative and self.pressure_bounded and self.density_above_bound


def plebanski_check(params: FluidParams) -> PlebanskiReport:
    """``sigma >= 0``, ``-sigma <= p <= sigma`` and ``sigma >= max(-lambda/k, lambda/2k)``."""
    bound = max(-params.lam / params.k, params.lam / (2 * params.k))
    return PlebanskiReport(
        energy_nonnegative=params.sigma >= 0,
        pressure_bounded=-params.sigma <= params.p <= params.sigma,
        density_lower_bound=bound,
        density_above_bound=params.sigma >= bound,
    )


# -- covariant-derivative classifiers ---------------------------------------------------

@dataclass
class FlagResult:
    """One condition on a covariant derivative: residual, verdict and what it implies."""

    residual: float
    fires: bool
    applicable: bool = True
    alpha: list[list[float]] | None = None
    consequence: dict | None = None

    def as_dict(self) -> dict:
        residual = None if math.isnan(self.residual) else self.residual
        out = {"residual": residual, "fires": self.fires, "applicable": self.applicable}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.consequence is not None:
            out["consequence"] = self.consequence
        return out


@dataclass
class NablaSClass:
    ricci_symmetric: FlagResult
    codazzi: FlagResult
    alpha_recurrent: FlagResult
    weakly_pseudo_ricci_symmetric: FlagResult
    pseudo_ricci_symmetric: FlagResult
    tol: float = DEFAULT_CLASSIFY_TOL

    def fired(self) -> list[str]:
        return [name for name, flag in self.flags().items() if flag.fires]

    def flags(self) -> dict[str, FlagResult]:
        return {
            "ricci_symmetric": self.ricci_symmetric,
            "codazzi": self.codazzi,
            "alpha_recurrent": self.alpha_recurrent,
            "weakly_pseudo_ricci_symmetric": self.weakly_pseudo_ricci_symmetric,
            "pseudo_ricci_symmetric": self.pseudo_ricci_symmetric,
        }

    def as_dict(self) -> dict:
        return {name: flag.as_dict() for name, flag in self.flags().items()}


@dataclass
class NablaTClass:
    parallel: FlagResult
    codazzi: FlagResult
    alpha_recurrent: FlagResult
    scal_gradient: float = 0.0
    tol: float = DEFAULT_CLASSIFY_TOL

    def flags(self) -> dict[str, FlagResult]:
        return {"parallel": self.parallel, "codazzi": self.codazzi, "alpha_recurrent": self.alpha_recurrent}

    def fired(self) -> list[str]:
        return [name for name, flag in self.flags().items() if flag.fires]

    def as_dict(self) -> dict:
        out = {name: flag.as_dict() for name, flag in self.flags().items()}
        out["scal_gradient"] = self.scal_gradient
        return out


def _recurrence_design(S: np.ndarray, weights: tuple[float, float, float]) -> np.ndarray:
    """Matrix ``M[(a,b,c), e]`` of ``w0 alpha_a S_bc + w1 alpha_b S_ca + w2 alpha_c S_ab``."""
    eye = np.eye(DIM)
    w0, w1, w2 = weights
    M = (
        w0 * np.einsum("ae,bc->abce", eye, S)
        + w1 * np.einsum("be,ca->abce", eye, S)
        + w2 * np.einsum("ce,ab->abce", eye, S)
    )
    return M.reshape(DIM**3, DIM)


def _fit_alpha(nabla: np.ndarray, S: np.ndarray, weights) -> tuple[np.ndarray, float]:
    M = _recurrence_design(S, weights)
    alpha, *_ = np.linalg.lstsq(M, nabla.ravel(), rcond=None)
    return alpha, float(np.max(np.abs(M @ alpha - nabla.ravel())))


@dataclass
class _Sample:
    geo: PointGeometry
    params: FluidParams
    xi: np.ndarray
    frame: object
    value_f: np.ndarray  # frame components of the (0,2) tensor
    nabla_f: np.ndarray  # frame components of its covariant derivative
    nabla_xi: float


def _samples(metric, xi, fluid, points, jet) -> list[_Sample]:
    out = []
    for point in points:
        geo = PointGeometry(metric, point)
        v = xi.at(geo.point)
        frame = build_frame(geo.metric_at, v)
        value, dvalue = jet(geo)
        nab = geo.nabla(value, dvalue, "dd")
        out.append(
            _Sample(
                geo=geo,
                params=fluid.at(metric.coords, geo.point),
                xi=v,
                frame=frame,
                value_f=frame_components(Tensor(value, "dd"), frame),
                nabla_f=frame_components(Tensor(nab, "ddd"), frame),
                nabla_xi=frame_norm(nabla_vector(xi, metric, geo), frame),
            )
        )
    if not out:
        raise FluidError("classification needs at least one sample point")
    return out


def _recurrence_flag(samples, weights, tol, consequence_fn) -> FlagResult:
    value_norm = max(float(np.max(np.abs(s.value_f))) for s in samples)
    if value_norm < tol:
        return FlagResult(residual=float("nan"), fires=False, applicable=False)
    residual, alphas, alpha_min = 0.0, [], math.inf
    for s in samples:
        alpha_f, res = _fit_alpha(s.nabla_f, s.value_f, weights)
        residual = max(residual, res)
        alpha_min = min(alpha_min, float(np.max(np.abs(alpha_f))))
        # frame components back to coordinates: alpha_i = alpha_a theta^a_i
        alphas.append((alpha_f @ s.frame.coframe).tolist())
    fires = residual < tol and alpha_min > tol
    consequence = consequence_fn(samples, alphas, tol) if fires else None
    return FlagResult(residual, fires, True, alphas, consequence)


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) < tol


def classify_nabla_s(
    metric: MetricField,
    xi: VectorField,
    fluid: FluidModel,
    points,
    tol: float = DEFAULT_CLASSIFY_TOL,
) -> NablaSClass:
    """Residuals of the Ricci-symmetric, Codazzi, recurrent and (weakly) pseudo conditions on ``nabla S``."""
    samples = _samples(metric, xi, fluid, points, lambda geo: (geo.ricci, geo.dricci))

    def vacuum_or_parallel(ss, alphas, tol):
        vacuum = all(_close(s.params.p, -s.params.sigma, tol) for s in ss)
        parallel = all(s.nabla_xi < tol for s in ss)
        return {"vacuum": vacuum, "xi_parallel": parallel, "holds": vacuum or parallel}

    def recurrent_consequence(ss, alphas, tol):
        vacuum = all(
            _close(s.params.p, -s.params.sigma, tol) and _close(s.params.p, s.params.lam / s.params.k, tol) for s in ss
        )
        parallel = all(s.nabla_xi < tol for s in ss)
        return {"vacuum_at_lambda_over_k": vacuum, "xi_parallel": parallel, "holds": vacuum or parallel}

    def pseudo_consequence(ss, alphas, tol):
        holds = all(_close(s.params.p, pseudo_ricci_pressure(s.params.lam, s.params.k, s.params.sigma), tol) for s in ss)
        alpha_xi = [float(np.dot(a, s.xi)) for a, s in zip(alphas, ss)]
        return {
            "pressure_matches": holds,
            "holds": holds,
            "alpha_xi": alpha_xi,
            "lorentzian_concircular": all(abs(a) > tol for a in alpha_xi),
            "lp_sasakian": all(_close(a, -1.0, tol) for a in alpha_xi),
        }

    sym_res = max(float(np.max(np.abs(s.nabla_f))) for s in samples)
    cod_res = max(float(np.max(np.abs(s.nabla_f - s.nabla_f.transpose(1, 0, 2)))) for s in samples)
    sym_fires = sym_res < tol
    cod_fires = cod_res < tol
    ricci_symmetric = FlagResult(sym_res, sym_fires, consequence=vacuum_or_parallel(samples, None, tol) if sym_fires else None)
    codazzi = FlagResult(cod_res, cod_fires, consequence=vacuum_or_parallel(samples, None, tol) if cod_fires else None)
    return NablaSClass(
        ricci_symmetric=ricci_symmetric,
        codazzi=codazzi,
        alpha_recurrent=_recurrence_flag(samples, (1, 0, 0), tol, recurrent_consequence),
        weakly_pseudo_ricci_symmetric=_recurrence_flag(samples, (1, 1, 1), tol, pseudo_consequence),
        pseudo_ricci_symmetric=_recurrence_flag(samples, (2, 1, 1), tol, pseudo_consequence),
        tol=tol,
    )


def classify_nabla_t(
    metric: MetricField,
    xi: VectorField,
    fluid: FluidModel,
    points,
    tol: float = DEFAULT_CLASSIFY_TOL,
) -> NablaTClass:
    """Parallel, Codazzi and recurrent conditions on ``nabla T`` plus the scalar-curvature relations they force."""
    samples = _samples(metric, xi, fluid, points, energy_momentum_jet(fluid, xi))
    scal_grad = max(frame_norm(Tensor(s.geo.dscal, "d"), s.frame) for s in samples)

    def scal_constant(ss, alphas, tol):
        return {"scal_gradient": scal_grad, "holds": scal_grad < tol}

    def codazzi_relation(ss, alphas, tol):
        worst = 0.0
        for s in ss:
            geo, prm, v = s.geo, s.params, s.xi
            grad_scal = geo.g_inv @ geo.dscal
            geodesic = nabla_vector(xi, metric, geo).data @ v
            rel = grad_scal + float(geo.dscal @ v) * v + 2 * prm.k * (prm.sigma + prm.p) * geodesic
            worst = max(worst, frame_norm(Tensor(rel, "u"), s.frame))
        return {"relation_residual": worst, "holds": worst < tol}

    def recurrent_relation(ss, alphas, tol):
        worst = 0.0
        for s, alpha in zip(ss, alphas):
            geo, prm = s.geo, s.params
            coef = 4 * prm.lam - geo.scal - prm.k * (prm.sigma + 3 * prm.p)
            rel = geo.dscal + coef * np.asarray(alpha)
            worst = max(worst, frame_norm(Tensor(rel, "d"), s.frame))
        return {"relation_residual": worst, "holds": worst < tol}

    par_res = max(float(np.max(np.abs(s.nabla_f))) for s in samples)
    cod_res = max(float(np.max(np.abs(s.nabla_f - s.nabla_f.transpose(1, 0, 2)))) for s in samples)
    par_fires, cod_fires = par_res < tol, cod_res < tol
    return NablaTClass(
        parallel=FlagResult(par_res, par_fires, consequence=scal_constant(samples, None, tol) if par_fires else None),
        codazzi=FlagResult(cod_res, cod_fires, consequence=codazzi_relation(samples, None, tol) if cod_fires else None),
        alpha_recurrent=_recurrence_flag(samples, (1, 0, 0), tol, recurrent_relation),
        scal_gradient=scal_grad,
        tol=tol,
    )
