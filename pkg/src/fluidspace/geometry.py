"""Levi-Civita geometry of an expression-defined metric, evaluated pointwise.

All derivatives are exact: metric components are differentiated symbolically
(up to third order) and Christoffel symbols, Riemann and Ricci tensors and
their first partial derivatives are assembled from those jets.

Curvature convention::

    R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
    R^l_{ijk} = d_i G^l_{jk} - d_j G^l_{ik} + G^l_{im} G^m_{jk} - G^l_{jm} G^m_{ik}
    S(Y,Z) = trace(X -> R(X,Y)Z),   S_{jk} = R^i_{ijk}

With this choice the unit de Sitter chart has ``R(X,Y)Z = g(Y,Z)X - g(X,Z)Y``
and a torse-forming ``xi`` obeys ``R(X,Y)xi = eta(Y)X - eta(X)Y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np

from .expr import Expr, JetCompiler, as_expr, parse
from .tensor import (
    DIM,
    MetricAtPoint,
    OrthonormalFrame,
    Tensor,
    TensorError,
    build_frame,
    frame_norm,
)


class GeometryError(ValueError):
    pass


@lru_cache(maxsize=512)
def _jet_compiler(exprs: tuple[Expr, ...], coords: tuple[str, ...], order: int) -> JetCompiler:
    return JetCompiler(exprs, coords, order)


def scalar_jet(f: Expr, coords: Sequence[str], point, order: int = 2) -> list:
    """``[f, df[n], ddf[n,m], ...]`` at ``point``."""
    levels = _jet_compiler((f,), tuple(coords), order).evaluate(point)
    return [lvl[0] if i else float(lvl[0]) for i, lvl in enumerate(levels)]


def as_point(point) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    if p.shape != (DIM,) or not np.all(np.isfinite(p)):
        raise GeometryError(f"a spacetime point is 4 finite coordinates, got {point!r}")
    return p


@dataclass(frozen=True)
class MetricField:
    """Symmetric 4x4 array of coordinate expressions (upper triangle is authoritative)."""

    coords: tuple[str, ...]
    components: tuple[tuple[Expr, ...], ...]

    @classmethod
    def from_rows(cls, coords: Sequence[str], rows) -> MetricField:
        coords = tuple(coords)
        if len(coords) != DIM or len(set(coords)) != DIM:
            raise GeometryError(f"need 4 distinct coordinate names, got {coords!r}")
        if len(rows) != DIM:
            raise GeometryError("metric must have 4 rows")
        comps = [[None] * DIM for _ in range(DIM)]
        for i, row in enumerate(rows):
            if len(row) != DIM:
                raise GeometryError(f"metric row {i} must have 4 entries")
            for j, value in enumerate(row):
                if j < i and value is None:
                    continue
                e = parse(value, coords) if isinstance(value, str) else as_expr(value)
                if not e.symbols() <= set(coords):
                    raise GeometryError(f"metric[{i}][{j}] uses unknown symbols {sorted(e.symbols() - set(coords))}")
                comps[i][j] = e
        for i in range(DIM):
            for j in range(i):
                upper = comps[j][i]
                if comps[i][j] is not None and comps[i][j] != upper:
                    raise GeometryError(f"metric[{i}][{j}] differs from metric[{j}][{i}]")
                comps[i][j] = upper
        return cls(coords, tuple(tuple(r) for r in comps))

    @classmethod
    def diagonal(cls, coords: Sequence[str], entries) -> MetricField:
        rows = [[entries[i] if i == j else 0 for j in range(DIM)] for i in range(DIM)]
        return cls.from_rows(coords, rows)

    def _unique(self) -> tuple[Expr, ...]:
        return tuple(self.components[i][j] for i in range(DIM) for j in range(i, DIM))

    def jets(self, point, order: int) -> list[np.ndarray]:
        """Metric jets ``[g[i,j], dg[n,i,j], ddg[n,m,i,j], ...]`` (derivative slots first)."""
        levels = _jet_compiler(self._unique(), self.coords, order).evaluate(as_point(point))
        out = []
        for level, arr in enumerate(levels):
            full = np.empty((DIM,) * level + (DIM, DIM))
            pos = 0
            for i in range(DIM):
                for j in range(i, DIM):
                    comp = np.moveaxis(arr[pos], range(level), range(level)) if level else arr[pos]
                    full[(Ellipsis, i, j)] = comp
                    full[(Ellipsis, j, i)] = comp
                    pos += 1
            out.append(full)
        return out

    def at(self, point) -> MetricAtPoint:
        try:
            return MetricAtPoint.from_matrix(self.jets(point, 0)[0])
        except TensorError as exc:
            raise GeometryError(f"{exc} at {list(np.asarray(point, dtype=float))}") from exc


@dataclass(frozen=True)
class VectorField:
    """Contravariant vector field with expression components."""

    coords: tuple[str, ...]
    components: tuple[Expr, ...]

    @classmethod
    def from_list(cls, coords: Sequence[str], comps) -> VectorField:
        coords = tuple(coords)
        if len(comps) != DIM:
            raise GeometryError("a vector field needs 4 components")
        exprs = tuple(parse(c, coords) if isinstance(c, str) else as_expr(c) for c in comps)
        return cls(coords, exprs)

    def jets(self, point, order: int = 1) -> list[np.ndarray]:
        """``[v[l], dv[n,l], ddv[n,m,l], ...]``."""
        levels = _jet_compiler(self.components, self.coords, order).evaluate(as_point(point))
        return [np.moveaxis(arr, 0, -1) for arr in levels]

    def at(self, point) -> np.ndarray:
        return self.jets(point, 0)[0]


def _nabla(value: np.ndarray, dvalue: np.ndarray, variance: str, gamma: np.ndarray) -> np.ndarray:
    """Covariant derivative components with the derivative slot first: ``out[n, ...]``."""
    out = np.array(dvalue, dtype=float)
    rank = len(variance)
    for slot, v in enumerate(variance):
        # gamma_n[n, a, b]: for lower slots G^b_{n a}, contracted over the slot index b
        moved = np.moveaxis(value, slot, 0)  # [m, rest...]
        if v == "d":
            corr = -np.tensordot(gamma, moved, axes=([0], [0]))  # G^m_{n s} T_{..m..} -> [n, s, rest]
        else:
            corr = np.tensordot(np.transpose(gamma, (1, 0, 2)), moved, axes=([2], [0]))  # G^s_{n m} T^{..m..} -> [n, s, rest]
        # corr axes: [n, s, rest...]; put s back into its slot (offset by the derivative axis)
        corr = np.moveaxis(corr, 1, slot + 1)
        out = out + corr
    assert out.ndim == rank + 1
    return out


class PointGeometry:
    """Lazily computed curvature data of a metric at one point."""

    def __init__(self, metric: MetricField, point):
        self.metric = metric
        self.point = as_point(point)
        self._jets: list[np.ndarray] = []

    def _jet(self, order: int) -> list[np.ndarray]:
        if len(self._jets) <= order:
            self._jets = self.metric.jets(self.point, max(order, 2))
        return self._jets

    @cached_property
    def metric_at(self) -> MetricAtPoint:
        try:
            return MetricAtPoint.from_matrix(self._jet(2)[0])
        except TensorError as exc:
            raise GeometryError(f"{exc} at {self.point.tolist()}") from exc

    @property
    def g(self) -> np.ndarray:
        return self.metric_at.g

    @property
    def g_inv(self) -> np.ndarray:
        return self.metric_at.g_inv

    @property
    def dg(self) -> np.ndarray:
        return self._jet(2)[1]

    @property
    def ddg(self) -> np.ndarray:
        return self._jet(2)[2]

    @property
    def dddg(self) -> np.ndarray:
        return self._jet(3)[3]

    @cached_property
    def dg_inv(self) -> np.ndarray:
        gi = self.g_inv
        return -np.einsum("ia,nab,bj->nij", gi, self.dg, gi)

    @cached_property
    def ddg_inv(self) -> np.ndarray:
        gi, dgi, dg = self.g_inv, self.dg_inv, self.dg
        return -(
            np.einsum("mia,nab,bj->nmij", dgi, dg, gi)
            + np.einsum("ia,nmab,bj->nmij", gi, self.ddg, gi)
            + np.einsum("ia,nab,mbj->nmij", gi, dg, dgi)
        )

    # Christoffel symbols G[l, i, j] = G^l_{ij}
    @cached_property
    def _gamma_low(self) -> np.ndarray:
        dg = self.dg  # dg[n, a, b] = d_n g_ab
        return 0.5 * (np.einsum("ijm->mij", dg) + np.einsum("jim->mij", dg) - dg)

    @cached_property
    def christoffel(self) -> np.ndarray:
        return np.einsum("lm,mij->lij", self.g_inv, self._gamma_low)

    @cached_property
    def _dgamma_low(self) -> np.ndarray:
        ddg = self.ddg
        return 0.5 * (np.einsum("nijm->nmij", ddg) + np.einsum("njim->nmij", ddg) - ddg)

    @cached_property
    def dchristoffel(self) -> np.ndarray:
        """``dG[n, l, i, j] = d_n G^l_{ij}``."""
        return np.einsum("nlm,mij->nlij", self.dg_inv, self._gamma_low) + np.einsum(
            "lm,nmij->nlij", self.g_inv, self._dgamma_low
        )

    @cached_property
    def ddchristoffel(self) -> np.ndarray:
        d3 = self.dddg
        dd_low = 0.5 * (np.einsum("onijm->onmij", d3) + np.einsum("onjim->onmij", d3) - d3)
        return (
            np.einsum("onlm,mij->onlij", self.ddg_inv, self._gamma_low)
            + np.einsum("nlm,omij->onlij", self.dg_inv, self._dgamma_low)
            + np.einsum("olm,nmij->onlij", self.dg_inv, self._dgamma_low)
            + np.einsum("lm,onmij->onlij", self.g_inv, dd_low)
        )

    @cached_property
    def riemann(self) -> np.ndarray:
        G, dG = self.christoffel, self.dchristoffel
        return (
            np.einsum("iljk->lijk", dG)
            - np.einsum("jlik->lijk", dG)
            + np.einsum("lim,mjk->lijk", G, G)
            - np.einsum("ljm,mik->lijk", G, G)
        )

    @cached_property
    def driemann(self) -> np.ndarray:
        """``dR[n, l, i, j, k] = d_n R^l_{ijk}``."""
        G, dG, ddG = self.christoffel, self.dchristoffel, self.ddchristoffel
        return (
            np.einsum("niljk->nlijk", ddG)
            - np.einsum("njlik->nlijk", ddG)
            + np.einsum("nlim,mjk->nlijk", dG, G)
            + np.einsum("lim,nmjk->nlijk", G, dG)
            - np.einsum("nljm,mik->nlijk", dG, G)
            - np.einsum("ljm,nmik->nlijk", G, dG)
        )

    @cached_property
    def ricci(self) -> np.ndarray:
        return np.einsum("iijk->jk", self.riemann)

    @cached_property
    def dricci(self) -> np.ndarray:
        return np.einsum("niijk->njk", self.driemann)

    @cached_property
    def scal(self) -> float:
        return float(np.einsum("jk,jk->", self.g_inv, self.ricci))

    @cached_property
    def dscal(self) -> np.ndarray:
        return np.einsum("njk,jk->n", self.dg_inv, self.ricci) + np.einsum("jk,njk->n", self.g_inv, self.dricci)

    def nabla(self, value: np.ndarray, dvalue: np.ndarray, variance: str) -> np.ndarray:
        return _nabla(value, dvalue, variance, self.christoffel)

    def frame(self, timelike=None) -> OrthonormalFrame:
        if timelike is None:
            timelike = self.g_inv[:, 0] * -1.0 if self.g_inv[0, 0] < 0 else np.eye(DIM)[0]
        return build_frame(self.metric_at, timelike)


# A (0,2)-field evaluator returns (value[j,k], d[n,j,k]) at a PointGeometry.
FieldJet = Callable[[PointGeometry], tuple[np.ndarray, np.ndarray]]


def metric_jet(geo: PointGeometry) -> tuple[np.ndarray, np.ndarray]:
    return geo.g, geo.dg


def ricci_jet(geo: PointGeometry) -> tuple[np.ndarray, np.ndarray]:
    return geo.ricci, geo.dricci


def _geo(metric: MetricField, point) -> PointGeometry:
    return point if isinstance(point, PointGeometry) else PointGeometry(metric, point)


# -- public operations -------------------------------------------------------------

def christoffel(metric: MetricField, point) -> np.ndarray:
    """``G[l, i, j] = G^l_{ij}``; symmetric in ``i, j``."""
    return _geo(metric, point).christoffel


def riemann(metric: MetricField, point) -> Tensor:
    return Tensor(_geo(metric, point).riemann, "uddd")


def ricci(metric: MetricField, point) -> Tensor:
    return Tensor(_geo(metric, point).ricci, "dd")


def scalar_curvature(metric: MetricField, point) -> float:
    return _geo(metric, point).scal


def scalar_curvature_frame(metric: MetricField, point) -> float:
    """``sum_i eps_ii S(E_i, E_i)`` over a numerically built orthonormal frame."""
    geo = _geo(metric, point)
    frame = geo.frame()
    s = np.einsum("ai,ij,aj->a", frame.vectors, geo.ricci, frame.vectors)
    return float(np.sum(frame.signs * s))


def covariant_derivative(field: FieldJet, metric: MetricField, point) -> Tensor:
    """``(nabla_X t)(Y, Z)`` as a ``"ddd"`` tensor with the direction ``X`` in slot 0."""
    geo = _geo(metric, point)
    value, dvalue = field(geo)
    return Tensor(geo.nabla(value, dvalue, "dd"), "ddd")


def nabla_vector(xi: VectorField, metric: MetricField, point) -> Tensor:
    """``X -> nabla_X xi`` as an ``"ud"`` tensor ``M[l, i] = (nabla_i xi)^l``."""
    geo = _geo(metric, point)
    v, dv = xi.jets(geo.point, 1)
    return Tensor(geo.nabla(v, dv, "u").T, "ud")


def lie_derivative_metric(xi: VectorField, metric: MetricField, point) -> Tensor:
    """Coordinate form ``xi^m d_m g_ij + g_mj d_i xi^m + g_im d_j xi^m``."""
    geo = _geo(metric, point)
    v, dv = xi.jets(geo.point, 1)
    g, dg = geo.g, geo.dg
    data = np.einsum("m,mij->ij", v, dg) + np.einsum("mj,im->ij", g, dv) + np.einsum("im,jm->ij", g, dv)
    return Tensor(data, "dd")


def lie_derivative_metric_connection(xi: VectorField, metric: MetricField, point) -> Tensor:
    """``g(nabla_X xi, Y) + g(X, nabla_Y xi)``; agrees with :func:`lie_derivative_metric`."""
    geo = _geo(metric, point)
    m = nabla_vector(xi, metric, geo).data
    low = geo.g @ m  # low[j, i] = g(nabla_i xi, E_j)
    return Tensor(low.T + low, "dd")


def divergence(xi: VectorField, metric: MetricField, point) -> float:
    return float(np.trace(nabla_vector(xi, metric, point).data))


def divergence_frame(xi: VectorField, metric: MetricField, point) -> float:
    """``sum_i eps_ii g(nabla_{E_i} xi, E_i)``."""
    geo = _geo(metric, point)
    m = nabla_vector(xi, metric, geo).data
    frame = geo.frame()
    vals = np.einsum("ai,li,lj,aj->a", frame.vectors, m, geo.g, frame.vectors)
    return float(np.sum(frame.signs * vals))


def gradient(f: Expr, metric: MetricField, point) -> np.ndarray:
    geo = _geo(metric, point)
    _, df = scalar_jet(f, metric.coords, geo.point, 1)
    return geo.g_inv @ df


def laplacian(f: Expr, metric: MetricField, point) -> float:
    """``div(grad f) = g^{ij}(d_i d_j f - G^k_{ij} d_k f)``."""
    geo = _geo(metric, point)
    _, df, ddf = scalar_jet(f, metric.coords, geo.point, 2)
    return float(np.einsum("ij,ij->", geo.g_inv, ddf - np.einsum("kij,k->ij", geo.christoffel, df)))


def laplacian_frame(f: Expr, metric: MetricField, point) -> float:
    """Frame divergence of ``grad f`` built from exact jets of ``g^{ij} d_j f``."""
    geo = _geo(metric, point)
    _, df, ddf = scalar_jet(f, metric.coords, geo.point, 2)
    v = geo.g_inv @ df
    dv = np.einsum("nij,j->ni", geo.dg_inv, df) + np.einsum("ij,nj->ni", geo.g_inv, ddf)
    m = geo.nabla(v, dv, "u").T
    frame = geo.frame()
    vals = np.einsum("ai,li,lj,aj->a", frame.vectors, m, geo.g, frame.vectors)
    return float(np.sum(frame.signs * vals))


def eta_jet(xi: VectorField, geo: PointGeometry, order: int = 1) -> list[np.ndarray]:
    """Metric dual ``eta_i = g_ij xi^j`` and, for ``order >= 1``, ``d_n eta_i``."""
    jets = xi.jets(geo.point, order)
    eta = geo.g @ jets[0]
    if order == 0:
        return [eta]
    deta = np.einsum("nij,j->ni", geo.dg, jets[0]) + np.einsum("ij,nj->ni", geo.g, jets[1])
    return [eta, deta]


def d_eta(xi: VectorField, metric: MetricField, point) -> Tensor:
    """Exterior derivative ``(d eta)_{ij} = d_i eta_j - d_j eta_i``."""
    geo = _geo(metric, point)
    _, deta = eta_jet(xi, geo, 1)
    return Tensor(deta - deta.T, "dd")


@dataclass(frozen=True)
class TorseFormingReport:
    """Frame max-norm residuals of the torse-forming identities at one point."""

    unit: float  # |g(xi, xi) + 1|
    nabla_xi: float  # nabla xi - (I + eta (x) xi)
    curvature_xi: float  # R(X,Y)xi - [eta(Y)X - eta(X)Y]
    eta_curvature: float  # eta(R(X,Y)Z) + eta(Y)g(X,Z) - eta(X)g(Y,Z)
    d_eta: float
    geodesic: float  # nabla_xi xi
    orthogonal: float  # g(nabla_X xi, xi)

    @property
    def max(self) -> float:
        return max(self.nabla_xi, self.curvature_xi, self.eta_curvature, self.d_eta, self.geodesic, self.orthogonal)

    def as_dict(self) -> dict[str, float]:
        return {
            "unit": self.unit,
            "nabla_xi": self.nabla_xi,
            "curvature_xi": self.curvature_xi,
            "eta_curvature": self.eta_curvature,
            "d_eta": self.d_eta,
            "geodesic": self.geodesic,
            "orthogonal": self.orthogonal,
        }


def torse_forming_residual(xi: VectorField, metric: MetricField, point, tol: float = 1e-9) -> TorseFormingReport:
    geo = _geo(metric, point)
    v = xi.at(geo.point)
    mg = geo.metric_at
    unit = abs(mg.inner(v, v) + 1.0)
    if unit > tol:
        raise GeometryError(f"xi must satisfy g(xi,xi)=-1; got {mg.inner(v, v):.12g} at {geo.point.tolist()}")
    frame = build_frame(mg, v)
    eta = mg.lower(v)
    nab = nabla_vector(xi, metric, geo)
    target = Tensor(np.eye(DIM) + np.outer(v, eta), "ud")
    R = geo.riemann
    eye = np.eye(DIM)
    r_xi = np.einsum("lijk,k->lij", R, v)
    r_xi_target = np.einsum("j,li->lij", eta, eye) - np.einsum("i,lj->lij", eta, eye)
    eta_r = np.einsum("l,lijk->ijk", eta, R)
    eta_r_target = -np.einsum("j,ik->ijk", eta, geo.g) + np.einsum("i,jk->ijk", eta, geo.g)
    geodesic = nab.data @ v
    orth = eta @ nab.data  # g(nabla_i xi, xi)
    return TorseFormingReport(
        unit=unit,
        nabla_xi=frame_norm(nab - target, frame),
        curvature_xi=frame_norm(Tensor(r_xi - r_xi_target, "udd"), frame),
        eta_curvature=frame_norm(Tensor(eta_r - eta_r_target, "ddd"), frame),
        d_eta=frame_norm(d_eta(xi, metric, geo), frame),
        geodesic=frame_norm(Tensor(geodesic, "u"), frame),
        orthogonal=frame_norm(Tensor(orth, "d"), frame),
    )
