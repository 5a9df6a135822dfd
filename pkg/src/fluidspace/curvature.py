"""Riemann, projective, concircular, conformal and conharmonic curvature tensors,
the two Ricci-semisymmetry operators and the pressures they force.

All (1,3)-tensors use the layout ``T[l, i, j, k] = T^l_{ijk}``, i.e.
``T(E_i, E_j) E_k = T^l_{ijk} E_l``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .tensor import DIM, MetricAtPoint, OrthonormalFrame, Tensor, build_frame, frame_components


class CurvatureError(ValueError):
    pass


class CurvatureKind(str, enum.Enum):
    RIEMANN = "riemann"
    PROJECTIVE = "projective"
    CONCIRCULAR = "concircular"
    CONFORMAL = "conformal"
    CONHARMONIC = "conharmonic"


class SemisymDirection(str, enum.Enum):
    TS = "ts"  # (xi, .)_T . S = 0
    ST = "st"  # (xi, .)_S . T = 0


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of the modified curvature tensors for a given scalar curvature."""

    a: float
    b: float
    c: float
    d: float
    dim: int = DIM

    @classmethod
    def for_scal(cls, scal: float, dim: int = DIM) -> CoefficientSet:
        if dim < 3:
            raise CurvatureError("curvature coefficients need dim >= 3")
        d = 1.0 / (dim - 2)
        c = -d * scal / (dim - 1)
        if dim == 4:
            # the dimension-4 specialisation c = -scal/6 must agree with the general form
            assert math.isclose(c, -scal / 6, rel_tol=1e-14, abs_tol=1e-14)
        return cls(a=1.0 / (dim - 1), b=scal / (dim * (dim - 1)), c=c, d=d, dim=dim)


def _sym_terms(g: np.ndarray, M: np.ndarray) -> np.ndarray:
    """``g(Z,X) M Y - g(Y,Z) M X`` with ``M`` an ``[l, m]`` endomorphism, laid out ``[l, i, j, k]``."""
    return np.einsum("ki,lj->lijk", g, M) - np.einsum("jk,li->lijk", g, M)


def _ricci_terms(S: np.ndarray) -> np.ndarray:
    """``S(Z,X) Y - S(Y,Z) X``."""
    eye = np.eye(S.shape[0])
    return np.einsum("ki,lj->lijk", S, eye) - np.einsum("jk,li->lijk", S, eye)


def curvature_tensor(
    kind: CurvatureKind | str,
    metric_at: MetricAtPoint,
    riemann: Tensor,
    ricci: Tensor,
    scal: float | None = None,
    dim: int = DIM,
) -> Tensor:
    """Build one of the five curvature tensors from ``R``, ``S`` (``Q = S^sharp``) and ``scal``."""
    kind = CurvatureKind(kind)
    if kind is CurvatureKind.RIEMANN:
        return riemann
    g, g_inv = metric_at.g, metric_at.g_inv
    S = ricci.data
    if scal is None:
        scal = float(np.einsum("ij,ij->", g_inv, S))
    coef = CoefficientSet.for_scal(scal, dim)
    Q = g_inv @ S  # Q[l, m] = g^{la} S_{am}
    eye = np.eye(g.shape[0])
    R = riemann.data
    if kind is CurvatureKind.PROJECTIVE:
        data = R + coef.a * _sym_terms(g, Q)
    elif kind is CurvatureKind.CONCIRCULAR:
        data = R + coef.b * _sym_terms(g, eye)
    elif kind is CurvatureKind.CONHARMONIC:
        data = R + coef.d * (_sym_terms(g, Q) + _ricci_terms(S))
    else:
        data = R + coef.c * _sym_terms(g, eye) + coef.d * (_sym_terms(g, Q) + _ricci_terms(S))
    return Tensor(data, "uddd")


def quasi_einstein_ricci(metric_at: MetricAtPoint, xi, A: float, B: float) -> Tensor:
    eta = metric_at.lower(xi)
    return Tensor(A * metric_at.g + B * np.outer(eta, eta), "dd")


def _setup(kind, metric_at, riemann, xi, A, B):
    xi = np.asarray(xi, dtype=float)
    if abs(metric_at.inner(xi, xi) + 1.0) > 1e-9:
        raise CurvatureError("xi must be unit timelike")
    S = quasi_einstein_ricci(metric_at, xi, A, B)
    T = curvature_tensor(kind, metric_at, riemann, S)
    frame = build_frame(metric_at, xi)
    return xi, metric_at.lower(xi), S.data, T.data, frame


def semisym_ts_tensor(kind, metric_at: MetricAtPoint, riemann: Tensor, xi, A: float, B: float) -> Tensor:
    """``S(T(xi,X)Y, Z) + S(Y, T(xi,X)Z)`` as a ``"ddd"`` tensor in ``(X, Y, Z)``."""
    xi, eta, S, T, _ = _setup(kind, metric_at, riemann, xi, A, B)
    txi = np.einsum("lmik,m->lik", T, xi)  # T(xi, E_i) E_k
    data = np.einsum("lik,lz->ikz", txi, S) + np.einsum("yl,liz->iyz", S, txi)
    return Tensor(data, "ddd")


def semisym_ts_residual(kind, metric_at: MetricAtPoint, riemann: Tensor, xi, A: float, B: float, xi_slice: bool = False) -> float:
    """Max over orthonormal frame triples; ``xi_slice`` restricts to ``Z = xi``."""
    xi = np.asarray(xi, dtype=float)
    t = semisym_ts_tensor(kind, metric_at, riemann, xi, A, B)
    frame = build_frame(metric_at, xi)
    if xi_slice:
        t = Tensor(t.data @ xi, "dd")
    return float(np.max(np.abs(frame_components(t, frame))))


def semisym_st_tensor(kind, metric_at: MetricAtPoint, riemann: Tensor, xi, A: float, B: float) -> Tensor:
    """Inner product with ``xi`` of ``(xi, X)_S . T`` applied to ``(Y, Z) W``, as ``"dddd"`` in ``(X,Y,Z,W)``."""
    xi, eta, S, T, _ = _setup(kind, metric_at, riemann, xi, A, B)
    eT = np.einsum("l,lyzw->yzw", eta, T)  # eta(T(Y,Z)W)
    s_xi = S @ xi  # S(xi, .)
    data = (
        -np.einsum("xl,lyzw->xyzw", S, T)
        - np.einsum("l,lyzw,x->xyzw", s_xi, T, eta)
        + np.einsum("xy,zw->xyzw", S, np.einsum("m,mzw->zw", xi, eT))
        - np.einsum("y,xzw->xyzw", s_xi, eT)
        + np.einsum("xz,yw->xyzw", S, np.einsum("m,ymw->yw", xi, eT))
        - np.einsum("z,yxw->xyzw", s_xi, eT)
        + np.einsum("xw,yz->xyzw", S, np.einsum("m,yzm->yz", xi, eT))
        - np.einsum("w,yzx->xyzw", s_xi, eT)
    )
    return Tensor(data, "dddd")


def semisym_st_residual(kind, metric_at: MetricAtPoint, riemann: Tensor, xi, A: float, B: float, xi_slice: bool = True) -> float:
    """Max over frame pairs ``(X, Y)`` of the ``Z = W = xi`` slice.

    With ``xi_slice=False`` the max runs over all frame quadruples; that full
    residual does not vanish at the forced pressures (the condition is only
    necessary), so the slice is the default.
    """
    xi = np.asarray(xi, dtype=float)
    t = semisym_st_tensor(kind, metric_at, riemann, xi, A, B)
    frame = build_frame(metric_at, xi)
    if xi_slice:
        t = Tensor(np.einsum("xyzw,z,w->xy", t.data, xi, xi), "dd")
    return float(np.max(np.abs(frame_components(t, frame))))


def projector_norm(metric_at: MetricAtPoint, xi, frame: OrthonormalFrame | None = None) -> float:
    """``max |g(X,Y) + eta(X) eta(Y)|`` over frame pairs (equals 1 for any orthonormal frame)."""
    xi = np.asarray(xi, dtype=float)
    frame = frame or build_frame(metric_at, xi)
    eta = metric_at.lower(xi)
    return float(np.max(np.abs(frame_components(Tensor(metric_at.g + np.outer(eta, eta), "dd"), frame))))


# -- reduced factors and theorem pressures ----------------------------------------------

def factor_from_ab(kind, direction, A: float, B: float, dim: int = DIM) -> float:
    """Scalar whose product with ``g + eta (x) eta`` is the ``xi``-slice of the semisymmetry residual.

    Exact on a torse-forming background (``nabla xi = I + eta (x) xi``) with
    ``S = A g + B eta (x) eta``; ``scal = dim A - B``.
    """
    kind, direction = CurvatureKind(kind), SemisymDirection(direction)
    coef = CoefficientSet.for_scal(dim * A - B, dim)
    if direction is SemisymDirection.TS:
        if kind is CurvatureKind.RIEMANN:
            return B
        if kind is CurvatureKind.PROJECTIVE:
            return B * (1 + coef.a * (B - 2 * A))
        if kind is CurvatureKind.CONCIRCULAR:
            return B * (1 - coef.b)
        if kind is CurvatureKind.CONHARMONIC:
            return B * (1 + coef.d * (B - 2 * A))
        return B * (1 + coef.d * (B - 2 * A) - coef.c)
    u = 2 * A - B
    if kind is CurvatureKind.RIEMANN:
        return u
    if kind is CurvatureKind.PROJECTIVE:
        return u + coef.a * (2 * A * B - 2 * A * A - B * B)
    if kind is CurvatureKind.CONCIRCULAR:
        return u * (1 - coef.b)
    if kind is CurvatureKind.CONHARMONIC:
        return u * (1 - coef.d * u)
    return u * (1 - coef.c - coef.d * u)


def _check_k(k: float) -> None:
    if k == 0 or not math.isfinite(k):
        raise CurvatureError("gravitational constant k must be finite and nonzero")


def factor_value(kind, direction, lam: float, k: float, sigma: float, p: float) -> float:
    """The reduced factor as a function of the fluid parameters."""
    _check_k(k)
    A = lam + k * (sigma - p) / 2
    B = k * (sigma + p)
    return factor_from_ab(kind, direction, A, B)


def predicted_pressures(kind, direction, lam: float, k: float, sigma: float = 0.0) -> list[float]:
    """Closed-form pressures forced by the semisymmetry condition, sorted descending.

    The torse-forming normalisation ``nabla xi = I + eta (x) xi`` is built into
    the constants (-3, -12, -6, -1, -6).
    """
    kind, direction = CurvatureKind(kind), SemisymDirection(direction)
    _check_k(k)
    if direction is SemisymDirection.TS:
        vacuum = -sigma
        other = {
            CurvatureKind.RIEMANN: None,
            CurvatureKind.PROJECTIVE: (2 * lam - 3) / (2 * k),
            CurvatureKind.CONCIRCULAR: (4 * lam + k * sigma - 12) / (3 * k),
            CurvatureKind.CONFORMAL: (2 * lam - k * sigma - 6) / (3 * k),
            CurvatureKind.CONHARMONIC: (lam - 1) / k,
        }[kind]
        roots = [vacuum] if other is None else [vacuum, other]
    elif kind is CurvatureKind.PROJECTIVE:
        u = lam + k * sigma
        # discriminant 3(u^2 - 3u + 3) = 3((u - 3/2)^2 + 3/4) > 0, so both roots are real
        root = 2 * math.sqrt(3 * (u * u - 3 * u + 3))
        roots = [(lam - 6 + 3 * u + root) / k, (lam - 6 + 3 * u - root) / k]
    else:
        other = {
            CurvatureKind.RIEMANN: None,
            CurvatureKind.CONCIRCULAR: (4 * lam + k * sigma - 12) / (3 * k),
            CurvatureKind.CONFORMAL: (2 * lam - k * sigma - 6) / (3 * k),
            CurvatureKind.CONHARMONIC: (lam - 1) / k,
        }[kind]
        roots = [lam / k] if other is None else [lam / k, other]
    return sorted(roots, reverse=True)


def projective_st_factor_roots(lam: float, k: float, sigma: float) -> list[float]:
    """Real roots in ``p`` of the projective ST factor itself (a quadratic), sorted descending.

    ``5k^2 p^2 + 2k(k sigma - 4 lambda + 6) p + (k sigma)^2 + 4 lambda^2 - 12 lambda = 0``;
    these differ from the closed form in :func:`predicted_pressures`.
    """
    _check_k(k)
    qa = 5 * k * k
    qb = 2 * k * (k * sigma - 4 * lam + 6)
    qc = (k * sigma) ** 2 + 4 * lam * lam - 12 * lam
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        return []
    r = math.sqrt(disc)
    return sorted({(-qb + r) / (2 * qa), (-qb - r) / (2 * qa)}, reverse=True)
