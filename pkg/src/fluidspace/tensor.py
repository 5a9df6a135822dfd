"""Pointwise tensor algebra on a 4-dimensional Lorentzian tangent space.

Index convention (used everywhere in the package):

* Components are dense numpy arrays of shape ``(4,) * rank``.
* ``variance`` is a string with one character per slot, ``"u"`` for an
  upper (contravariant) index and ``"d"`` for a lower (covariant) one.
* Slot 0 is the leftmost index as written.  The curvature (1,3)-tensor is
  stored as ``R[l, i, j, k] = R^l_{ijk}`` with ``R(E_i, E_j) E_k = R^l_{ijk} E_l``,
  variance ``"uddd"``.  Endomorphisms such as ``X -> nabla_X xi`` are
  stored ``M[l, i]`` (output index first), variance ``"ud"``.
* Signature is (-,+,+,+) with the timelike leg first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIM = 4
SIGNS = np.array([-1.0, 1.0, 1.0, 1.0])


class TensorError(ValueError):
    pass


@dataclass(frozen=True)
class Tensor:
    """Dense components of a tensor at a point."""

    data: np.ndarray
    variance: str

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if set(self.variance) - {"u", "d"}:
            raise TensorError(f"variance must use 'u'/'d', got {self.variance!r}")
        if data.shape != (DIM,) * len(self.variance):
            raise TensorError(f"shape {data.shape} does not match variance {self.variance!r}")
        if not np.all(np.isfinite(data)):
            raise TensorError("tensor components must be finite")

    @property
    def rank(self) -> int:
        return len(self.variance)

    def __add__(self, other: Tensor) -> Tensor:
        self._check_compatible(other)
        return Tensor(self.data + other.data, self.variance)

    def __sub__(self, other: Tensor) -> Tensor:
        self._check_compatible(other)
        return Tensor(self.data - other.data, self.variance)

    def __mul__(self, scalar: float) -> Tensor:
        return Tensor(self.data * float(scalar), self.variance)

    __rmul__ = __mul__

    def _check_compatible(self, other: Tensor) -> None:
        if self.variance != other.variance:
            raise TensorError(f"variance mismatch {self.variance!r} vs {other.variance!r}")


@dataclass(frozen=True)
class MetricAtPoint:
    """Lorentzian metric components ``g_ij`` and inverse ``g^ij`` at one point."""

    g: np.ndarray
    g_inv: np.ndarray

    @classmethod
    def from_matrix(cls, g, tol: float = 1e-9) -> MetricAtPoint:
        g = np.asarray(g, dtype=float)
        if g.shape != (DIM, DIM):
            raise TensorError(f"metric must be 4x4, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise TensorError("metric components must be finite")
        if np.max(np.abs(g - g.T)) > tol * max(1.0, np.max(np.abs(g))):
            raise TensorError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        eig = np.linalg.eigvalsh(g)
        scale = max(1.0, np.max(np.abs(eig)))
        if np.min(np.abs(eig)) <= 1e-12 * scale:
            raise TensorError("metric is degenerate")
        signs = tuple(int(s) for s in np.sign(eig))
        if signs != (-1, 1, 1, 1):
            raise TensorError(f"metric signature must be (-,+,+,+); eigenvalues {eig.tolist()}")
        return cls(g, np.linalg.inv(g))

    def inner(self, u, v) -> float:
        return float(np.asarray(u) @ self.g @ np.asarray(v))

    def lower(self, v) -> np.ndarray:
        return self.g @ np.asarray(v, dtype=float)

    def raise_(self, w) -> np.ndarray:
        return self.g_inv @ np.asarray(w, dtype=float)

    def as_tensor(self) -> Tensor:
        return Tensor(self.g, "dd")


@dataclass(frozen=True)
class OrthonormalFrame:
    """Frame vectors ``vectors[a]`` (coordinate components), ``g(E_a, E_b) = signs[a] delta_ab``."""

    vectors: np.ndarray
    signs: np.ndarray

    @property
    def coframe(self) -> np.ndarray:
        """Dual one-forms ``theta^a`` with ``theta^a(E_b) = delta^a_b``, row per form."""
        return np.linalg.inv(self.vectors).T

    def residual(self, metric: MetricAtPoint) -> float:
        gram = self.vectors @ metric.g @ self.vectors.T
        return float(np.max(np.abs(gram - np.diag(self.signs))))


def _move_slot(data: np.ndarray, matrix: np.ndarray, slot: int) -> np.ndarray:
    # contracts matrix[new, old] into the given axis, keeping axis order
    out = np.tensordot(matrix, data, axes=([1], [slot]))
    return np.moveaxis(out, 0, slot)


def contract(t: Tensor, slot_a: int, slot_b: int, metric: MetricAtPoint | None = None) -> Tensor | float:
    """Trace over two slots.  Equal-variance slots are paired through the metric.

    Returns a float for a full contraction of a rank-2 tensor.
    """
    if slot_a == slot_b:
        raise TensorError("contraction slots must differ")
    for s in (slot_a, slot_b):
        if not 0 <= s < t.rank:
            raise TensorError(f"slot {s} out of range for rank {t.rank}")
    va, vb = t.variance[slot_a], t.variance[slot_b]
    data = t.data
    if va == vb:
        if metric is None:
            raise TensorError("contracting two equal-variance slots needs a metric")
        pairing = metric.g_inv if va == "d" else metric.g
        data = _move_slot(data, pairing.T, slot_a)
    out = np.trace(data, axis1=slot_a, axis2=slot_b)
    variance = "".join(v for i, v in enumerate(t.variance) if i not in (slot_a, slot_b))
    if not variance:
        return float(out)
    return Tensor(out, variance)


def raise_lower(t: Tensor, slot: int, metric: MetricAtPoint) -> Tensor:
    """Flip the variance of one slot using ``g`` or ``g^-1``."""
    if not 0 <= slot < t.rank:
        raise TensorError(f"slot {slot} out of range for rank {t.rank}")
    if t.variance[slot] == "d":
        data, new = _move_slot(t.data, metric.g_inv, slot), "u"
    else:
        data, new = _move_slot(t.data, metric.g, slot), "d"
    return Tensor(data, t.variance[:slot] + new + t.variance[slot + 1:])


def build_frame(metric: MetricAtPoint, timelike, tol: float = 1e-12) -> OrthonormalFrame:
    """Signed Gram-Schmidt frame whose first leg is the normalised ``timelike`` vector."""
    v = np.asarray(timelike, dtype=float)
    norm = metric.inner(v, v)
    scale = max(1.0, float(np.max(np.abs(metric.g))) * float(v @ v))
    if not norm < -tol * scale:
        raise TensorError(f"vector is not timelike: g(v,v) = {norm:.3e}")
    vectors = [v / np.sqrt(-norm)]
    candidates = list(np.eye(DIM))
    while len(vectors) < DIM:
        best, best_norm = None, -1.0
        for c in candidates:
            w = _orthogonalize(c, vectors, metric)
            n = metric.inner(w, w)
            if n > best_norm:
                best, best_norm = w, n
        if best is None or best_norm <= tol:
            raise TensorError("cannot complete frame: metric is degenerate")
        w = _orthogonalize(best, vectors, metric)  # second pass for accuracy
        vectors.append(w / np.sqrt(metric.inner(w, w)))
    return OrthonormalFrame(np.array(vectors), SIGNS.copy())


def _orthogonalize(c: np.ndarray, basis: list[np.ndarray], metric: MetricAtPoint) -> np.ndarray:
    w = np.array(c, dtype=float)
    for a, e in enumerate(basis):
        w = w - SIGNS[a] * metric.inner(w, e) * e
    return w


def frame_components(t: Tensor, frame: OrthonormalFrame) -> np.ndarray:
    """Components of ``t`` in an orthonormal frame (lower slots take ``E_a``, upper take ``theta^a``)."""
    data = t.data
    coframe = frame.coframe
    for slot, v in enumerate(t.variance):
        data = _move_slot(data, frame.vectors if v == "d" else coframe, slot)
    return data


def frame_norm(t: Tensor, frame: OrthonormalFrame) -> float:
    """Max-norm of frame components; the residual measure used throughout."""
    return float(np.max(np.abs(frame_components(t, frame)))) if t.rank else abs(float(t.data))


def projection_tensor(v, metric: MetricAtPoint, tol: float = 1e-9) -> Tensor:
    """``h X = X + eta(X) xi`` for unit timelike ``xi = v``, as an ``"ud"`` tensor."""
    v = np.asarray(v, dtype=float)
    norm = metric.inner(v, v)
    if abs(norm + 1.0) > tol:
        raise TensorError(f"projection needs g(v,v) = -1, got {norm:.12g}")
    eta = metric.lower(v)
    return Tensor(np.eye(DIM) + np.outer(v, eta), "ud")
