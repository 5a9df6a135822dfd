import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _roots import bracketed_roots

from fluidspace.curvature import (
    CoefficientSet,
    CurvatureError,
    CurvatureKind,
    SemisymDirection,
    curvature_tensor,
    factor_from_ab,
    factor_value,
    predicted_pressures,
    projective_st_factor_roots,
    projector_norm,
    semisym_st_residual,
    semisym_ts_residual,
)
from fluidspace.geometry import MetricField, PointGeometry
from fluidspace.tensor import Tensor

KINDS = list(CurvatureKind)
DIRS = list(SemisymDirection)
COMBOS = list(itertools.product(KINDS, DIRS))
RELIABLE = [c for c in COMBOS if c != (CurvatureKind.PROJECTIVE, SemisymDirection.ST)]


@pytest.fixture(scope="module")
def ds_point(desitter):
    geo = PointGeometry(desitter.metric, [0.3, 0.1, 0.2, 0.3])
    return geo, desitter.xi.at(geo.point)


@pytest.fixture(scope="module")
def generic_geo():
    rows = [["-(1 + x^2/4)", "0.1*t*y", "0", "0.2*sin(z)"], [None, "exp(t)", "0.1*x*z", "0"],
            [None, None, "1 + y^2", "0.05*t"], [None, None, None, "cosh(t)"]]
    return PointGeometry(MetricField.from_rows(("t", "x", "y", "z"), rows), [0.3, 0.4, -0.2, 0.5])


def _tensor(kind, geo):
    return curvature_tensor(kind, geo.metric_at, Tensor(geo.riemann, "uddd"), Tensor(geo.ricci, "dd")).data


def test_coefficients_in_dimension_four():
    c = CoefficientSet.for_scal(12.0)
    assert (c.a, c.b, c.c, c.d) == (pytest.approx(1 / 3), pytest.approx(1.0), pytest.approx(-2.0), pytest.approx(0.5))


def test_riemann_kind_returns_riemann_unchanged(generic_geo):
    R = Tensor(generic_geo.riemann, "uddd")
    assert curvature_tensor("riemann", generic_geo.metric_at, R, Tensor(generic_geo.ricci, "dd")) is R


def test_conformal_tensor_is_trace_free(generic_geo):
    C = _tensor("conformal", generic_geo)
    assert np.max(np.abs(np.einsum("iijk->jk", C))) < 1e-12


@pytest.mark.parametrize("kind", ["projective", "concircular", "conformal"])
def test_vanish_on_constant_curvature(kind, ds_point):
    geo, _ = ds_point
    assert np.max(np.abs(_tensor(kind, geo))) < 1e-12


def test_all_kinds_keep_antisymmetry(generic_geo):
    for kind in KINDS:
        T = _tensor(kind, generic_geo)
        assert np.max(np.abs(T + T.transpose(0, 2, 1, 3))) < 1e-12


def _random_ab(rng, n):
    return rng.uniform(-3, 3, size=(n, 2))


@pytest.mark.parametrize("kind, direction", COMBOS)
def test_xi_slice_equals_factor(kind, direction, ds_point, rng):
    geo, xi = ds_point
    R = Tensor(geo.riemann, "uddd")
    norm = projector_norm(geo.metric_at, xi)
    assert norm == pytest.approx(1.0)
    fn = semisym_ts_residual if direction is SemisymDirection.TS else semisym_st_residual
    for A, B in _random_ab(rng, 10):
        res = fn(kind, geo.metric_at, R, xi, A, B, xi_slice=True)
        assert res == pytest.approx(abs(factor_from_ab(kind, direction, A, B)) * norm, abs=1e-9)


@pytest.mark.parametrize("kind", KINDS)
def test_full_ts_residual_equals_slice_on_torse_background(kind, ds_point, rng):
    geo, xi = ds_point
    R = Tensor(geo.riemann, "uddd")
    for A, B in _random_ab(rng, 5):
        full = semisym_ts_residual(kind, geo.metric_at, R, xi, A, B)
        assert full == pytest.approx(semisym_ts_residual(kind, geo.metric_at, R, xi, A, B, xi_slice=True), abs=1e-9)


def test_full_st_residual_survives_at_the_forced_pressure(ds_point):
    """The ST condition only pins the xi-slice; the remaining components need not vanish."""
    geo, xi = ds_point
    R = Tensor(geo.riemann, "uddd")
    lam, k, sigma = 3.0, 1.0, 3.0
    p = predicted_pressures("riemann", "st", lam, k, sigma)[0]
    A, B = lam + k * (sigma - p) / 2, k * (sigma + p)
    assert semisym_st_residual("riemann", geo.metric_at, R, xi, A, B) < 1e-12
    assert semisym_st_residual("riemann", geo.metric_at, R, xi, A, B, xi_slice=False) > 1.0


@pytest.mark.parametrize(
    "kind, direction, lam, k, sigma, expected",
    [
        ("conharmonic", "st", 3, 1, 0, [3, 2]),
        ("projective", "st", 1, 1, 2, [10, -2]),
        ("riemann", "ts", 0, 1, 5, [-5]),
        ("riemann", "st", 3, 2, 0, [1.5]),
        ("projective", "ts", 3, 1, 1, [1.5, -1]),
        ("concircular", "ts", 3, 1, 0, [0, 0]),
        ("conformal", "ts", 3, 1, 0, [0, 0]),
    ],
)
def test_predicted_pressure_examples(kind, direction, lam, k, sigma, expected):
    assert predicted_pressures(kind, direction, lam, k, sigma) == pytest.approx(expected)


@pytest.mark.parametrize("kind, direction", RELIABLE)
def test_closed_forms_are_the_roots_of_the_factor(kind, direction):
    rng = np.random.default_rng(COMBOS.index((kind, direction)))
    for _ in range(25):
        lam, k, sigma = rng.uniform(-3, 3), rng.uniform(0.5, 2), rng.uniform(0, 3)
        predicted = predicted_pressures(kind, direction, lam, k, sigma)
        for p in predicted:
            assert factor_value(kind, direction, lam, k, sigma, p) == pytest.approx(0.0, abs=1e-9)
        found = bracketed_roots(lambda p: factor_value(kind, direction, lam, k, sigma, p), -60, 60)
        assert found == pytest.approx(predicted, abs=1e-9)


@given(st.floats(-5, 5), st.floats(0.5, 2), st.floats(-5, 5))
def test_projective_st_closed_form_always_real_and_distinct(lam, k, sigma):
    a, b = predicted_pressures("projective", "st", lam, k, sigma)
    assert np.isfinite(a) and np.isfinite(b) and a > b


@given(st.floats(-5, 5), st.floats(0.5, 2), st.floats(-5, 5))
def test_projective_st_factor_roots_are_roots(lam, k, sigma):
    for p in projective_st_factor_roots(lam, k, sigma):
        assert factor_value("projective", "st", lam, k, sigma, p) == pytest.approx(0.0, abs=1e-8)


def test_projective_st_closed_form_is_not_a_root_of_the_factor():
    """Recorded discrepancy: at lambda=1, k=1, sigma=2 the closed form gives {10, -2} but the factor's roots are {-2, 0.4}."""
    assert predicted_pressures("projective", "st", 1, 1, 2) == pytest.approx([10, -2])
    assert projective_st_factor_roots(1, 1, 2) == pytest.approx([0.4, -2])
    assert factor_value("projective", "st", 1, 1, 2, 10) == pytest.approx(-96.0)


def test_projective_st_factor_can_have_no_real_root():
    # discriminant -16 k^2 (u^2 - 3u - 9) < 0 at u = lambda + k sigma = 6
    assert projective_st_factor_roots(3, 1, 3) == []


def test_k_zero_is_rejected():
    with pytest.raises(CurvatureError):
        predicted_pressures("riemann", "ts", 1, 0, 1)
    with pytest.raises(CurvatureError):
        factor_value("riemann", "ts", 1, 0, 1, 1)


def test_unit_xi_required(ds_point):
    geo, xi = ds_point
    with pytest.raises(CurvatureError, match="unit"):
        semisym_ts_residual("riemann", geo.metric_at, Tensor(geo.riemann, "uddd"), 2 * xi, 1.0, 1.0)
