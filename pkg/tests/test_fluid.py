import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fluidspace.catalog import builtin
from fluidspace.fluid import (
    FluidError,
    FluidModel,
    FluidParams,
    classify_nabla_s,
    classify_nabla_t,
    effective_ricci,
    energy_momentum,
    field_equation_residual,
    fit_quasi_einstein,
    plebanski_check,
    predicted_xi_eigenvalue,
    pseudo_ricci_pressure,
    recover_fluid,
    ricci_eigenvalue_of_xi,
)
from fluidspace.geometry import PointGeometry
from fluidspace.tensor import MetricAtPoint, Tensor

params_st = st.builds(
    FluidParams,
    lam=st.floats(-5, 5),
    k=st.floats(0.5, 2),
    sigma=st.floats(-5, 5),
    p=st.floats(-5, 5),
)


@given(params_st)
def test_recover_fluid_inverts_a_b(pr):
    sigma, p = recover_fluid(pr.A, pr.B, pr.lam, pr.k)
    assert sigma == pytest.approx(pr.sigma, abs=1e-12)
    assert p == pytest.approx(pr.p, abs=1e-12)


@given(params_st)
def test_xi_eigenvalue_is_a_minus_b(pr):
    # Q xi = (A - B) xi for S = A g + B eta (x) eta
    assert predicted_xi_eigenvalue(pr) == pytest.approx(pr.A - pr.B, abs=1e-12)


def test_energy_momentum_requires_unit_eta():
    mg = MetricAtPoint.from_matrix(np.diag([-1.0, 1, 1, 1]))
    with pytest.raises(FluidError, match=r"g\(xi,xi\)=-1"):
        energy_momentum(mg, [-2.0, 0, 0, 0], FluidParams(0, 1, 1, 0))


def test_params_validation():
    with pytest.raises(FluidError, match="positive"):
        FluidParams(0, 0, 1, 1)
    with pytest.raises(FluidError, match="finite"):
        FluidParams(float("nan"), 1, 1, 1)


@pytest.mark.parametrize("name", ["minkowski", "desitter-torse", "radiation-flrw", "einstein-static", "flrw"])
def test_builtins_solve_the_field_equations(name):
    spec = builtin(name)
    for pt in spec.sample_points(count=8):
        assert field_equation_residual(spec.metric, spec.xi, spec.fluid, pt) < 1e-9


def test_fit_recovers_desitter_fluid(desitter, desitter_points):
    geos = [PointGeometry(desitter.metric, p) for p in desitter_points]
    fit = fit_quasi_einstein(
        [Tensor(g.ricci, "dd") for g in geos],
        [g.metric_at for g in geos],
        [g.g @ desitter.xi.at(g.point) for g in geos],
    )
    assert fit.A == pytest.approx(3.0, abs=1e-12)
    assert fit.B == pytest.approx(0.0, abs=1e-12)
    assert fit.residual < 1e-12
    # B = 0 only pins sigma + p; lambda = 2, k = 1 then give sigma = 1, p = -1
    sigma, p = fit.recover_fluid(2.0, 1.0)
    assert (sigma, p) == (pytest.approx(1.0), pytest.approx(-1.0))


def test_fit_recovers_einstein_static_fluid():
    spec = builtin("einstein-static")
    pts = spec.sample_points(count=6)
    geos = [PointGeometry(spec.metric, p) for p in pts]
    fit = fit_quasi_einstein(
        [Tensor(g.ricci, "dd") for g in geos], [g.metric_at for g in geos], [g.g @ spec.xi.at(g.point) for g in geos]
    )
    assert (fit.A, fit.B) == (pytest.approx(2.0, abs=1e-12), pytest.approx(2.0, abs=1e-12))
    assert fit.recover_fluid(1.0, 1.0) == (pytest.approx(2.0), pytest.approx(0.0, abs=1e-12))


def test_fit_rejects_bad_input():
    with pytest.raises(FluidError):
        fit_quasi_einstein([], [], [])


def test_effective_ricci_trace_is_identity():
    mg = MetricAtPoint.from_matrix(np.diag([-1.0, 2, 3, 0.5]))
    eta = np.array([-1.0, 0, 0, 0])
    pr = FluidParams(1.3, 0.7, 2.1, -0.4)
    S = effective_ricci(mg, eta, pr).data
    assert np.einsum("ij,ij->", mg.g_inv, S) == pytest.approx(4 * 1.3 + 0.7 * (2.1 + 3 * 0.4), abs=1e-12)


def test_xi_eigenvalue_on_builtins():
    for name in ["desitter-torse", "einstein-static", "radiation-flrw"]:
        spec = builtin(name)
        for pt in spec.sample_points(count=4):
            mu, res = ricci_eigenvalue_of_xi(spec.metric, spec.xi, pt)
            assert res < 1e-10
            assert mu == pytest.approx(predicted_xi_eigenvalue(spec.params_at(pt)), abs=1e-10)


def test_plebanski():
    ok = plebanski_check(FluidParams(1, 1, 2, 0))
    assert ok.all_pass
    edge = plebanski_check(FluidParams(2, 1, 1, -1))  # de Sitter fluid sits on the bound sigma = lambda/2k
    assert edge.all_pass
    assert edge.density_lower_bound == pytest.approx(1.0)
    assert not plebanski_check(FluidParams(4, 1, 1, -1)).density_above_bound
    assert not plebanski_check(FluidParams(0, 1, 1, 2)).pressure_bounded
    assert not plebanski_check(FluidParams(0, 1, -1, 0)).energy_nonnegative


def test_classify_desitter(desitter, desitter_points):
    ns = classify_nabla_s(desitter.metric, desitter.xi, desitter.fluid, desitter_points[:5])
    assert ns.fired() == ["ricci_symmetric", "codazzi"]
    assert ns.ricci_symmetric.consequence["vacuum"] is True
    nt = classify_nabla_t(desitter.metric, desitter.xi, desitter.fluid, desitter_points[:5])
    assert nt.parallel.fires and nt.parallel.consequence["holds"]


def test_classify_minkowski_pseudo_flags_not_applicable():
    spec = builtin("minkowski")
    ns = classify_nabla_s(spec.metric, spec.xi, spec.fluid, spec.sample_points(count=3))
    for flag in (ns.alpha_recurrent, ns.weakly_pseudo_ricci_symmetric, ns.pseudo_ricci_symmetric):
        assert not flag.applicable and not flag.fires
    assert ns.as_dict()["pseudo_ricci_symmetric"]["residual"] is None


def test_classify_radiation_codazzi_and_scal_relation():
    spec = builtin("radiation-flrw")
    pts = spec.sample_points(count=4)
    ns = classify_nabla_s(spec.metric, spec.xi, spec.fluid, pts)
    assert not ns.ricci_symmetric.fires
    assert ns.codazzi.fires  # constant scalar curvature makes the Ricci tensor Codazzi here
    nt = classify_nabla_t(spec.metric, spec.xi, spec.fluid, pts)
    assert nt.scal_gradient < 1e-9
    assert nt.codazzi.fires and nt.codazzi.consequence["holds"]


def test_dust_flrw_is_not_ricci_symmetric():
    spec = builtin("flrw")
    ns = classify_nabla_s(spec.metric, spec.xi, spec.fluid, spec.sample_points(count=3))
    assert not ns.ricci_symmetric.fires
    assert ns.alpha_recurrent.applicable


def test_pseudo_pressure_formula():
    assert pseudo_ricci_pressure(3.0, 1.0, 3.0) == pytest.approx(1.0)


def test_fluid_model_expression_fields():
    spec = builtin("radiation-flrw")
    pr = spec.params_at([1.0, 0, 0, 0])
    assert pr.sigma == pytest.approx(3 * pr.p)
    assert not spec.fluid.is_constant
    assert FluidModel.constant(1, 1, 0, 0).is_constant


@pytest.mark.parametrize("weights", [(1, 0, 0), (1, 1, 1), (2, 1, 1)])
def test_alpha_fit_recovers_synthetic_recurrence(weights, rng):
    from fluidspace.fluid import _fit_alpha, _recurrence_design

    S = rng.standard_normal((4, 4))
    S = S + S.T
    alpha = rng.standard_normal(4)
    nabla = (_recurrence_design(S, weights) @ alpha).reshape(4, 4, 4)
    fitted, residual = _fit_alpha(nabla, S, weights)
    assert residual < 1e-12
    assert np.allclose(fitted, alpha)
    # a generic tensor is not of this form
    _, residual = _fit_alpha(rng.standard_normal((4, 4, 4)), S, weights)
    assert residual > 1e-3
