import numpy as np
import pytest
import sympy as sp

from fluidspace.expr import evaluate, parse
from fluidspace.geometry import (
    GeometryError,
    MetricField,
    PointGeometry,
    VectorField,
    christoffel,
    covariant_derivative,
    d_eta,
    divergence,
    divergence_frame,
    laplacian,
    laplacian_frame,
    lie_derivative_metric,
    lie_derivative_metric_connection,
    metric_jet,
    nabla_vector,
    ricci,
    ricci_jet,
    riemann,
    scalar_curvature,
    scalar_curvature_frame,
    torse_forming_residual,
)
from fluidspace.tensor import frame_norm

COORDS = ("t", "x", "y", "z")

# a non-diagonal, non-symmetric-space metric used as a generic test case
GENERIC_ROWS = [
    ["-(1 + x^2/4)", "0.1*t*y", "0", "0.2*sin(z)"],
    [None, "exp(t)", "0.1*x*z", "0"],
    [None, None, "1 + y^2", "0.05*t"],
    [None, None, None, "cosh(t)"],
]
GENERIC_POINT = np.array([0.3, 0.4, -0.2, 0.5])


@pytest.fixture(scope="module")
def generic():
    return MetricField.from_rows(COORDS, GENERIC_ROWS)


def _metric_values(field, point):
    return np.array([[evaluate(field.components[i][j], COORDS, point) for j in range(4)] for i in range(4)])


def fd_christoffel(field, point, h=1e-5):
    """Oracle: central differences of metric values only."""
    g = _metric_values(field, point)
    dg = np.empty((4, 4, 4))
    for n in range(4):
        up, down = point.copy(), point.copy()
        up[n] += h
        down[n] -= h
        dg[n] = (_metric_values(field, up) - _metric_values(field, down)) / (2 * h)
    low = 0.5 * (np.einsum("ijk->kij", dg) + np.einsum("jik->kij", dg) - dg)  # [k, i, j] = Gamma_{k i j}
    return np.einsum("lk,kij->lij", np.linalg.inv(g), low)


@pytest.fixture(scope="module")
def sympy_oracle():
    """Riemann, Ricci and scal of the generic metric at the test point.

    sympy differentiates the metric components; the curvature is assembled
    numerically from those values with explicit loops.
    """
    syms = sp.symbols(COORDS)
    names = dict(zip(COORDS, syms))
    subs = dict(zip(syms, GENERIC_POINT.tolist()))
    comp = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(i, 4):
            comp[i][j] = comp[j][i] = sp.sympify(GENERIC_ROWS[i][j].replace("^", "**"), locals=names)

    def num(e):
        return float(e.evalf(subs=subs))

    r4 = range(4)
    g = np.array([[num(comp[i][j]) for j in r4] for i in r4])
    dg = np.array([[[num(sp.diff(comp[i][j], syms[a])) for j in r4] for i in r4] for a in r4])
    ddg = np.array([[[[num(sp.diff(comp[i][j], syms[a], syms[b])) for j in r4] for i in r4] for b in r4] for a in r4])
    ginv = np.linalg.inv(g)
    # first-kind symbols Gamma_{kij} and their partials
    low = np.array([[[0.5 * (dg[i, k, j] + dg[j, k, i] - dg[k, i, j]) for j in r4] for i in r4] for k in r4])
    dlow = np.array([[[[0.5 * (ddg[a, i, k, j] + ddg[a, j, k, i] - ddg[a, k, i, j]) for j in r4] for i in r4]
                      for k in r4] for a in r4])
    dginv = np.array([-ginv @ dg[a] @ ginv for a in r4])
    gam = np.array([[[sum(ginv[l, k] * low[k, i, j] for k in r4) for j in r4] for i in r4] for l in r4])
    dgam = np.array([[[[sum(dginv[a, l, k] * low[k, i, j] + ginv[l, k] * dlow[a, k, i, j] for k in r4)
                        for j in r4] for i in r4] for l in r4] for a in r4])
    R = np.empty((4, 4, 4, 4))
    for l in r4:
        for i in r4:
            for j in r4:
                for k in r4:
                    R[l, i, j, k] = dgam[i, l, j, k] - dgam[j, l, i, k] + sum(
                        gam[l, i, m] * gam[m, j, k] - gam[l, j, m] * gam[m, i, k] for m in r4)
    S = np.array([[sum(R[i, i, j, k] for i in r4) for k in r4] for j in r4])
    return R, S, float(sum(ginv[i, j] * S[i, j] for i in r4 for j in r4))


def test_christoffel_matches_finite_differences(generic):
    exact = christoffel(generic, GENERIC_POINT)
    assert np.max(np.abs(exact - fd_christoffel(generic, GENERIC_POINT))) < 1e-6


def test_christoffel_matches_finite_differences_on_desitter(desitter, desitter_points):
    for pt in desitter_points[:5]:
        assert np.max(np.abs(christoffel(desitter.metric, pt) - fd_christoffel(desitter.metric, pt))) < 1e-6


def test_riemann_ricci_scal_match_sympy(generic, sympy_oracle):
    R, S, scal = sympy_oracle
    assert np.max(np.abs(riemann(generic, GENERIC_POINT).data - R)) < 1e-10
    assert np.max(np.abs(ricci(generic, GENERIC_POINT).data - S)) < 1e-10
    assert scalar_curvature(generic, GENERIC_POINT) == pytest.approx(scal, abs=1e-10)
    assert scalar_curvature_frame(generic, GENERIC_POINT) == pytest.approx(scal, abs=1e-10)


def test_curvature_derivatives_match_differences_of_exact_values(generic):
    geo = PointGeometry(generic, GENERIC_POINT)
    h = 1e-5
    for n in range(4):
        up, down = GENERIC_POINT.copy(), GENERIC_POINT.copy()
        up[n] += h
        down[n] -= h
        gu, gd = PointGeometry(generic, up), PointGeometry(generic, down)
        assert np.max(np.abs(geo.dchristoffel[n] - (gu.christoffel - gd.christoffel) / (2 * h))) < 1e-6
        assert np.max(np.abs(geo.driemann[n] - (gu.riemann - gd.riemann) / (2 * h))) < 1e-6
        assert geo.dscal[n] == pytest.approx((gu.scal - gd.scal) / (2 * h), abs=1e-6)


def test_metric_is_parallel(generic):
    nab = covariant_derivative(metric_jet, generic, GENERIC_POINT)
    assert np.max(np.abs(nab.data)) < 1e-12


def test_contracted_bianchi(generic):
    geo = PointGeometry(generic, GENERIC_POINT)
    value, dvalue = ricci_jet(geo)
    nab = geo.nabla(value, dvalue, "dd")
    div_s = np.einsum("mi,mij->j", geo.g_inv, nab)
    assert np.allclose(div_s, 0.5 * geo.dscal, atol=1e-10)


def test_desitter_curvature_is_constant(desitter, desitter_points):
    for pt in desitter_points:
        geo = PointGeometry(desitter.metric, pt)
        g = geo.g
        eye = np.eye(4)
        target = np.einsum("jk,li->lijk", g, eye) - np.einsum("ik,lj->lijk", g, eye)
        assert np.max(np.abs(geo.riemann - target)) < 1e-12
        assert np.max(np.abs(geo.ricci - 3 * g)) < 1e-12
        assert geo.scal == pytest.approx(12.0, abs=1e-12)


def test_desitter_christoffels_are_exact(desitter):
    pt = np.array([0.3, 0.2, -0.5, 0.7])
    gam = christoffel(desitter.metric, pt)
    assert gam[0, 1, 1] == pytest.approx(np.exp(0.6))
    assert gam[1, 0, 1] == pytest.approx(1.0)
    assert gam[0, 0, 0] == 0.0


def test_lie_derivative_forms_agree(generic):
    xi = VectorField.from_list(COORDS, ["1 + x*y", "sin(t)", "z", "0.3*x"])
    a = lie_derivative_metric(xi, generic, GENERIC_POINT).data
    b = lie_derivative_metric_connection(xi, generic, GENERIC_POINT).data
    assert np.allclose(a, b, atol=1e-12)


def test_divergence_three_ways(generic):
    xi = VectorField.from_list(COORDS, ["1 + x*y", "sin(t)", "z", "0.3*x"])
    coordinate = divergence(xi, generic, GENERIC_POINT)
    assert divergence_frame(xi, generic, GENERIC_POINT) == pytest.approx(coordinate, abs=1e-12)

    # oracle: (1/sqrt|g|) d_i (sqrt|g| xi^i) by central differences
    def density(p):
        return np.sqrt(abs(np.linalg.det(_metric_values(generic, p)))) * xi.at(p)

    h = 1e-5
    total = 0.0
    for i in range(4):
        up, down = GENERIC_POINT.copy(), GENERIC_POINT.copy()
        up[i] += h
        down[i] -= h
        total += (density(up)[i] - density(down)[i]) / (2 * h)
    total /= np.sqrt(abs(np.linalg.det(_metric_values(generic, GENERIC_POINT))))
    assert coordinate == pytest.approx(total, abs=1e-6)


def test_laplacian_coordinate_and_frame_agree(generic):
    f = parse("t*x + exp(y)*z", COORDS)
    assert laplacian(f, generic, GENERIC_POINT) == pytest.approx(laplacian_frame(f, generic, GENERIC_POINT), abs=1e-12)


def test_desitter_divergence_and_laplacian(desitter, desitter_points):
    f = parse("-t", COORDS)
    for pt in desitter_points:
        assert divergence(desitter.xi, desitter.metric, pt) == pytest.approx(3.0, abs=1e-12)
        assert laplacian(f, desitter.metric, pt) == pytest.approx(3.0, abs=1e-12)


def test_desitter_lie_derivative(desitter, desitter_points):
    for pt in desitter_points:
        geo = PointGeometry(desitter.metric, pt)
        eta = geo.g @ desitter.xi.at(pt)
        lie = lie_derivative_metric(desitter.xi, desitter.metric, geo).data
        assert np.allclose(lie, 2 * (geo.g + np.outer(eta, eta)), atol=1e-12)


def test_torse_forming_on_desitter(desitter, desitter_points):
    for pt in desitter_points:
        report = torse_forming_residual(desitter.xi, desitter.metric, pt)
        assert report.max < 1e-12
        assert frame_norm(d_eta(desitter.xi, desitter.metric, pt), PointGeometry(desitter.metric, pt).frame()) < 1e-12


def test_torse_forming_fails_on_minkowski():
    from fluidspace.catalog import builtin

    spec = builtin("minkowski")
    report = torse_forming_residual(spec.xi, spec.metric, [0.1, 0.2, 0.3, 0.4])
    assert report.nabla_xi == pytest.approx(1.0)
    assert report.geodesic == 0.0


def test_torse_residual_requires_unit_xi(desitter):
    xi = VectorField.from_list(COORDS, ["2", "0", "0", "0"])
    with pytest.raises(GeometryError, match=r"g\(xi,xi\)=-1"):
        torse_forming_residual(xi, desitter.metric, [0, 0, 0, 0])


def test_nabla_vector_layout(desitter):
    pt = [0.2, 0, 0, 0]
    m = nabla_vector(desitter.xi, desitter.metric, pt).data
    # nabla_X xi = X + eta(X) xi: identity on spatial legs, zero on xi
    assert np.allclose(m, np.diag([0.0, 1, 1, 1]))


def test_metric_field_errors():
    with pytest.raises(GeometryError, match="distinct"):
        MetricField.from_rows(("t", "t", "y", "z"), [[0] * 4] * 4)
    with pytest.raises(GeometryError, match="differs"):
        MetricField.from_rows(COORDS, [["-1", "1", "0", "0"], ["2", "1", "0", "0"], ["0", "0", "1", "0"], ["0", "0", "0", "1"]])
    with pytest.raises(GeometryError, match="signature"):
        MetricField.diagonal(COORDS, [1, 1, 1, 1]).at([0, 0, 0, 0])
    with pytest.raises(GeometryError):
        VectorField.from_list(COORDS, ["1", "0", "0"])
