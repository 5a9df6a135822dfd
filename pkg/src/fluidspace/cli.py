"""Command-line front end.  Every command prints one JSON report on stdout.

Exit codes: 0 pass, 1 verification failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .catalog import DEFAULT_SEED, CatalogError, SpacetimeSpec, load_spec, spec_to_dict
from .curvature import (
    CurvatureError,
    CurvatureKind,
    SemisymDirection,
    factor_from_ab,
    factor_value,
    predicted_pressures,
    projective_st_factor_roots,
    projector_norm,
    semisym_st_residual,
    semisym_ts_residual,
)
from .expr import ExpressionError
from .fluid import (
    FluidError,
    classify_nabla_s,
    classify_nabla_t,
    field_equation_residual,
    fit_quasi_einstein,
    plebanski_check,
    predicted_xi_eigenvalue,
    ricci_eigenvalue_of_xi,
)
from .geometry import GeometryError, PointGeometry, torse_forming_residual
from .soliton import (
    SolitonError,
    SolitonKind,
    classify_ricci_soliton,
    laplacian_equation_check,
    solve_on_samples,
    trace_audit,
)
from .tensor import Tensor, frame_norm

SCHEMA = "1"
TOL_GEOMETRY = 1e-9
TOL_CLASSIFY = 1e-7
TOL_SOLITON = 1e-8
AUDIT_TOL = 1e-12
REDUCTION_TOL = 1e-7  # slice residual vs |factor| * projector norm
SUITES = ("curvature", "torse", "semisym", "soliton")


class UsageError(Exception):
    pass


# -- report plumbing ----------------------------------------------------------------------

def _camel(key: str) -> str:
    head, *rest = key.split("_")
    return head + "".join(w[:1].upper() + w[1:] for w in rest)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {_camel(str(k)): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Report:
    def __init__(self, command: str, inputs: dict, seed: int):
        self.command = command
        self.inputs = inputs
        self.seed = seed
        self.results: dict = {}
        self.residuals: dict[str, float] = {}
        self.tolerances: dict[str, float] = {}

    def check(self, name: str, value: float, tol: float) -> bool:
        value = float(value)
        self.residuals[name] = value
        self.tolerances[name] = tol
        return value < tol

    def fail(self, name: str) -> None:
        """Record a check that could not run; it always fails."""
        self.residuals[name] = float("inf")
        self.tolerances[name] = 0.0

    @property
    def passed(self) -> bool:
        return all(v < self.tolerances[k] for k, v in self.residuals.items())

    def to_dict(self) -> dict:
        residuals = {k: (v if np.isfinite(v) else None) for k, v in self.residuals.items()}
        return {
            "schema": SCHEMA,
            "command": self.command,
            "inputs": _jsonable(self.inputs),
            "results": _jsonable(self.results),
            "residuals": residuals,
            "tolerances": dict(self.tolerances),
            "pass": self.passed,
            "seed": self.seed,
            "toolVersion": __version__,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False)


def resolve_seed(cli_seed: int | None, spec: SpacetimeSpec | None, env=None) -> int:
    """``--seed`` beats a seed pinned in the spec file, which beats ``FLUIDSPACE_SEED``."""
    if cli_seed is not None:
        return cli_seed
    if spec is not None and spec.seed is not None:
        return spec.seed
    env = os.environ if env is None else env
    raw = env.get("FLUIDSPACE_SEED")
    if raw is not None:
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"FLUIDSPACE_SEED must be an integer, got {raw!r}") from None
    return DEFAULT_SEED


def _spec_inputs(spec: SpacetimeSpec, args, seed: int, points) -> dict:
    return {
        "spec": args.spec,
        "name": spec.name,
        "samples": len(points),
        "seed": seed,
        "fluid": spec_to_dict(spec)["fluid"],
    }


def _load(args) -> tuple[SpacetimeSpec, int, np.ndarray]:
    spec = load_spec(args.spec)
    seed = resolve_seed(args.seed, spec)
    points = spec.sample_points(seed=seed, count=args.samples)
    return spec, seed, points


def _tols(args) -> dict:
    return {"geometry": args.tol_geometry, "classify": args.tol_classify, "soliton": args.tol_soliton}


# -- analyze ------------------------------------------------------------------------------

def cmd_analyze(args) -> Report:
    spec, seed, points = _load(args)
    rep = Report("analyze", {**_spec_inputs(spec, args, seed, points), "tolerances": _tols(args)}, seed)
    geos = [PointGeometry(spec.metric, pt) for pt in points]
    params = [spec.params_at(g.point) for g in geos]
    xis = [spec.xi.at(g.point) for g in geos]

    scal = np.array([g.scal for g in geos])
    rep.results["scal"] = {"min": scal.min(), "max": scal.max(), "mean": scal.mean()}
    rep.check("traceIdentity", max(abs(g.scal - pr.scal) for g, pr in zip(geos, params)), args.tol_geometry)
    rep.check("fieldEquation", max(field_equation_residual(spec.metric, spec.xi, spec.fluid, g) for g in geos), args.tol_geometry)

    ricci = [Tensor(g.ricci, "dd") for g in geos]
    metrics = [g.metric_at for g in geos]
    etas = [m.lower(v) for m, v in zip(metrics, xis)]
    fit = fit_quasi_einstein(ricci, metrics, etas)
    local = [fit_quasi_einstein([r], [m], [e]) for r, m, e in zip(ricci, metrics, etas)]
    sigma, p = fit.recover_fluid(spec.fluid.lam, spec.fluid.k)
    rep.results["quasiEinstein"] = {
        "A": fit.A,
        "B": fit.B,
        "residual": fit.residual,
        "recovered": {"sigma": sigma, "p": p},
        "pointwiseResidual": max(f.residual for f in local),
    }
    rep.check("quasiEinstein", max(f.residual for f in local), args.tol_classify)

    ns = classify_nabla_s(spec.metric, spec.xi, spec.fluid, points, tol=args.tol_classify)
    nt = classify_nabla_t(spec.metric, spec.xi, spec.fluid, points, tol=args.tol_classify)
    rep.results["nablaS"] = {**ns.as_dict(), "fired": [_camel(f) for f in ns.fired()]}
    rep.results["nablaT"] = {**nt.as_dict(), "fired": [_camel(f) for f in nt.fired()]}

    eig = [ricci_eigenvalue_of_xi(spec.metric, spec.xi, g) for g in geos]
    eig_err = max(max(res, abs(mu - predicted_xi_eigenvalue(pr))) for (mu, res), pr in zip(eig, params))
    rep.results["xiEigenvalue"] = {"measured": eig[0][0], "predicted": predicted_xi_eigenvalue(params[0])}
    rep.check("xiEigenvalue", eig_err, args.tol_classify)

    pleb = [plebanski_check(pr) for pr in params]
    rep.results["plebanski"] = {
        "energyNonnegative": all(r.energy_nonnegative for r in pleb),
        "pressureBounded": all(r.pressure_bounded for r in pleb),
        "densityAboveBound": all(r.density_above_bound for r in pleb),
        "densityLowerBound": pleb[0].density_lower_bound,
    }
    torse = _torse_reports(spec, points, args.tol_geometry)
    rep.results["torseForming"] = {"max": max(t["max"] for t in torse), "isTorseForming": all(t["max"] < args.tol_geometry for t in torse)}
    return rep


# -- verify -------------------------------------------------------------------------------

def _torse_reports(spec, points, tol) -> list[dict]:
    out = []
    for pt in points:
        r = torse_forming_residual(spec.xi, spec.metric, pt, tol=max(tol, 1e-9))
        out.append({**r.as_dict(), "max": r.max})
    return out


def _suite_torse(spec, points, args, rep: Report) -> bool:
    reports = _torse_reports(spec, points, args.tol_geometry)
    ok = True
    for key in ("nabla_xi", "curvature_xi", "eta_curvature", "d_eta", "geodesic", "orthogonal"):
        ok &= rep.check(f"torse.{_camel(key)}", max(r[key] for r in reports), args.tol_geometry)
    return ok


def _curvature_identities(geo: PointGeometry, frame) -> dict[str, float]:
    R = geo.riemann
    Rd = np.einsum("lm,mijk->ijkl", geo.g, R)  # g(R(E_i,E_j)E_k, E_l)
    nabla_R = geo.nabla(R, geo.driemann, "uddd")  # [m, l, i, j, k]
    # second Bianchi: cyclic sum of (nabla_m R)(E_i, E_j) over (m, i, j)
    t = np.einsum("mlijk->lkmij", nabla_R)
    bianchi = t + t.transpose(0, 1, 3, 4, 2) + t.transpose(0, 1, 4, 2, 3)
    ricci = geo.ricci
    div_ricci = np.einsum("mi,mij->j", geo.g_inv, geo.nabla(ricci, geo.dricci, "dd")) - 0.5 * geo.dscal
    return {
        "antisymmetryXY": frame_norm(Tensor(Rd + Rd.transpose(1, 0, 2, 3), "dddd"), frame),
        "antisymmetryZW": frame_norm(Tensor(Rd + Rd.transpose(0, 1, 3, 2), "dddd"), frame),
        "pairSymmetry": frame_norm(Tensor(Rd - Rd.transpose(2, 3, 0, 1), "dddd"), frame),
        "firstBianchi": frame_norm(Tensor(Rd + Rd.transpose(1, 2, 0, 3) + Rd.transpose(2, 0, 1, 3), "dddd"), frame),
        "secondBianchi": frame_norm(Tensor(bianchi, "udddd"), frame),
        "ricciSymmetry": frame_norm(Tensor(ricci - ricci.T, "dd"), frame),
        "contractedBianchi": frame_norm(Tensor(div_ricci, "d"), frame),
    }


def _suite_curvature(spec, points, args, rep: Report) -> bool:
    worst: dict[str, float] = {}
    fe = 0.0
    trace = 0.0
    for pt in points:
        geo = PointGeometry(spec.metric, pt)
        frame = geo.frame(spec.xi.at(geo.point))
        for k, v in _curvature_identities(geo, frame).items():
            worst[k] = max(worst.get(k, 0.0), v)
        fe = max(fe, field_equation_residual(spec.metric, spec.xi, spec.fluid, geo))
        trace = max(trace, abs(geo.scal - spec.params_at(geo.point).scal))
    ok = True
    for k, v in worst.items():
        ok &= rep.check(f"curvature.{k}", v, args.tol_geometry)
    ok &= rep.check("curvature.fieldEquation", fe, args.tol_geometry)
    ok &= rep.check("curvature.traceIdentity", trace, args.tol_geometry)
    return ok


def _suite_semisym(spec, points, args, rep: Report) -> bool:
    """Each semisymmetry residual's xi-slice must equal |factor| times the projector norm."""
    ok = True
    at_root = {}
    for kind in CurvatureKind:
        for direction in SemisymDirection:
            key = f"{kind.value}-{direction.value}"
            worst = 0.0
            value = None
            for pt in points:
                geo = PointGeometry(spec.metric, pt)
                pr = spec.params_at(geo.point)
                xi = spec.xi.at(geo.point)
                mg = geo.metric_at
                fn = semisym_ts_residual if direction is SemisymDirection.TS else semisym_st_residual
                res = fn(kind, mg, Tensor(geo.riemann, "uddd"), xi, pr.A, pr.B, xi_slice=True)
                value = factor_from_ab(kind, direction, pr.A, pr.B)
                worst = max(worst, abs(res - abs(value) * projector_norm(mg, xi)))
            ok &= rep.check(f"semisym.{key}", worst, REDUCTION_TOL)
            at_root[key] = {"factor": value, "satisfied": abs(value) < REDUCTION_TOL}
    rep.results["semisym"] = at_root
    return ok


def _suite_soliton(spec, points, args, rep: Report) -> bool:
    ok = True
    out = {}
    b_values = []
    for kind in SolitonKind:
        try:
            sol = solve_on_samples(kind, spec.metric, spec.xi, spec.fluid, points, tol=args.tol_soliton)
        except SolitonError as exc:
            out[kind.value] = {"refused": str(exc)}
            rep.fail(f"soliton.{kind.value}")
            ok = False
            continue
        params = spec.params_at(points[0])
        audit = trace_audit(kind, sol.coefficients, params, float(np.mean(sol.div_values)))
        b_values.append(sol.coefficients.b)
        out[kind.value] = {"a": sol.coefficients.a, "b": sol.coefficients.b, "div": float(np.mean(sol.div_values))}
        ok &= rep.check(f"soliton.{kind.value}", sol.max_residual, args.tol_soliton)
        ok &= rep.check(f"soliton.{kind.value}.audit", audit.max, AUDIT_TOL * 10)
    if len(b_values) == 2:
        ok &= rep.check("soliton.bAgreement", abs(b_values[0] - b_values[1]), AUDIT_TOL * 10)
    rep.results["soliton"] = out
    return ok


def cmd_verify(args) -> Report:
    spec, seed, points = _load(args)
    rep = Report("verify", {**_spec_inputs(spec, args, seed, points), "suite": args.suite, "tolerances": _tols(args)}, seed)
    suites = SUITES if args.suite == "all" else (args.suite,)
    outcome = {}
    torse_ok = None
    if any(s in ("semisym", "soliton") for s in suites) or "torse" in suites:
        scratch = rep if "torse" in suites else Report("gate", {}, seed)
        torse_ok = _suite_torse(spec, points, args, scratch)
        if "torse" in suites:
            outcome["torse"] = torse_ok
    for suite in suites:
        if suite == "torse":
            continue
        if suite in ("semisym", "soliton") and not torse_ok:
            outcome[suite] = False
            rep.results.setdefault("refused", {})[suite] = (
                "xi is not torse-forming (nabla xi = I + eta (x) xi fails) on this background; "
                "the semisymmetry and soliton results assume it"
            )
            rep.fail(f"{suite}.gate")
            continue
        runner = {"curvature": _suite_curvature, "semisym": _suite_semisym, "soliton": _suite_soliton}[suite]
        outcome[suite] = runner(spec, points, args, rep)
    rep.results["suites"] = outcome
    return rep


# -- solve-soliton ------------------------------------------------------------------------

def cmd_solve_soliton(args) -> Report:
    spec, seed, points = _load(args)
    kind = SolitonKind(args.kind)
    inputs = {**_spec_inputs(spec, args, seed, points), "kind": kind.value, "potential": args.potential,
              "tolerances": _tols(args)}
    rep = Report("solve-soliton", inputs, seed)
    try:
        sol = solve_on_samples(kind, spec.metric, spec.xi, spec.fluid, points, tol=args.tol_soliton)
    except SolitonError as exc:
        rep.results["refused"] = str(exc)
        rep.fail("divSpread")
        return rep
    params = spec.params_at(points[0])
    div_xi = float(np.mean(sol.div_values))
    audit = trace_audit(kind, sol.coefficients, params, div_xi)
    rep.results.update({
        "a": sol.coefficients.a,
        "b": sol.coefficients.b,
        "div": div_xi,
        "divSpread": sol.div_spread,
        "ricciSoliton": classify_ricci_soliton(params).as_dict(),
    })
    rep.check("soliton", sol.max_residual, args.tol_soliton)
    rep.check("traceAudit", audit.max, AUDIT_TOL * 10)
    if args.potential is not None:
        try:
            lap = laplacian_equation_check(args.potential, spec.metric, spec.fluid, sol.coefficients.b, points,
                                           tol=args.tol_soliton)
        except (SolitonError, ExpressionError) as exc:
            rep.results["laplacian"] = {"error": str(exc)}
            rep.fail("laplacian")
        else:
            rep.results["laplacian"] = {
                "laplacian": float(np.mean(lap.laplacians)),
                "predicted": float(np.mean(lap.predicted)),
            }
            rep.check("laplacian", lap.residual, args.tol_soliton)
    return rep


# -- predict-pressure ---------------------------------------------------------------------

def cmd_predict_pressure(args) -> Report:
    if args.k == 0:
        raise UsageError("k must be nonzero")
    kind, direction = CurvatureKind(args.kind), SemisymDirection(args.direction)
    seed = resolve_seed(args.seed, None)
    inputs = {"kind": kind.value, "direction": direction.value, "lambda": args.lam, "k": args.k, "sigma": args.sigma}
    rep = Report("predict-pressure", inputs, seed)
    roots = predicted_pressures(kind, direction, args.lam, args.k, args.sigma)
    labelled = []
    for p in roots:
        if direction is SemisymDirection.ST and kind is CurvatureKind.PROJECTIVE:
            label = "quadratic"
        elif direction is SemisymDirection.TS and p == -args.sigma:
            label = "vacuum"
        else:
            label = "constant-pressure"
        labelled.append({"p": p, "branch": label, "factor": factor_value(kind, direction, args.lam, args.k, args.sigma, p)})
    rep.results["pressures"] = labelled
    if direction is SemisymDirection.ST and kind is CurvatureKind.PROJECTIVE:
        rep.results["factorRoots"] = projective_st_factor_roots(args.lam, args.k, args.sigma)
    return rep


# -- entry point --------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("spec", help="spec file path, builtin name, or flrw:<a(t)>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None, help="override the spec's sample count")
    p.add_argument("--tol-geometry", type=float, default=TOL_GEOMETRY)
    p.add_argument("--tol-classify", type=float, default=TOL_CLASSIFY)
    p.add_argument("--tol-soliton", type=float, default=TOL_SOLITON)
    p.add_argument("--strict", action="store_true", help="exit 1 when a residual exceeds its tolerance")
    p.add_argument("--verbose", action="store_true", help="human summary on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluidspace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fluidspace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="curvature, fluid fit and classifiers of a spacetime")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="run verification suites")
    _add_common(p)
    p.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    p.set_defaults(func=cmd_verify, strict=True)

    p = sub.add_parser("solve-soliton", help="solve and check soliton coefficients")
    _add_common(p)
    p.add_argument("--kind", choices=[k.value for k in SolitonKind], default=SolitonKind.ETA_RICCI.value)
    p.add_argument("--potential", default=None, help="potential f with xi = grad f, for the Laplacian check")
    p.set_defaults(func=cmd_solve_soliton)

    p = sub.add_parser("predict-pressure", help="pressures forced by a semisymmetry condition")
    p.add_argument("--kind", choices=[k.value for k in CurvatureKind], required=True)
    p.add_argument("--direction", choices=[d.value for d in SemisymDirection], required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--k", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_predict_pressure)
    return parser


def _summary(rep: Report) -> str:
    lines = [f"{rep.command}: {'PASS' if rep.passed else 'FAIL'} (seed {rep.seed})"]
    for name, value in sorted(rep.residuals.items()):
        tol = rep.tolerances[name]
        mark = "ok " if value < tol else "BAD"
        lines.append(f"  {mark} {name} = {value:.3e} (tol {tol:.0e})")
    return "\n".join(lines) + "\n"


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    func: Callable = args.func
    try:
        rep = func(args)
    except (UsageError, CatalogError, CurvatureError, FluidError, GeometryError, ExpressionError) as exc:
        stderr.write(f"fluidspace: error: {exc}\n")
        return 2
    stdout.write(rep.dumps() + "\n")
    if args.verbose:
        stderr.write(_summary(rep))
    if not rep.passed and getattr(args, "strict", False):
        return 1
    if not rep.passed and args.command in ("verify", "solve-soliton"):
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())
