"""Built-in spacetimes and the JSON spacetime-spec format.

A spec file is one JSON object::

    {"name": "...", "coords": ["t", "x", "y", "z"],
     "metric": [[...4 expressions...], ...],   # lower triangle may be null
     "xi": [...4 expressions...],
     "fluid": {"lambda": 2, "k": 1, "sigma": 1, "p": -1},
     "domain": {"t": [-0.5, 0.5], "x": [-1, 1], ...},
     "samples": 50, "seed": 0}

``sigma`` and ``p`` may also be expression strings in the coordinates, for
fluids whose density and pressure vary (FLRW models).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .expr import Expr, ExpressionError, Num, as_expr, div, mul, parse, power, sub
from .fluid import FluidError, FluidModel, FluidParams
from .geometry import GeometryError, MetricField, VectorField
from .tensor import DIM

DEFAULT_COORDS = ("t", "x", "y", "z")
DEFAULT_SAMPLES = 50
DEFAULT_SEED = 0
UNIT_TOL = 1e-9


class CatalogError(ValueError):
    """Spec loading or validation failure; ``field`` and ``line`` locate the problem when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field {field!r}")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class SpacetimeSpec:
    name: str
    coords: tuple[str, ...]
    metric: MetricField
    xi: VectorField
    fluid: FluidModel
    domain: tuple[tuple[float, float], ...]
    samples: int = DEFAULT_SAMPLES
    seed: int | None = None  # None: not pinned by the spec

    def sample_points(self, seed: int | None = None, count: int | None = None) -> np.ndarray:
        """Seeded uniform points in the domain box, shape ``(count, 4)``."""
        if seed is None:
            seed = DEFAULT_SEED if self.seed is None else self.seed
        rng = np.random.default_rng(seed)
        lo = np.array([d[0] for d in self.domain])
        hi = np.array([d[1] for d in self.domain])
        n = self.samples if count is None else count
        return lo + (hi - lo) * rng.random((n, DIM))

    def params_at(self, point) -> FluidParams:
        return self.fluid.at(self.coords, point)

    def with_seed(self, seed: int) -> SpacetimeSpec:
        return replace(self, seed=int(seed))


def validate(spec: SpacetimeSpec, points=None) -> None:
    """Check signature and ``g(xi,xi) = -1`` at the sample points."""
    pts = spec.sample_points() if points is None else points
    for pt in pts:
        try:
            mg = spec.metric.at(pt)
        except GeometryError as exc:
            raise CatalogError(f"signature check failed: {exc}", field="metric") from None
        try:
            v = spec.xi.at(pt)
        except (ExpressionError, ValueError) as exc:
            raise CatalogError(f"cannot evaluate xi: {exc}", field="xi") from None
        norm = mg.inner(v, v)
        if abs(norm + 1.0) > UNIT_TOL:
            raise CatalogError(
                f"xi violates g(ξ,ξ)=−1: g(xi,xi) = {norm:.12g} at {[float(c) for c in pt]}", field="xi"
            )
        try:
            spec.fluid.at(spec.coords, pt)
        except (ExpressionError, FluidError, ValueError) as exc:
            raise CatalogError(f"cannot evaluate fluid: {exc}", field="fluid") from None


# -- builtins -----------------------------------------------------------------------------

def _box(t: tuple[float, float], space: tuple[float, float] = (-1.0, 1.0)) -> tuple[tuple[float, float], ...]:
    return (t, space, space, space)


_XI_T = ("1", "0", "0", "0")


def minkowski() -> SpacetimeSpec:
    c = DEFAULT_COORDS
    return SpacetimeSpec(
        "minkowski",
        c,
        MetricField.diagonal(c, [-1, 1, 1, 1]),
        VectorField.from_list(c, _XI_T),
        FluidModel.constant(0.0, 1.0, 0.0, 0.0),
        _box((-0.5, 0.5)),
    )


def desitter_torse() -> SpacetimeSpec:
    c = DEFAULT_COORDS
    return SpacetimeSpec(
        "desitter-torse",
        c,
        MetricField.diagonal(c, ["-1", "exp(2*t)", "exp(2*t)", "exp(2*t)"]),
        VectorField.from_list(c, _XI_T),
        FluidModel.constant(2.0, 1.0, 1.0, -1.0),
        _box((-0.5, 0.5)),
    )


def flrw_fluid(scale_sq: Expr, lam: float, k: float, t: str = "t") -> tuple[Expr, Expr]:
    """Density and pressure making ``-dt^2 + s(t)(dx^2 + dy^2 + dz^2)`` solve the field equations.

    With ``H = s'/(2s)``: ``k sigma = 3H^2 - lambda`` and
    ``k p = lambda - s''/s + s'^2/(4 s^2)``.
    """
    s1 = scale_sq.diff(t)
    s2 = s1.diff(t)
    h_sq = div(power(s1, Num(2.0)), mul(Num(4.0), power(scale_sq, Num(2.0))))
    k_sigma = sub(mul(Num(3.0), h_sq), Num(lam))
    k_p = sub(Num(lam), sub(div(s2, scale_sq), h_sq))
    if k != 1:
        return div(k_sigma, Num(k)), div(k_p, Num(k))
    return k_sigma, k_p


def flrw(a: str | Expr = "t^(2/3)", lam: float = 0.0, k: float = 1.0, sigma=None, p=None,
         domain_t: tuple[float, float] = (1.0, 2.0)) -> SpacetimeSpec:
    """Spatially flat FLRW with scale factor ``a(t)``; fluid derived unless supplied."""
    c = DEFAULT_COORDS
    try:
        a_expr = parse(a, ("t",)) if isinstance(a, str) else as_expr(a)
    except ExpressionError as exc:
        raise CatalogError(f"malformed scale factor: {exc}", field="a") from None
    if not a_expr.symbols() <= {"t"}:
        raise CatalogError("scale factor may depend on t only", field="a")
    s = power(a_expr, Num(2.0))
    if sigma is None or p is None:
        d_sigma, d_p = flrw_fluid(s, lam, k)
        sigma = d_sigma if sigma is None else sigma
        p = d_p if p is None else p
    fluid = FluidModel(float(lam), float(k), _fluid_expr(sigma, c), _fluid_expr(p, c))
    name = "flrw:" + a_expr.to_text()
    return SpacetimeSpec(name, c, MetricField.diagonal(c, [Num(-1.0), s, s, s]),
                         VectorField.from_list(c, _XI_T), fluid, _box(domain_t))


def radiation_flrw(lam: float = 3.0, k: float = 1.0) -> SpacetimeSpec:
    """``a(t)^2 = sinh(2ht)``, ``h = sqrt(lambda/3)``: a radiation fluid ``sigma = 3p``."""
    if not lam > 0:
        raise CatalogError("radiation-flrw needs lambda > 0", field="lambda")
    c = DEFAULT_COORDS
    h = math.sqrt(lam / 3)
    s = parse(f"sinh({_num_text(2 * h)}*t)", c)
    sigma = parse(f"{_num_text(3 * h * h / k)}/sinh({_num_text(2 * h)}*t)^2", c)
    p = parse(f"{_num_text(h * h / k)}/sinh({_num_text(2 * h)}*t)^2", c)
    return SpacetimeSpec(
        "radiation-flrw",
        c,
        MetricField.diagonal(c, [Num(-1.0), s, s, s]),
        VectorField.from_list(c, _XI_T),
        FluidModel(float(lam), float(k), sigma, p),
        _box((0.5, 1.5)),
    )


def einstein_static() -> SpacetimeSpec:
    """Static unit-radius closed universe, spatial part in stereographic coordinates."""
    c = DEFAULT_COORDS
    conf = "1/(1 + (x^2 + y^2 + z^2)/4)^2"
    return SpacetimeSpec(
        "einstein-static",
        c,
        MetricField.diagonal(c, ["-1", conf, conf, conf]),
        VectorField.from_list(c, _XI_T),
        FluidModel.constant(1.0, 1.0, 2.0, 0.0),
        _box((-0.5, 0.5)),
    )


BUILTINS = {
    "minkowski": minkowski,
    "desitter-torse": desitter_torse,
    "flrw": flrw,
    "radiation-flrw": radiation_flrw,
    "einstein-static": einstein_static,
}


def builtin(name: str) -> SpacetimeSpec:
    """Look up a builtin; ``flrw:<a(t)>`` selects FLRW with the given scale factor."""
    if name.startswith("flrw:"):
        return flrw(name[len("flrw:"):])
    try:
        return BUILTINS[name]()
    except KeyError:
        raise CatalogError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)} or flrw:<a(t)>") from None


def _num_text(x: float) -> str:
    return Num(float(x)).to_text()


def _fluid_expr(value, coords) -> Expr:
    return parse(value, coords) if isinstance(value, str) else as_expr(value)


# -- JSON ---------------------------------------------------------------------------------

def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for n, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return n
    return None


def _finite_number(value: Any, field: str, line) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise CatalogError(f"expected a finite number, got {value!r}", field=field, line=line)
    return float(value)


def _reject_constant(token: str):
    raise ValueError(f"non-finite number {token} is not allowed")


def parse_spec(text: str, validate_points: bool = True) -> SpacetimeSpec:
    """Parse and validate a JSON spec; errors carry field and line context."""
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"JSON syntax error: {exc.msg}", line=exc.lineno) from None
    except ValueError as exc:
        raise CatalogError(str(exc)) from None
    if not isinstance(raw, dict):
        raise CatalogError("spec must be a JSON object", line=1)
    required = ("name", "coords", "metric", "xi", "fluid")
    for key in required:
        if key not in raw:
            raise CatalogError("missing required field", field=key)
    unknown = set(raw) - set(required) - {"domain", "samples", "seed"}
    if unknown:
        key = sorted(unknown)[0]
        raise CatalogError("unknown field", field=key, line=_line_of(text, key))

    def fail(msg, key):
        raise CatalogError(msg, field=key, line=_line_of(text, key.split(".")[0].split("[")[0]))

    name = raw["name"]
    if not isinstance(name, str) or not name:
        fail("name must be a non-empty string", "name")
    coords = raw["coords"]
    if not (isinstance(coords, list) and len(coords) == DIM and all(isinstance(c, str) and c.isidentifier() for c in coords)):
        fail("coords must be 4 identifier strings", "coords")
    coords = tuple(coords)

    rows = raw["metric"]
    if not (isinstance(rows, list) and len(rows) == DIM and all(isinstance(r, list) and len(r) == DIM for r in rows)):
        fail("metric must be a 4x4 array", "metric")
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if v is None and j < i:
                continue
            if not isinstance(v, (str, int, float)) or isinstance(v, bool):
                fail(f"metric[{i}][{j}] must be an expression string", f"metric[{i}][{j}]")
    try:
        metric = MetricField.from_rows(coords, rows)
    except (ExpressionError, GeometryError) as exc:
        fail(str(exc), "metric")

    xi_raw = raw["xi"]
    if not (isinstance(xi_raw, list) and len(xi_raw) == DIM):
        fail("xi must list 4 expressions", "xi")
    try:
        xi = VectorField.from_list(coords, xi_raw)
    except (ExpressionError, GeometryError, TypeError) as exc:
        fail(str(exc), "xi")

    fl = raw["fluid"]
    if not isinstance(fl, dict) or set(fl) != {"lambda", "k", "sigma", "p"}:
        fail("fluid must have exactly lambda, k, sigma, p", "fluid")
    lam = _finite_number(fl["lambda"], "fluid.lambda", _line_of(text, "lambda"))
    k = _finite_number(fl["k"], "fluid.k", _line_of(text, "k"))
    if not k > 0:
        fail("k must be positive", "fluid")
    scalars = {}
    for key in ("sigma", "p"):
        v = fl[key]
        if isinstance(v, str):
            try:
                scalars[key] = parse(v, coords)
            except ExpressionError as exc:
                raise CatalogError(str(exc), field=f"fluid.{key}", line=_line_of(text, key)) from None
        else:
            scalars[key] = Num(_finite_number(v, f"fluid.{key}", _line_of(text, key)))
    fluid = FluidModel(lam, k, scalars["sigma"], scalars["p"])

    dom_raw = raw.get("domain", {})
    if not isinstance(dom_raw, dict) or set(dom_raw) - set(coords):
        fail("domain must map coordinate names to [lo, hi]", "domain")
    default = dict(zip(coords, _box((-0.5, 0.5))))
    domain = []
    for c in coords:
        iv = dom_raw.get(c, default[c])
        if not (isinstance(iv, (list, tuple)) and len(iv) == 2):
            fail(f"domain of {c} must be [lo, hi]", "domain")
        lo = _finite_number(iv[0], f"domain.{c}", _line_of(text, "domain"))
        hi = _finite_number(iv[1], f"domain.{c}", _line_of(text, "domain"))
        if not lo <= hi:
            fail(f"domain of {c} has lo > hi", "domain")
        domain.append((lo, hi))

    samples = raw.get("samples", DEFAULT_SAMPLES)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
        fail("samples must be a positive integer", "samples")
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        fail("seed must be a non-negative integer", "seed")

    spec = SpacetimeSpec(name, coords, metric, xi, fluid, tuple(domain), samples, seed)
    if validate_points:
        try:
            validate(spec)
        except CatalogError as exc:
            raise CatalogError(str(exc).rsplit(" (", 1)[0], field=exc.field, line=_line_of(text, exc.field or "")) from None
    return spec


def _scalar_json(e: Expr):
    return e.value if isinstance(e, Num) else e.to_text()


def spec_to_dict(spec: SpacetimeSpec) -> dict:
    comps = spec.metric.components
    out = {
        "name": spec.name,
        "coords": list(spec.coords),
        "metric": [[comps[i][j].to_text() if j >= i else None for j in range(DIM)] for i in range(DIM)],
        "xi": [c.to_text() for c in spec.xi.components],
        "fluid": {
            "lambda": spec.fluid.lam,
            "k": spec.fluid.k,
            "sigma": _scalar_json(spec.fluid.sigma),
            "p": _scalar_json(spec.fluid.p),
        },
        "domain": {c: list(iv) for c, iv in zip(spec.coords, spec.domain)},
        "samples": spec.samples,
    }
    if spec.seed is not None:
        out["seed"] = spec.seed
    return out


def serialize_spec(spec: SpacetimeSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


def load_spec(source: str) -> SpacetimeSpec:
    """Resolve a CLI spec argument: an existing file path, a builtin name, or ``flrw:<a(t)>``."""
    import os

    if os.path.isfile(source):
        with open(source, encoding="utf-8") as fh:
            return parse_spec(fh.read())
    if source in BUILTINS or source.startswith("flrw:"):
        spec = builtin(source)
        validate(spec)
        return spec
    raise CatalogError(f"no spec file or builtin named {source!r}")
