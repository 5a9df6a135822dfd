"""Scalar field expressions over chart coordinates.

Expressions are immutable trees with exact symbolic differentiation.  The
grammar is ordinary infix arithmetic with ``^`` (or ``**``) for powers,
function calls ``exp(x)``, ``log``, ``sin``, ``cos``, ``sinh``, ``cosh``,
``sqrt``, decimal literals and the constant ``pi``.

Simplification is best effort (constant folding, ``x*1``, ``x+0`` ...);
nothing downstream relies on it for correctness.
"""

from __future__ import annotations

import ast
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt")
CONSTANTS = {"pi": math.pi}


class ExpressionError(ValueError):
    """Raised for malformed expressions or failed evaluations."""


class Expr:
    """Base node.  Subclasses are frozen dataclasses, so ``==`` is structural."""

    precedence = 100

    def diff(self, var: str) -> Expr:
        raise NotImplementedError

    def symbols(self) -> set[str]:
        return set()

    def to_python(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()

    def to_text(self) -> str:
        raise NotImplementedError

    def _wrap(self, child: Expr, strict: bool = False) -> str:
        text = child.to_text()
        if child.precedence < self.precedence or (strict and child.precedence == self.precedence):
            return f"({text})"
        return text

    def _wrap_py(self, child: Expr, strict: bool = False) -> str:
        text = child.to_python()
        if child.precedence < self.precedence or (strict and child.precedence == self.precedence):
            return f"({text})"
        return text

    # operator sugar for building expressions in code
    def __add__(self, other): return add(self, as_expr(other))
    def __radd__(self, other): return add(as_expr(other), self)
    def __sub__(self, other): return sub(self, as_expr(other))
    def __rsub__(self, other): return sub(as_expr(other), self)
    def __mul__(self, other): return mul(self, as_expr(other))
    def __rmul__(self, other): return mul(as_expr(other), self)
    def __truediv__(self, other): return div(self, as_expr(other))
    def __rtruediv__(self, other): return div(as_expr(other), self)
    def __pow__(self, other): return power(self, as_expr(other))
    def __neg__(self): return neg(self)

    @property
    def is_constant(self) -> bool:
        return not self.symbols()


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float

    precedence = 100

    def diff(self, var):
        return ZERO

    def to_python(self):
        v = float(self.value)
        return f"({v!r})" if v < 0 else repr(v)

    def to_text(self):
        v = float(self.value)
        if v.is_integer() and abs(v) < 1e15:
            text = str(int(v))
        else:
            text = repr(v)
        return f"({text})" if v < 0 else text


@dataclass(frozen=True, eq=True)
class Const(Expr):
    name: str

    def diff(self, var):
        return ZERO

    def to_python(self):
        return repr(CONSTANTS[self.name])

    def to_text(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Sym(Expr):
    name: str

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def symbols(self):
        return {self.name}

    def to_python(self):
        return self.name

    def to_text(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Add(Expr):
    left: Expr
    right: Expr

    precedence = 10

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))

    def symbols(self):
        return self.left.symbols() | self.right.symbols()

    def to_python(self):
        return f"{self._wrap_py(self.left)} + {self._wrap_py(self.right, strict=True)}"

    def to_text(self):
        return f"{self._wrap(self.left)} + {self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Sub(Expr):
    left: Expr
    right: Expr

    precedence = 10

    def diff(self, var):
        return sub(self.left.diff(var), self.right.diff(var))

    def symbols(self):
        return self.left.symbols() | self.right.symbols()

    def to_python(self):
        return f"{self._wrap_py(self.left)} - {self._wrap_py(self.right, strict=True)}"

    def to_text(self):
        return f"{self._wrap(self.left)} - {self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    left: Expr
    right: Expr

    precedence = 20

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right), mul(self.left, self.right.diff(var)))

    def symbols(self):
        return self.left.symbols() | self.right.symbols()

    def to_python(self):
        return f"{self._wrap_py(self.left)} * {self._wrap_py(self.right, strict=True)}"

    def to_text(self):
        return f"{self._wrap(self.left)}*{self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Div(Expr):
    left: Expr
    right: Expr

    precedence = 20

    def diff(self, var):
        du = self.left.diff(var)
        dv = self.right.diff(var)
        # (u/v)' = u'/v - u v' / v^2
        return sub(div(du, self.right), div(mul(self.left, dv), power(self.right, Num(2.0))))

    def symbols(self):
        return self.left.symbols() | self.right.symbols()

    def to_python(self):
        return f"{self._wrap_py(self.left)} / {self._wrap_py(self.right, strict=True)}"

    def to_text(self):
        return f"{self._wrap(self.left)}/{self._wrap(self.right, strict=True)}"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Expr

    precedence = 30

    def diff(self, var):
        u, v = self.base, self.exponent
        du = u.diff(var)
        if v.is_constant:
            return mul(mul(v, power(u, sub(v, ONE))), du)
        dv = v.diff(var)
        return mul(self, add(mul(dv, func("log", u)), div(mul(v, du), u)))

    def symbols(self):
        return self.base.symbols() | self.exponent.symbols()

    def to_python(self):
        return f"_pow({self.base.to_python()}, {self.exponent.to_python()})"

    def to_text(self):
        # powers are right-associative; always bracket a compound exponent
        return f"{self._wrap(self.base, strict=True)}^{self._wrap(self.exponent, strict=True)}"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    precedence = 25

    def diff(self, var):
        return neg(self.arg.diff(var))

    def symbols(self):
        return self.arg.symbols()

    def to_python(self):
        return f"-{self._wrap_py(self.arg, strict=True)}"

    def to_text(self):
        return f"-{self._wrap(self.arg, strict=True)}"


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr

    def diff(self, var):
        u = self.arg
        du = u.diff(var)
        if du == ZERO:
            return ZERO
        if self.name == "exp":
            outer = self
        elif self.name == "log":
            return div(du, u)
        elif self.name == "sin":
            outer = func("cos", u)
        elif self.name == "cos":
            outer = neg(func("sin", u))
        elif self.name == "sinh":
            outer = func("cosh", u)
        elif self.name == "cosh":
            outer = func("sinh", u)
        elif self.name == "sqrt":
            return div(du, mul(Num(2.0), self))
        else:  # pragma: no cover - guarded by the constructor
            raise ExpressionError(f"unknown function {self.name!r}")
        return mul(outer, du)

    def symbols(self):
        return self.arg.symbols()

    def to_python(self):
        return f"_{self.name}({self.arg.to_python()})"

    def to_text(self):
        return f"{self.name}({self.arg.to_text()})"


ZERO = Num(0.0)
ONE = Num(1.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Num(float(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an expression")


def _num(e: Expr) -> float | None:
    return e.value if isinstance(e, Num) else None


# -- smart constructors -------------------------------------------------------

def add(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return neg(b)
    if a == b:
        return ZERO
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0.0 or vb == 0.0:
        return ZERO
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return neg(b)
    if vb == -1.0:
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if vb == 0.0:
        raise ExpressionError("division by literal zero")
    if va is not None and vb is not None:
        return Num(va / vb)
    if va == 0.0:
        return ZERO
    if vb == 1.0:
        return a
    return Div(a, b)


def power(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if vb == 0.0:
        return ONE
    if vb == 1.0:
        return a
    if va is not None and vb is not None:
        return Num(_pow(va, vb))
    return Pow(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def func(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExpressionError(f"unknown function {name!r}; allowed: {', '.join(FUNCTIONS)}")
    if isinstance(arg, Num):
        return Num(_MATH[name](arg.value))
    return Func(name, arg)


# -- evaluation -----------------------------------------------------------------

def _pow(base: float, exponent: float) -> float:
    # math.pow raises on negative base with fractional exponent instead of going complex
    return math.pow(base, exponent)


_MATH: dict[str, Callable[[float], float]] = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "sqrt": math.sqrt,
}

_NAMESPACE = {"_pow": _pow, **{f"_{k}": v for k, v in _MATH.items()}}


def compile_many(exprs: Sequence[Expr], coords: Sequence[str]) -> Callable[..., tuple]:
    """Compile expressions into one function of the coordinates returning a tuple."""
    if not exprs:
        return lambda *args: ()
    body = ", ".join(e.to_python() for e in exprs)
    source = f"lambda {', '.join(coords)}: ({body},)"
    return eval(compile(source, "<fluidspace-expr>", "eval"), dict(_NAMESPACE))


def evaluate(expr: Expr, coords: Sequence[str], point: Sequence[float]) -> float:
    fn = compile_many([expr], coords)
    try:
        value = fn(*map(float, point))[0]
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise ExpressionError(f"cannot evaluate {expr} at {list(point)}: {exc}") from exc
    if not math.isfinite(value):
        raise ExpressionError(f"{expr} is not finite at {list(point)}")
    return value


# -- parsing ---------------------------------------------------------------------

_BINOPS = {ast.Add: add, ast.Sub: sub, ast.Mult: mul, ast.Div: div, ast.Pow: power}


def parse(text: str, coords: Iterable[str] | None = None) -> Expr:
    """Parse infix text into an expression.

    ``coords`` restricts the free symbols; unknown names raise
    :class:`ExpressionError` naming the offending column.
    """
    allowed = set(coords) if coords is not None else None
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"syntax error in {text!r} at column {exc.offset}: {exc.msg}") from None

    def build(node: ast.AST) -> Expr:
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            left, right = build(node.left), build(node.right)
            if isinstance(node.op, ast.Div) and _num(right) == 0.0:
                raise ExpressionError(f"division by zero in {text!r}")
            # literal folding only; symbolic structure is kept verbatim
            if _num(left) is not None and _num(right) is not None:
                try:
                    return _BINOPS[type(node.op)](left, right)
                except (ValueError, OverflowError, ZeroDivisionError) as exc:
                    raise ExpressionError(f"cannot fold constant in {text!r}: {exc}") from None
            return {ast.Add: Add, ast.Sub: Sub, ast.Mult: Mul, ast.Div: Div, ast.Pow: Pow}[type(node.op)](left, right)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            inner = build(node.operand)
            return Num(-inner.value) if isinstance(inner, Num) else Neg(inner)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.UAdd):
            return build(node.operand)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            value = float(node.value)
            if not math.isfinite(value):
                raise ExpressionError(f"non-finite literal in {text!r}")
            return Num(value)
        if isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return Const(node.id)
            if allowed is not None and node.id not in allowed:
                raise ExpressionError(
                    f"unknown symbol {node.id!r} at column {node.col_offset + 1} in {text!r}"
                )
            return Sym(node.id)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            if node.func.id not in FUNCTIONS or len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"unsupported call {node.func.id!r} in {text!r}")
            return Func(node.func.id, build(node.args[0]))
        raise ExpressionError(
            f"unsupported syntax at column {getattr(node, 'col_offset', 0) + 1} in {text!r}"
        )

    return build(tree.body)


# -- derivative jets -------------------------------------------------------------

class JetCompiler:
    """Exact partial derivatives of a list of expressions up to a given order.

    ``evaluate(point)`` returns ``[values, d1, d2, ...]`` where ``d1[n, a]`` is
    the derivative of expression ``n`` along coordinate ``a``, ``d2[n, a, b]``
    the second derivative, and so on (fully symmetric in derivative slots).
    """

    def __init__(self, exprs: Sequence[Expr], coords: Sequence[str], order: int):
        self.coords = tuple(coords)
        self.order = order
        self.count = len(exprs)
        dim = len(self.coords)
        cache: dict[tuple[int, tuple[int, ...]], Expr] = {}

        def derivative(n: int, multi: tuple[int, ...]) -> Expr:
            key = (n, multi)
            if key not in cache:
                if not multi:
                    cache[key] = exprs[n]
                else:
                    cache[key] = derivative(n, multi[:-1]).diff(self.coords[multi[-1]])
            return cache[key]

        flat: list[Expr] = []
        self._layout: list[list[tuple[int, tuple[int, ...]]]] = []
        for level in range(order + 1):
            entries = []
            for multi in itertools.combinations_with_replacement(range(dim), level):
                for n in range(self.count):
                    entries.append((n, multi))
                    flat.append(derivative(n, multi))
            self._layout.append(entries)
        self._fn = compile_many(flat, self.coords)
        self._perms = [
            {multi: list(set(itertools.permutations(multi))) for multi in
             itertools.combinations_with_replacement(range(dim), level)}
            for level in range(order + 1)
        ]

    def evaluate(self, point: Sequence[float]) -> list[np.ndarray]:
        dim = len(self.coords)
        try:
            flat = self._fn(*map(float, point))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise ExpressionError(f"cannot evaluate field at {list(point)}: {exc}") from exc
        out = []
        pos = 0
        for level, entries in enumerate(self._layout):
            arr = np.empty((self.count,) + (dim,) * level)
            perms = self._perms[level]
            for n, multi in entries:
                value = flat[pos]
                pos += 1
                for perm in perms[multi]:
                    arr[(n,) + perm] = value
            out.append(arr)
        if not all(np.all(np.isfinite(a)) for a in out):
            raise ExpressionError(f"field is not finite at {list(point)}")
        return out
