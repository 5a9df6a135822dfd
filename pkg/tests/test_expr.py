import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fluidspace.expr import (
    Add,
    ExpressionError,
    JetCompiler,
    Mul,
    Num,
    Sym,
    evaluate,
    parse,
)

COORDS = ("t", "x", "y", "z")


def _leaf():
    return st.one_of(
        st.sampled_from(["t", "x", "y", "z", "pi"]),
        st.integers(-5, 5).map(str),
        st.sampled_from(["0.5", "1.25", "2.5e-1"]),
    )


def _grow(children):
    binop = st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(
        lambda t: f"({t[0]}){t[1]}({t[2]})"
    )
    call = st.tuples(st.sampled_from(["exp", "sin", "cos", "sinh", "cosh"]), children).map(lambda t: f"{t[0]}({t[1]})")
    unary = children.map(lambda c: f"-({c})")
    return st.one_of(binop, call, unary)


expressions = st.recursive(_leaf(), _grow, max_leaves=8)


@given(expressions)
def test_print_parse_round_trip(text):
    try:
        e = parse(text, COORDS)
    except ExpressionError:
        return  # e.g. literal division by zero
    assert parse(e.to_text(), COORDS) == e


def test_round_trip_keeps_association():
    for text in ["a*(b*c)", "a-(b-c)", "a/(b/c)", "(a^b)^c", "a^(b^c)", "-(a+b)", "a+(-1)"]:
        e = parse(text)
        assert parse(e.to_text()) == e, text


def test_structure_is_verbatim():
    assert parse("x + 0") == Add(Sym("x"), Num(0.0))
    assert parse("2*3") == Num(6.0)
    assert parse("x*y") == Mul(Sym("x"), Sym("y"))


def test_caret_is_power():
    assert evaluate(parse("t^3"), COORDS, [2, 0, 0, 0]) == pytest.approx(8.0)


@pytest.mark.parametrize(
    "text, message",
    [
        ("t +", "syntax"),
        ("w * t", "unknown symbol 'w'"),
        ("foo(t)", "unsupported call"),
        ("t / 0", "division by zero"),
        ("t[0]", "unsupported syntax"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(ExpressionError, match=message):
        parse(text, COORDS)


def test_unknown_symbol_reports_column():
    with pytest.raises(ExpressionError, match="column 5"):
        parse("t + q", COORDS)


def test_negative_base_fractional_power_raises():
    with pytest.raises((ExpressionError, ValueError)):
        JetCompiler([parse("t^(2/3)", COORDS)], COORDS, 0).evaluate([-1.0, 0, 0, 0])


def _fd_gradient(text, point, h=1e-6):
    e = parse(text, COORDS)
    grad = []
    for a in range(4):
        up, down = np.array(point, float), np.array(point, float)
        up[a] += h
        down[a] -= h
        grad.append((evaluate(e, COORDS, up) - evaluate(e, COORDS, down)) / (2 * h))
    return np.array(grad)


@pytest.mark.parametrize(
    "text",
    [
        "exp(2*t)*x^2",
        "sin(x*y)/(1 + z^2)",
        "sqrt(1 + t^2 + x^2)",
        "log(2 + cosh(t - z))",
        "t^(2/3)*sinh(y)",
        "x^y",
        "1/(1 + (x^2 + y^2 + z^2)/4)^2",
    ],
)
def test_first_derivatives_match_central_differences(text):
    point = [1.3, 0.4, 0.7, -0.2]
    jets = JetCompiler([parse(text, COORDS)], COORDS, 1).evaluate(point)
    assert np.allclose(jets[1][0], _fd_gradient(text, point), atol=1e-7, rtol=1e-7)


def test_second_derivatives_are_symmetric_and_match_differences():
    text = "exp(t*x)*cos(y) + z^3*t"
    point = np.array([0.3, -0.5, 0.8, 0.6])
    e = parse(text, COORDS)
    jets = JetCompiler([e], COORDS, 2).evaluate(point)
    hess = jets[2][0]
    assert np.allclose(hess, hess.T)
    h = 1e-4
    for a in range(4):
        for b in range(4):
            def f(da, db):
                p = point.copy()
                p[a] += da
                p[b] += db
                return evaluate(e, COORDS, p)
            fd = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
            assert hess[a, b] == pytest.approx(fd, abs=1e-6)


def test_exact_known_derivative():
    jets = JetCompiler([parse("exp(2*t)", COORDS)], COORDS, 3).evaluate([0.5, 0, 0, 0])
    assert jets[2][0, 0, 0] == pytest.approx(4 * math.e, rel=1e-15)
    assert jets[3][0, 0, 0, 0] == pytest.approx(8 * math.e, rel=1e-15)


def test_constant_detection():
    assert parse("2*pi").is_constant
    assert not parse("2*t").is_constant
