import numpy as np
import pytest
import sympy as sp

from vspectra.expressions import ExpressionError, parse


@pytest.mark.parametrize(
    "text,x,expected",
    [
        ("x^2+1", 1.0, 2.0),
        ("2*x-3", 2.0, 1.0),
        ("-x+1", 0.25, 0.75),
        ("exp(x)*sin(x)", 0.3, np.exp(0.3) * np.sin(0.3)),
        ("cos(2*x)/2", 0.1, np.cos(0.2) / 2),
        ("i*x", 2.0, 2j),
        ("x^-1", 4.0, 0.25),
        ("1.5e-1", 0.0, 0.15),
        ("(x+1)^3", 1.0, 8.0),
    ],
)
def test_evaluation(text, x, expected):
    assert complex(parse(text)(np.array([x]))[0]) == pytest.approx(expected)


def test_step_is_right_continuous():
    vals = parse("H(x-0.5)")(np.array([0.0, 0.5, 1.0]))
    assert vals.real.tolist() == [0.0, 1.0, 1.0]


@pytest.mark.parametrize("bad", ["1+", "x**2", "sqrt(x)", "x^1.5", "(x", "y", ""])
def test_malformed(bad):
    with pytest.raises(ExpressionError):
        parse(bad)


def test_division_by_zero():
    with pytest.raises(ExpressionError):
        parse("1/x")(np.linspace(0, 1, 5))


def test_two_variables():
    k = parse("x-t", ("x", "t"))
    assert complex(k(np.array([1.0]), np.array([0.25]))[0]) == pytest.approx(0.75)
    with pytest.raises(ExpressionError):
        parse("x-t")


def test_sympy_round_trip():
    e = parse("x^3*exp(x)+i*sin(2*x)")
    x = sp.Symbol("x", real=True)
    expected = x**3 * sp.exp(x) + sp.I * sp.sin(2 * x)
    assert sp.simplify(e.to_sympy().subs(list(e.to_sympy().free_symbols)[0], x) - expected) == 0


def test_step_metadata():
    e = parse("H(x-0.5)+x")
    assert e.has_step
    assert not parse("x").has_step
