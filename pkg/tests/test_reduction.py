import numpy as np
import pytest

from vspectra.coefficients import EvenCoefficientSpec, OddCoefficientSpec, PolynomialCoefficientSpec
from vspectra.expressions import ExpressionError
from vspectra.quadrature import SampledFunction, make_grid
from vspectra.reduction import (
    IneligibleFormError,
    apply_B_plus_C,
    build_even,
    build_odd,
    build_polynomial,
    build_raw,
    shift,
    verify_against_classical,
)

G = make_grid(101)
X, T = G.nodes[:, None], G.nodes[None, :]


def test_even_n1_sigma():
    form = build_even(EvenCoefficientSpec(1, ("sin(3*x)",), ("0",)), G)
    assert (form.m, form.n) == (1, 1)
    np.testing.assert_allclose(form.kernel.values, np.tril(np.sin(3 * X) - np.sin(3 * T)), atol=1e-13)
    np.testing.assert_allclose(form.rank_part[0].values, np.sin(3 * G.nodes), atol=1e-13)


def test_even_delta_potential():
    form = build_even(EvenCoefficientSpec(1, ("H(x-0.5)",), ("0",)), make_grid(11))
    x = form.grid.nodes
    expected = np.tril((x[:, None] >= 0.5) * 1.0 - (x[None, :] >= 0.5) * 1.0)
    np.testing.assert_allclose(form.kernel.values, expected)
    assert not form.kernel_continuous
    assert not form.spectral_eligible


def test_even_zero():
    form = build_even(EvenCoefficientSpec(2, ("0", "0"), ("0", "0")), G)
    assert form.kernel.max_abs() == 0
    assert all(np.all(u.values == 0) for u in form.rank_part)


def test_even_n2_linear_P1():
    form = build_even(EvenCoefficientSpec(2, ("x", "0"), ("0", "0")), G)
    np.testing.assert_allclose(form.kernel.values, np.tril(X - T), atol=1e-13)
    assert form.kernel.diagonal_zero


def test_odd_constant_q0():
    form = build_odd(OddCoefficientSpec(0, "3", "0", ("0",), ()), G)
    np.testing.assert_allclose(form.multiplier.values, 6j)
    assert form.kernel.max_abs() == 0 and form.rank_part == ()
    assert not form.spectral_eligible
    with pytest.raises(IneligibleFormError):
        form.require_identity_multiplier()


def test_odd_identity_multiplier():
    form = build_odd(OddCoefficientSpec(0, "-0.5*i", "0", ("0",), ()), G)
    assert form.multiplier_is_identity and form.spectral_eligible


def test_odd_hand_value():
    form = build_odd(OddCoefficientSpec(1, "-0.5*i", "0", ("0", "x"), ("0",)), G)
    assert (form.m, form.n) == (2, 1)
    assert form.kernel.values[-1, 0] == pytest.approx(0.5, abs=1e-12)


def test_odd_vanishing_q0():
    with pytest.raises(ExpressionError):
        build_odd(OddCoefficientSpec(0, "x", "1", ("0",), ()), G)


def test_polynomial_forms():
    zero = build_polynomial(PolynomialCoefficientSpec(4, ("0", "0", "0")), G)
    assert zero.kernel.max_abs() == 0 and (zero.m, zero.n) == (1, 3)
    f = build_polynomial(PolynomialCoefficientSpec(3, ("1", "0")), G)
    np.testing.assert_allclose(f.kernel.values, np.tril((X - T) ** 2 / 2), atol=1e-13)
    g = build_polynomial(PolynomialCoefficientSpec(5, ("exp(x)", "sin(x)", "x", "1")), G)
    assert g.kernel.diagonal_zero


@pytest.mark.parametrize(
    "spec,y",
    [
        (EvenCoefficientSpec(1, ("x",), ("0",)), "sin(2*x)"),
        (EvenCoefficientSpec(2, ("x", "x^2"), ("0", "x")), "x^3*exp(x)"),
        (EvenCoefficientSpec(3, ("sin(x)", "x^2", "x^3"), ("0", "cos(x)", "x")), "sin(2*x)"),
        (OddCoefficientSpec(0, "-0.5*i", "0", ("0",), ()), "exp(x)"),
        (OddCoefficientSpec(1, "1+x", "1", ("i", "x^2"), ("sin(x)",)), "sin(2*x)"),
        (OddCoefficientSpec(2, "2-x", "-1", ("-i", "x", "x^2"), ("x", "cos(x)")), "x^3*exp(x)"),
        (PolynomialCoefficientSpec(3, ("1", "0")), "sin(2*x)"),
        (PolynomialCoefficientSpec(4, ("x", "cos(x)", "1")), "x^3*exp(x)"),
    ],
)
def test_smooth_equivalence_converges(spec, y):
    builder = {EvenCoefficientSpec: build_even, OddCoefficientSpec: build_odd, PolynomialCoefficientSpec: build_polynomial}[
        type(spec)
    ]
    errs = [verify_against_classical(builder(spec, make_grid(P)), spec, y) for P in (201, 401)]
    assert errs[1] < 1e-2
    assert np.log2(errs[0] / errs[1]) >= 1


def test_pure_third_derivative_exact():
    spec = PolynomialCoefficientSpec(3, ("0", "0"))
    assert verify_against_classical(build_polynomial(spec, make_grid(401)), spec, "x^3") < 1e-8


@pytest.mark.parametrize(
    "spec,perturbed",
    [
        (
            EvenCoefficientSpec(2, ("sin(x)", "x^3"), ("0", "exp(x)")),
            EvenCoefficientSpec(2, ("sin(x)+2", "x^3+1-3*x"), ("0", "exp(x)+5")),
        ),
        (
            EvenCoefficientSpec(3, ("x", "cos(x)", "x^4"), ("0", "x", "x^2")),
            EvenCoefficientSpec(3, ("x+1", "cos(x)-2+x", "x^4+x^2-1"), ("0", "x-4", "x^2+3*x")),
        ),
        (
            OddCoefficientSpec(2, "1+x", "1", ("i", "x^2", "sin(x)"), ("x", "cos(x)")),
            OddCoefficientSpec(2, "1+x", "1", ("i", "x^2+7", "sin(x)+1-x"), ("x", "cos(x)+2")),
        ),
    ],
)
def test_gauge_invariance(spec, perturbed):
    builder = build_even if isinstance(spec, EvenCoefficientSpec) else build_odd
    a, b = builder(spec, G), builder(perturbed, G)
    assert np.max(np.abs(a.kernel.values - b.kernel.values)) <= 1e-10


def test_remark_diagonal_vanishing():
    even = build_even(EvenCoefficientSpec(2, ("sin(x)", "x^2"), ("0", "x")), G)
    odd = build_odd(OddCoefficientSpec(1, "1+x", "1", ("i", "x^2"), ("sin(x)",)), G)
    assert even.kernel.diagonal_zero and odd.kernel.diagonal_zero
    off = build_even(EvenCoefficientSpec(1, ("0",), ("x",)), G)
    assert not off.kernel.diagonal_zero


def test_shift():
    form = build_raw(G, 1, 2, "0")
    assert shift(form, 0) is form
    s = shift(form, 1.0)
    np.testing.assert_allclose(s.kernel.values, np.tril((X - T) ** 2 / 2))
    np.testing.assert_allclose(s.rank_part[1].values, G.nodes**2 / 2)
    with pytest.raises(IneligibleFormError):
        shift(build_odd(OddCoefficientSpec(0, "3", "0", ("0",), ()), G), 1.0)


def test_shift_solves_shifted_equation():
    # l y = -a y  <=>  shifted form has B~ y^(n) + C~ y constant
    g = make_grid(401)
    a = 4.0
    form = shift(build_raw(g, 1, 1, "0"), a)
    y = np.cos(2 * g.nodes)  # y'' = -4 y
    out = apply_B_plus_C(form, SampledFunction(g, -2 * np.sin(2 * g.nodes)), [1.0])
    assert np.max(np.abs(out.values - out.values[0])) < 1e-4
    del y


def test_raw_form_defaults():
    form = build_raw(G, 2, 1, "x-t")
    assert len(form.rank_part) == 1 and form.multiplier_is_identity
    with pytest.raises(ValueError):
        build_raw(G, 0, 1, "0")
    assert form.header() == {"m": 2, "n": 1, "provenance": "raw", "multiplier_is_identity": True}
