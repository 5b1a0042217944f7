"""Operator form ``l y = d^m/dx^m (B y^(n) + C y)`` of singular expressions.

``B = beta(x) I + K`` with a Volterra kernel ``K`` and
``C y = sum_nu y^(nu)(0) u_nu(x)``.  Builders exist for the even-order
normal form (antiderivatives ``P_k``, ``Q_k``), the odd-order normal form
and the polynomial form ``y^(N) + p_{N-2} y^(N-2) + ... + p_0 y``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import comb, factorial

import numpy as np
import sympy as sp

from .coefficients import (
    EvenCoefficientSpec,
    FunctionDescriptor,
    OddCoefficientSpec,
    PolynomialCoefficientSpec,
    evaluate,
)
from .expressions import Expression, ExpressionError, parse
from .quadrature import Grid, SampledFunction, iterated_integral, power_kernel
from .volterra import DIAGONAL_TOL, TriangularKernel, apply

IDENTITY_TOL = 1e-12
GAUSS_POINTS = 8


class IneligibleFormError(ValueError):
    """Operator form outside the hypotheses of the spectral pipeline."""


@dataclass(frozen=True)
class OperatorForm:
    m: int
    n: int
    multiplier: SampledFunction
    kernel: TriangularKernel
    rank_part: tuple
    provenance: str
    kernel_continuous: bool = True

    def __post_init__(self):
        if self.m < 1 or self.n < 0:
            raise ValueError("need m >= 1 and n >= 0")
        if len(self.rank_part) != self.n:
            raise ValueError("rank part must hold exactly n functions")
        object.__setattr__(self, "rank_part", tuple(self.rank_part))

    @property
    def N(self) -> int:
        return self.m + self.n

    @property
    def grid(self) -> Grid:
        return self.kernel.grid

    @property
    def multiplier_is_identity(self) -> bool:
        return bool(np.max(np.abs(self.multiplier.values - 1.0)) <= IDENTITY_TOL)

    @property
    def spectral_eligible(self) -> bool:
        return self.multiplier_is_identity and self.kernel_continuous and self.kernel.diagonal_zero

    def require_identity_multiplier(self):
        if not self.multiplier_is_identity:
            raise IneligibleFormError(
                "operator form has B != I + K (multiplier is not identically 1)"
            )

    def header(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "provenance": self.provenance,
            "multiplier_is_identity": self.multiplier_is_identity,
        }


# ---------------------------------------------------------------------------
# convolution-type kernel terms
# ---------------------------------------------------------------------------

def _moments(F: FunctionDescriptor, grid: Grid, rmax: int) -> np.ndarray:
    """``M[r, i] = int_0^{x_i} F(tau) tau^r dtau`` for r = 0..rmax."""
    x = grid.nodes
    if F.expression is not None:
        gx, gw = np.polynomial.legendre.leggauss(GAUSS_POINTS)
        a, b = x[:-1], x[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        tau = mid[:, None] + half[:, None] * gx[None, :]
        vals = F.expression(tau) * (half[:, None] * gw[None, :])
        out = np.zeros((rmax + 1, x.size), dtype=complex)
        for r in range(rmax + 1):
            out[r, 1:] = np.cumsum(np.sum(vals * tau**r, axis=1))
        return out
    f = evaluate(F, grid).values
    h = grid.h
    out = np.zeros((rmax + 1, x.size), dtype=complex)
    for r in range(rmax + 1):
        g = f * x**r
        out[r, 1:] = np.cumsum(0.5 * h * (g[1:] + g[:-1]))
    return out


def convolution_kernel(F, grid: Grid, a: int, b: int) -> np.ndarray:
    """``int_t^x (x-tau)^a/a! F(tau) (tau-t)^b/b! dtau`` on the lower triangle.

    Expanded in powers of ``tau`` and evaluated from cumulative moments of
    ``F`` (composite Gauss-Legendre for closed forms).
    """
    F = FunctionDescriptor.of(F)
    x = grid.nodes
    Mom = _moments(F, grid, a + b)
    X = x[:, None]
    T = x[None, :]
    out = np.zeros((grid.size, grid.size), dtype=complex)
    for p in range(a + 1):
        for q in range(b + 1):
            c = comb(a, p) * comb(b, q) * (-1) ** (p + b - q)
            r = p + q
            diff = Mom[r][:, None] - Mom[r][None, :]
            out += c * X ** (a - p) * T ** (b - q) * diff
    return np.tril(out, -1) / (factorial(a) * factorial(b))


def _sample(d, grid) -> np.ndarray:
    return evaluate(d, grid).values


def _J(f: np.ndarray, grid: Grid, s: int) -> np.ndarray:
    if s == 0:
        return f
    return iterated_integral(SampledFunction(grid, f), s).values


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_even(spec: EvenCoefficientSpec, grid: Grid) -> OperatorForm:
    """Order ``2n`` normal form; ``m = n`` and ``B = b^2 I + K``."""
    n = spec.n
    x = grid.nodes
    P = {k: spec.P[k - 1] for k in range(1, n + 1)}
    Q = {k: spec.Q[k] for k in range(n)}
    Ps = {k: _sample(d, grid) for k, d in P.items()}
    Qs = {k: _sample(d, grid) for k, d in Q.items()}

    K = np.zeros((grid.size, grid.size), dtype=complex)
    for k in range(1, n + 1):
        bx = Ps[k] + 1j * Qs[k - 1]
        bt = Ps[k] - 1j * Qs[k - 1]
        K += power_kernel(grid, k - 1) * (bx[:, None] + (-1) ** k * bt[None, :])
        for nu in range(1, k):
            a, b = nu - 1, k - 1 - nu
            K += (-1) ** nu * comb(k, nu) * convolution_kernel(P[k], grid, a, b)
            cq = comb(k - 1, nu) - comb(k - 1, nu - 1)
            if cq:
                K += (-1) ** nu * 1j * cq * convolution_kernel(Q[k - 1], grid, a, b)

    u = [np.zeros(grid.size, dtype=complex) for _ in range(n)]
    for k in range(1, n + 1):
        for s in range(k + 1):
            c = (-1) ** s * comb(k, s)
            for j in range(n - k + s, n):
                e = j - n + k - s
                u[j] += c * _J(x**e * Ps[k], grid, s) / factorial(e)
    for k in range(n):
        for s in range(k + 1):
            c = 1j * (-1) ** s * comb(k, s)
            for j in range(max(n - k + s - 1, 0), n):
                e = j - n + k - s + 1
                u[j] += c * _J(x**e * Qs[k], grid, s) / factorial(e)
            for j in range(n - k + s, n):
                e = j - n + k - s
                u[j] += c * _J(x**e * Qs[k], grid, s + 1) / factorial(e)

    b2 = _sample(spec.weight_b, grid) ** 2
    continuous = all(d.is_continuous() for d in spec.P + spec.Q) and spec.weight_b.is_continuous()
    return OperatorForm(
        m=n,
        n=n,
        multiplier=SampledFunction(grid, b2),
        kernel=TriangularKernel(grid, K),
        rank_part=tuple(SampledFunction(grid, v) for v in u),
        provenance="even",
        kernel_continuous=continuous,
    )


def build_odd(spec: OddCoefficientSpec, grid: Grid) -> OperatorForm:
    """Order ``2n+1`` normal form; ``m = n+1`` and ``B = 2i q0 I + K``."""
    n = spec.n
    x = grid.nodes
    q0 = _sample(spec.q0, grid)
    if np.min(np.abs(q0)) < 1e-12:
        raise ExpressionError("q0 vanishes on the grid")
    P = {k: spec.P[k] for k in range(n + 1)}
    Q = {0: spec.q0_prime}
    Q.update({k: spec.Q[k - 1] for k in range(1, n + 1)})
    Ps = {k: _sample(d, grid) for k, d in P.items()}
    Qs = {k: _sample(d, grid) for k, d in Q.items()}

    K = np.zeros((grid.size, grid.size), dtype=complex)
    for k in range(n + 1):
        K += (-1) ** k * power_kernel(grid, k) * (Ps[k] - 1j * Qs[k])[None, :]
    for k in range(1, n + 1):
        K += convolution_kernel(P[k], grid, 0, k - 1)
        K += 1j * convolution_kernel(Q[k], grid, 0, k - 1)
    for k in range(2, n + 1):
        for nu in range(1, k):
            a, b = nu, k - 1 - nu
            K += (-1) ** nu * comb(k, nu) * convolution_kernel(P[k], grid, a, b)
            cq = comb(k - 1, nu) - comb(k - 1, nu - 1)
            if cq:
                K += (-1) ** nu * 1j * cq * convolution_kernel(Q[k], grid, a, b)

    u = [np.zeros(grid.size, dtype=complex) for _ in range(n)]
    for k in range(1, n + 1):
        for s in range(k):
            c = 1j * (-1) ** s * comb(k - 1, s)
            for j in range(n - k + s + 1, n):
                e = j - n + k - s - 1
                u[j] += c * _J(x**e * Qs[k], grid, s + 2) / factorial(e)
            for j in range(n - k + s, n):
                e = j - n + k - s
                u[j] += c * _J(x**e * Qs[k], grid, s + 1) / factorial(e)
    for k in range(n + 1):
        for s in range(k + 1):
            c = (-1) ** s * comb(k, s)
            for j in range(n - k + s, n):
                e = j - n + k - s
                u[j] += c * _J(x**e * Ps[k], grid, s + 1) / factorial(e)

    continuous = all(d.is_continuous() for d in spec.P + spec.Q + (spec.q0_prime, spec.q0))
    return OperatorForm(
        m=n + 1,
        n=n,
        multiplier=SampledFunction(grid, 2j * q0),
        kernel=TriangularKernel(grid, K),
        rank_part=tuple(SampledFunction(grid, v) for v in u),
        provenance="odd",
        kernel_continuous=continuous,
    )


def build_polynomial(spec: PolynomialCoefficientSpec, grid: Grid) -> OperatorForm:
    """Write ``y^(N) + sum_j p_j y^(j)`` as ``d/dx((I+K) y^(N-1) + C y)``.

    From ``d/dx[y^(N-1) + sum_j J(p_j y^(j))]`` with
    ``y^(j) = sum_{s>=j} y^(s)(0) x^{s-j}/(s-j)! + J^{N-1-j} y^(N-1)``::

        K(x, t) = sum_j int_t^x p_j(tau) (tau-t)^{N-2-j}/(N-2-j)! dtau
        u_s(x)  = sum_{j<=s} J(p_j x^{s-j}/(s-j)!)
    """
    N = spec.N
    n = N - 1
    x = grid.nodes
    K = np.zeros((grid.size, grid.size), dtype=complex)
    for j, pj in enumerate(spec.p):
        K += convolution_kernel(pj, grid, 0, N - 2 - j)
    ps = [_sample(d, grid) for d in spec.p]
    u = []
    for s in range(n):
        acc = np.zeros(grid.size, dtype=complex)
        for j in range(s + 1):
            acc += ps[j] * x ** (s - j) / factorial(s - j)
        u.append(SampledFunction(grid, _J(acc, grid, 1)))
    return OperatorForm(
        m=1,
        n=n,
        multiplier=SampledFunction(grid, np.ones(grid.size)),
        kernel=TriangularKernel(grid, K),
        rank_part=tuple(u),
        provenance="polynomial",
        kernel_continuous=True,
    )


def build_raw(grid: Grid, m: int, n: int, kernel, u=(), multiplier="1") -> OperatorForm:
    """Form from a user kernel ``K(x, t)`` (expression in x, t) and ``u_nu``."""
    if isinstance(kernel, str):
        kernel = parse(kernel, ("x", "t"))
    if isinstance(kernel, Expression):
        expr = kernel
        Kv = TriangularKernel.from_function(grid, lambda X, T: expr(X, T))
        continuous = not expr.has_step
    elif isinstance(kernel, TriangularKernel):
        Kv, continuous = kernel, True
    else:
        Kv = TriangularKernel(grid, np.asarray(kernel))
        continuous = True
    if not u:
        u = ("0",) * n
    us = tuple(evaluate(FunctionDescriptor.of(v), grid) for v in u)
    mult = evaluate(FunctionDescriptor.of(multiplier), grid)
    return OperatorForm(m, n, mult, Kv, us, "raw", continuous)


def shift(form: OperatorForm, a: complex) -> OperatorForm:
    """Form of ``l y + a y``: ``K + a J^N`` and ``u_nu + a x^{nu+m}/(nu+m)!``."""
    form.require_identity_multiplier()
    if a == 0:
        return form
    grid = form.grid
    x = grid.nodes
    K = form.kernel.values + a * power_kernel(grid, form.N - 1)
    u = tuple(
        SampledFunction(grid, uv.values + a * x ** (nu + form.m) / factorial(nu + form.m))
        for nu, uv in enumerate(form.rank_part)
    )
    return replace(form, kernel=TriangularKernel(grid, K), rank_part=u)


def apply_B_plus_C(form: OperatorForm, yn: SampledFunction, initial) -> SampledFunction:
    """``B y^(n) + C y`` from samples of ``y^(n)`` and ``y^(nu)(0)``, nu < n."""
    out = form.multiplier * yn + apply(form.kernel, yn)
    for nu, u in enumerate(form.rank_part):
        out = out + initial[nu] * u
    return out


# ---------------------------------------------------------------------------
# smooth-coefficient oracle
# ---------------------------------------------------------------------------

_x = sp.Symbol("x", real=True)


def _sym(d) -> sp.Expr:
    if isinstance(d, str):
        return parse(d).to_sympy()
    d = FunctionDescriptor.of(d)
    if d.expression is None:
        raise ValueError("classical oracle needs closed-form coefficients")
    return d.expression.to_sympy()


def classical_expression(spec, y: sp.Expr, smooth_coefficients: dict | None = None) -> sp.Expr:
    """The differential expression applied to ``y`` by symbolic calculus."""
    D = lambda f, k: sp.diff(f, _x, k) if k else f  # noqa: E731
    sc = smooth_coefficients or {}
    if isinstance(spec, EvenCoefficientSpec):
        n = spec.n
        p = sc.get("p") or [_sym(spec.weight_b) ** 2] + [D(_sym(spec.P[k - 1]), k) for k in range(1, n + 1)]
        q = sc.get("q") or [D(_sym(spec.Q[k]), k) for k in range(n)]
        p = [_sym(v) if isinstance(v, str) else v for v in p]
        q = [_sym(v) if isinstance(v, str) else v for v in q]
        out = sum(D(p[k] * D(y, n - k), n - k) for k in range(n + 1))
        out += sp.I * sum(
            D(q[k] * D(y, n - k - 1), n - k) + D(q[k] * D(y, n - k), n - k - 1) for k in range(n)
        )
        return out
    if isinstance(spec, OddCoefficientSpec):
        n = spec.n
        p = sc.get("p") or [_sym(spec.P[0])] + [D(_sym(spec.P[k]), k) for k in range(1, n + 1)]
        q = sc.get("q") or [_sym(spec.q0)] + [D(_sym(spec.Q[k - 1]), k - 1) for k in range(1, n + 1)]
        p = [_sym(v) if isinstance(v, str) else v for v in p]
        q = [_sym(v) if isinstance(v, str) else v for v in q]
        out = sp.I * sum(
            D(q[k] * D(y, n - k + 1), n - k) + D(q[k] * D(y, n - k), n - k + 1) for k in range(n + 1)
        )
        out += sum(D(p[k] * D(y, n - k), n - k) for k in range(n + 1))
        return out
    if isinstance(spec, PolynomialCoefficientSpec):
        p = sc.get("p") or [_sym(d) for d in spec.p]
        p = [_sym(v) if isinstance(v, str) else v for v in p]
        return D(y, spec.N) + sum(p[j] * D(y, j) for j in range(spec.N - 1))
    raise TypeError(f"unsupported spec {type(spec).__name__}")


def _numeric(expr: sp.Expr, x: np.ndarray) -> np.ndarray:
    f = sp.lambdify(_x, expr, modules=["numpy"])
    return np.broadcast_to(np.asarray(f(x), dtype=complex), x.shape).copy()


def verify_against_classical(
    form: OperatorForm,
    spec,
    y,
    smooth_coefficients: dict | None = None,
    boundary_layer: int = 3,
) -> float:
    """Max interior gap between the classical ``l y`` and the operator form.

    The operator side differentiates ``B y^(n) + C y`` numerically ``m``
    times; ``boundary_layer`` nodes at each end are excluded.
    """
    grid = form.grid
    x = grid.nodes
    if isinstance(y, Expression):
        ysym = y.to_sympy()
    elif isinstance(y, str):
        ysym = parse(y).to_sympy()
    else:
        ysym = sp.sympify(y)
    classical = _numeric(classical_expression(spec, ysym, smooth_coefficients), x)
    yn = SampledFunction(grid, _numeric(sp.diff(ysym, _x, form.n), x))
    initial = [complex(sp.N(sp.diff(ysym, _x, nu).subs(_x, 0))) for nu in range(form.n)]
    z = apply_B_plus_C(form, yn, initial).values
    for _ in range(form.m):
        z = np.gradient(z, grid.h, edge_order=2)
    sl = slice(boundary_layer, grid.size - boundary_layer)
    return float(np.max(np.abs(z[sl] - classical[sl])))
