"""Coefficient data of singular differential expressions.

Distribution-valued coefficients never appear directly: the even and odd
expressions are described by regular antiderivatives ``P_k``, ``Q_k`` and
the polynomial form by its (integrable) coefficients ``p_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .expressions import Expression, ExpressionError, parse
from .quadrature import Grid, GridMismatchError, SampledFunction


@dataclass(frozen=True)
class FunctionDescriptor:
    """Either a closed-form expression of ``x`` or samples on a fixed grid."""

    expression: Expression | None = None
    samples: SampledFunction | None = None
    resample: bool = False

    def __post_init__(self):
        if (self.expression is None) == (self.samples is None):
            raise ValueError("give exactly one of expression / samples")

    @classmethod
    def of(cls, value: Union[str, complex, float, "FunctionDescriptor", SampledFunction]):
        if isinstance(value, FunctionDescriptor):
            return value
        if isinstance(value, SampledFunction):
            return cls(samples=value)
        if isinstance(value, Expression):
            return cls(expression=value)
        if isinstance(value, (int, float, complex)):
            value = _const_text(complex(value))
        return cls(expression=parse(str(value)))

    @property
    def kind(self) -> str:
        return "closed-form" if self.expression is not None else "sampled"

    @property
    def text(self) -> str:
        return self.expression.text if self.expression is not None else "<sampled>"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.expression is None:
            raise ExpressionError("sampled descriptor has no pointwise evaluator")
        return self.expression(x)

    def is_zero(self, grid: Grid, tol: float = 1e-14) -> bool:
        return bool(np.max(np.abs(evaluate(self, grid).values)) <= tol)

    def is_continuous(self) -> bool:
        """Structural continuity on [0, 1]: probes both sides of every step."""
        if self.expression is None:
            v = self.samples.values
            h = self.samples.grid.h
            # sampled data: adjacent jumps must shrink like h
            return bool(np.max(np.abs(np.diff(v)), initial=0.0) <= 50 * h * (1 + np.max(np.abs(v))))
        if not self.expression.has_step:
            return True
        probe = np.linspace(0.0, 1.0, 4001)
        eps = 1e-9
        locations = []
        for arg in self.expression.step_arguments():
            a = arg(probe).real
            locations.extend(probe[np.abs(a) <= 1e-12])
            for k in np.nonzero(np.sign(a[:-1]) * np.sign(a[1:]) < 0)[0]:
                lo, hi = probe[k], probe[k + 1]
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if np.sign(arg(np.array([mid])).real[0]) == np.sign(a[k]):
                        lo = mid
                    else:
                        hi = mid
                locations.append(0.5 * (lo + hi))
        for c in locations:
            pts = np.clip(np.array([c - eps, c + eps]), 0.0, 1.0)
            if pts[0] == pts[1]:
                continue
            left, right = self.expression(pts)
            if abs(left - right) > 1e-6:
                return False
        return True


def _const_text(c: complex) -> str:
    if c.imag == 0:
        return repr(c.real) if c.real >= 0 else f"0-{-c.real!r}"
    return f"({c.real!r})+({c.imag!r})*i".replace("(-", "(0-")


def evaluate(descriptor, grid: Grid) -> SampledFunction:
    """Sample a descriptor at the grid nodes (steps take right limits)."""
    d = FunctionDescriptor.of(descriptor)
    if d.expression is not None:
        return SampledFunction(grid, d.expression(grid.nodes))
    s = d.samples
    if s.grid.same_as(grid):
        return s
    if not d.resample:
        raise GridMismatchError("sampled descriptor lives on another grid")
    re = np.interp(grid.nodes, s.grid.nodes, s.values.real)
    im = np.interp(grid.nodes, s.grid.nodes, s.values.imag)
    return SampledFunction(grid, re + 1j * im)


def _descriptors(seq) -> tuple:
    return tuple(FunctionDescriptor.of(v) for v in seq)


@dataclass(frozen=True)
class EvenCoefficientSpec:
    """Order ``2n``: weight ``b`` with ``b^2 = p_0``, ``P[k-1] = P_k`` (k = 1..n)
    and ``Q[k] = Q_k`` (k = 0..n-1)."""

    n: int
    P: tuple
    Q: tuple
    weight_b: FunctionDescriptor = field(default_factory=lambda: FunctionDescriptor.of(1.0))

    def __post_init__(self):
        object.__setattr__(self, "P", _descriptors(self.P))
        object.__setattr__(self, "Q", _descriptors(self.Q))
        object.__setattr__(self, "weight_b", FunctionDescriptor.of(self.weight_b))
        if self.n < 1:
            raise ValueError("even order needs n >= 1")
        if len(self.P) != self.n or len(self.Q) != self.n:
            raise ValueError("P and Q must both hold n descriptors")

    @property
    def order(self) -> int:
        return 2 * self.n


@dataclass(frozen=True)
class OddCoefficientSpec:
    """Order ``2n+1``: ``P[k] = P_k`` (k = 0..n, ``P_0 = p_0``),
    ``Q[k-1] = Q_k`` (k = 1..n), plus ``q0`` and ``q0_prime`` (= ``Q_0``)."""

    n: int
    q0: FunctionDescriptor
    q0_prime: FunctionDescriptor
    P: tuple
    Q: tuple

    def __post_init__(self):
        for name in ("q0", "q0_prime"):
            object.__setattr__(self, name, FunctionDescriptor.of(getattr(self, name)))
        object.__setattr__(self, "P", _descriptors(self.P))
        object.__setattr__(self, "Q", _descriptors(self.Q))
        if self.n < 0:
            raise ValueError("odd order needs n >= 0")
        if len(self.P) != self.n + 1 or len(self.Q) != self.n:
            raise ValueError("odd spec needs n+1 P descriptors and n Q descriptors")

    @property
    def order(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True)
class PolynomialCoefficientSpec:
    """``y^(N) + p_{N-2} y^(N-2) + ... + p_0 y``; ``p[j] = p_j``."""

    N: int
    p: tuple

    def __post_init__(self):
        object.__setattr__(self, "p", _descriptors(self.p))
        if self.N < 3:
            raise ValueError("polynomial form needs N >= 3")
        if len(self.p) != self.N - 1:
            raise ValueError("polynomial form needs N-1 coefficients")

    @property
    def order(self) -> int:
        return self.N


CoefficientSpec = Union[EvenCoefficientSpec, OddCoefficientSpec, PolynomialCoefficientSpec]


@dataclass
class Diagnostics:
    kind: str
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ok": self.ok,
            "errors": list(self.errors),
            "warnings": list(self.warnings),
            "values": dict(self.values),
            "flags": dict(self.flags),
        }


def _safe_eval(d: FunctionDescriptor, grid: Grid, label: str, diag: Diagnostics):
    try:
        return evaluate(d, grid).values
    except (ExpressionError, GridMismatchError) as exc:
        diag.errors.append(f"{label}: {exc}")
        return None


def validate_spec(spec: CoefficientSpec, grid: Grid) -> Diagnostics:
    """Collect structural diagnostics; never raises on bad coefficient data."""
    if isinstance(spec, EvenCoefficientSpec):
        diag = Diagnostics("even")
        b = _safe_eval(spec.weight_b, grid, "weight_b", diag)
        if b is not None:
            b2 = np.abs(b**2)
            diag.values["b2_min"] = float(b2.min())
            diag.values["b2_max"] = float(b2.max())
            if b2.min() == 0:
                diag.errors.append("b^2 vanishes on the grid")
            diag.flags["multiplier_is_identity"] = bool(np.max(np.abs(b**2 - 1)) <= 1e-12)
        for k, d in enumerate(spec.P, start=1):
            _safe_eval(d, grid, f"P_{k}", diag)
        for k, d in enumerate(spec.Q):
            _safe_eval(d, grid, f"Q_{k}", diag)
        q0_zero = not diag.errors and spec.Q[0].is_zero(grid)
        continuous = all(d.is_continuous() for d in spec.P + spec.Q[1:])
        diag.flags["q0_antiderivative_zero"] = bool(q0_zero)
        diag.flags["antiderivatives_continuous"] = continuous
        diag.flags["diagonal_vanishing_kernel"] = bool(q0_zero and continuous)
        return diag

    if isinstance(spec, OddCoefficientSpec):
        diag = Diagnostics("odd")
        q0 = _safe_eval(spec.q0, grid, "q0", diag)
        q0p = _safe_eval(spec.q0_prime, grid, "q0_prime", diag)
        P = [_safe_eval(d, grid, f"P_{k}", diag) for k, d in enumerate(spec.P)]
        for k, d in enumerate(spec.Q, start=1):
            _safe_eval(d, grid, f"Q_{k}", diag)
        if q0 is not None:
            mn = float(np.min(np.abs(q0)))
            diag.values["q0_min_abs"] = mn
            if mn == 0 or mn < 1e-12:
                diag.errors.append("q0 vanishes on the grid")
            diag.flags["multiplier_is_identity"] = bool(np.max(np.abs(2j * q0 - 1)) <= 1e-12)
        gauge = False
        if q0p is not None and P[0] is not None:
            gauge = bool(np.max(np.abs(P[0] - 1j * q0p)) <= 1e-12)
        continuous = all(d.is_continuous() for d in spec.P[1:] + spec.Q)
        diag.flags["p0_equals_i_q0_prime"] = gauge
        diag.flags["antiderivatives_continuous"] = continuous
        diag.flags["diagonal_vanishing_kernel"] = bool(gauge and continuous)
        return diag

    diag = Diagnostics("polynomial")
    for j, d in enumerate(spec.p):
        _safe_eval(d, grid, f"p_{j}", diag)
    diag.flags["multiplier_is_identity"] = True
    diag.flags["diagonal_vanishing_kernel"] = True
    return diag
