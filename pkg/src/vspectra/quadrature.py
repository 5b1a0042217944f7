"""Uniform grids on [0, 1], sampled functions and iterated integration.

All triangular integrals ``int_0^{x_i}`` use trapezoid weights on the nodes
``x_0 .. x_i`` whatever the outer scheme of the grid is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

SCHEMES = ("uniform-trapezoid", "composite-simpson")


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    nodes: np.ndarray
    weights: np.ndarray
    panel_count: int
    scheme: str = "uniform-trapezoid"

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def h(self) -> float:
        return 1.0 / (self.size - 1)

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.size == other.size and self.scheme == other.scheme
        )

    def triangle_weights(self) -> np.ndarray:
        """Lower-triangular trapezoid weights; row ``i`` integrates over [0, x_i]."""
        return _triangle_weights(self.size)


_TRI_CACHE: dict[int, np.ndarray] = {}


def _triangle_weights(size: int) -> np.ndarray:
    W = _TRI_CACHE.get(size)
    if W is None:
        h = 1.0 / (size - 1)
        W = np.tril(np.full((size, size), h))
        W[:, 0] = h / 2
        W[np.diag_indices(size)] = h / 2
        W[0, 0] = 0.0
        W.setflags(write=False)
        _TRI_CACHE[size] = W
    return W


def make_grid(point_count: int, scheme: str = "uniform-trapezoid") -> Grid:
    """Uniform grid with the standard Newton-Cotes weights of ``scheme``.

    >>> make_grid(3).weights.tolist()
    [0.25, 0.5, 0.25]
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown quadrature scheme {scheme!r}")
    if int(point_count) != point_count or point_count < 3:
        raise ValueError("point_count must be an integer >= 3")
    point_count = int(point_count)
    nodes = np.linspace(0.0, 1.0, point_count)
    h = 1.0 / (point_count - 1)
    if scheme == "uniform-trapezoid":
        weights = np.full(point_count, h)
        weights[[0, -1]] = h / 2
        panels = point_count - 1
    else:
        if point_count % 2 == 0:
            raise ValueError("composite-simpson needs an odd point_count")
        weights = np.full(point_count, 2 * h / 3)
        weights[1::2] = 4 * h / 3
        weights[[0, -1]] = h / 3
        panels = (point_count - 1) // 2
    return Grid(nodes, weights, panels, scheme)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} values, got shape {vals.shape}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, func) -> "SampledFunction":
        vals = np.broadcast_to(np.asarray(func(grid.nodes), dtype=complex), grid.nodes.shape)
        return cls(grid, np.array(vals))

    def _check(self, other: "SampledFunction"):
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("sampled functions live on different grids")

    def __add__(self, other):
        if isinstance(other, SampledFunction):
            self._check(other)
            return SampledFunction(self.grid, self.values + other.values)
        return SampledFunction(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SampledFunction):
            self._check(other)
            return SampledFunction(self.grid, self.values - other.values)
        return SampledFunction(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, SampledFunction):
            self._check(other)
            return SampledFunction(self.grid, self.values * other.values)
        return SampledFunction(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def norm(self) -> float:
        return float(np.sqrt(inner_product(self, self).real))


@dataclass(frozen=True)
class QuasiDerivativeFrame:
    """``entries[j]`` is ``y^<j>``: ordinary derivatives for ``j < n``,
    quasi-derivatives of the operator form above that."""

    order: int
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != self.order:
            raise ValueError("frame must hold exactly `order` entries")

    def at(self, index: int) -> np.ndarray:
        """Frame vector at grid node ``index`` (or the scalars themselves)."""
        out = []
        for e in self.entries:
            out.append(e.values[index] if isinstance(e, SampledFunction) else e)
        return np.asarray(out, dtype=complex)


def power_kernel(grid: Grid, k: int) -> np.ndarray:
    """Lower-triangular samples of ``(x - t)^k / k!`` (zero above the diagonal)."""
    x = grid.nodes
    D = np.tril(x[:, None] - x[None, :])
    if k == 0:
        return np.tril(np.ones((grid.size, grid.size)))
    return D**k / factorial(k)


def iterated_integral(f: SampledFunction, k: int) -> SampledFunction:
    """``J^k f`` through its single-integral kernel ``(x-t)^{k-1}/(k-1)!``."""
    if int(k) != k or k < 1:
        raise ValueError("k must be an integer >= 1")
    k = int(k)
    grid = f.grid
    x = grid.nodes
    h = grid.h
    # trapezoid on [0, x_i] is linear in the integrand, so expanding
    # (x_i - t)^{k-1} binomially gives the same sums in O(k P)
    out = np.zeros(grid.size, dtype=complex)
    for r in range(k):
        g = x**r * f.values
        S = h * (np.cumsum(g) - 0.5 * (g[0] + g))
        S[0] = 0.0
        out += comb(k - 1, r) * (-1) ** r * x ** (k - 1 - r) * S
    return SampledFunction(grid, out / factorial(k - 1))


def integral(f: SampledFunction) -> complex:
    """``int_0^1 f`` with the grid's own weights."""
    return complex(np.dot(f.grid.weights, f.values))


def inner_product(f: SampledFunction, g: SampledFunction) -> complex:
    """L2(0, 1) pairing ``sum w f conj(g)``."""
    f._check(g)
    return complex(np.sum(f.grid.weights * f.values * np.conj(g.values)))
