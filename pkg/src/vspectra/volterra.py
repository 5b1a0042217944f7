"""Lower-triangular (Volterra) kernels on a uniform grid.

Kernels are stored as dense ``P x P`` complex arrays whose entry ``(i, j)``
is ``K(x_i, t_j)`` for ``j <= i`` and zero above the diagonal.  Every
integral over a triangle uses the trapezoid rule on the grid nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial
from pathlib import Path

import numpy as np

from .quadrature import Grid, GridMismatchError, SampledFunction, power_kernel

DIAGONAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TriangularKernel:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.tril(np.asarray(self.values, dtype=complex))
        if v.shape != (self.grid.size, self.grid.size):
            raise ValueError("kernel array does not match the grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "TriangularKernel":
        return cls(grid, np.zeros((grid.size, grid.size), dtype=complex))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "TriangularKernel":
        """Sample ``func(x, t)`` on the lower triangle (broadcast arrays)."""
        x = grid.nodes
        vals = np.broadcast_to(func(x[:, None], x[None, :]), (grid.size, grid.size))
        return cls(grid, np.array(vals, dtype=complex))

    @property
    def diagonal_zero(self) -> bool:
        return bool(np.max(np.abs(np.diag(self.values))) < DIAGONAL_TOL)

    def matrix(self) -> np.ndarray:
        """Nystrom matrix of the Volterra operator (trapezoid on [0, x_i])."""
        return self.grid.triangle_weights() * self.values

    def __add__(self, other: "TriangularKernel") -> "TriangularKernel":
        _same_grid(self.grid, other.grid)
        return TriangularKernel(self.grid, self.values + other.values)

    def __sub__(self, other: "TriangularKernel") -> "TriangularKernel":
        _same_grid(self.grid, other.grid)
        return TriangularKernel(self.grid, self.values - other.values)

    def __mul__(self, scalar) -> "TriangularKernel":
        return TriangularKernel(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _same_grid(a: Grid, b: Grid):
    if not a.same_as(b):
        raise GridMismatchError("kernel and function live on different grids")


def apply(K: TriangularKernel, f: SampledFunction) -> SampledFunction:
    """``(Kf)(x_i) = int_0^{x_i} K(x_i, t) f(t) dt``."""
    _same_grid(K.grid, f.grid)
    return SampledFunction(K.grid, K.matrix() @ f.values)


def _real_view(A: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(A) and not np.any(A.imag):
        return np.ascontiguousarray(A.real)
    return A


def _matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``A @ B`` that stays in real arithmetic for real factors."""
    A, B = _real_view(A), _real_view(B)
    c = np.ascontiguousarray
    if np.iscomplexobj(A) and not np.iscomplexobj(B):
        return c(A.real) @ B + 1j * (c(A.imag) @ B)
    if np.iscomplexobj(B) and not np.iscomplexobj(A):
        return A @ c(B.real) + 1j * (A @ c(B.imag))
    return A @ B


def triangle_product(A: np.ndarray, B: np.ndarray, h: float) -> np.ndarray:
    """Samples of ``int_t^x A(x, tau) B(tau, t) dtau`` for lower-triangular A, B."""
    A = np.tril(A)
    B = np.tril(B)
    if not np.any(A) or not np.any(B):
        return np.zeros(np.broadcast_shapes(A.shape, B.shape), dtype=complex)
    C = h * _matmul(A, B).astype(complex)
    C -= 0.5 * h * A * np.diag(B)[None, :]
    C -= 0.5 * h * np.diag(A)[:, None] * B
    return np.tril(C, -1)


def compose(K: TriangularKernel, L: TriangularKernel) -> TriangularKernel:
    """Kernel of the operator product ``K L``."""
    _same_grid(K.grid, L.grid)
    return TriangularKernel(K.grid, triangle_product(K.values, L.values, K.grid.h))


def resolvent(K: TriangularKernel) -> TriangularKernel:
    """Resolvent kernel: ``K + R + int_t^x K(x, s) R(s, t) ds = 0``.

    Solved row by row with trapezoid weights on ``[t_j, x_i]`` (forward
    substitution; the ``(i, i)`` coupling enters through ``1 + h K_ii / 2``).
    """
    Kv = _real_view(K.values)
    P = K.grid.size
    h = K.grid.h
    R = np.zeros((P, P), dtype=Kv.dtype)
    if not np.any(Kv):
        return TriangularKernel(K.grid, R)
    diag = -np.diag(Kv).copy()
    R[0, 0] = diag[0]
    for i in range(1, P):
        Ki = Kv[i, :i]
        s = Ki @ R[:i, :i]
        R[i, :i] = (-Ki - h * s + 0.5 * h * Ki * diag[:i]) / (1.0 + 0.5 * h * Kv[i, i])
        R[i, i] = diag[i]
    return TriangularKernel(K.grid, R)


def resolvent_neumann(K: TriangularKernel, terms: int = 60, tol: float = 1e-15) -> TriangularKernel:
    """Resolvent by the alternating Neumann series ``R = sum (-1)^k K^{(k)}``.

    Independent of :func:`resolvent`; meant for small grids.
    """
    h = K.grid.h
    term = -K.values.copy()
    total = term.copy()
    for _ in range(terms):
        term = -triangle_product(K.values, term, h)
        # diagonal of iterated kernels vanishes (integral over an empty range)
        total += term
        if np.max(np.abs(term)) < tol:
            break
    return TriangularKernel(K.grid, total)


def _inner_g(R: TriangularKernel, m: int) -> np.ndarray:
    """Kernel of ``R J^m``: ``int_t^x R(x, xi) (xi - t)^{m-1}/(m-1)! dxi``."""
    return triangle_product(R.values, power_kernel(R.grid, m - 1), R.grid.h)


def m_kernel(R: TriangularKernel, m: int, n: int, *, inner=None) -> TriangularKernel:
    """Kernel of ``J^n (I + R) J^m`` from its closed double-integral form."""
    if m < 1 or n < 0:
        raise ValueError("need m >= 1 and n >= 0")
    grid = R.grid
    N = m + n
    G = _inner_g(R, m) if inner is None else inner
    if n == 0:
        return TriangularKernel(grid, power_kernel(grid, N - 1) + G)
    outer = triangle_product(power_kernel(grid, n - 1), G, grid.h)
    return TriangularKernel(grid, power_kernel(grid, N - 1) + outer)


def m_kernel_x_derivative(
    R: TriangularKernel, m: int, n: int, k: int, x_index: int = -1, *, inner=None
) -> SampledFunction:
    """``d^k/dx^k M(x, t)`` at ``x = x_eval`` as a function of ``t``.

    The outer power ``(x - tau)^{n-1}`` is differentiated in closed form;
    ``inner`` may pass a precomputed ``R J^m`` kernel.
    """
    if not 0 <= k <= n - 1:
        raise ValueError("derivative order must satisfy 0 <= k <= n-1")
    grid = R.grid
    P = grid.size
    i = x_index % P
    x = grid.nodes
    N = m + n
    G = _inner_g(R, m) if inner is None else inner
    t = x[: i + 1]
    out = np.zeros(P, dtype=complex)
    out[: i + 1] = (x[i] - t) ** (N - 1 - k) / factorial(N - 1 - k)
    p = n - 1 - k
    weights_row = (x[i] - t) ** p / factorial(p)
    h = grid.h
    # trapezoid over tau in [t_j, x_i] of weights_row[tau] * G[tau, t_j]
    cum = h * (weights_row @ G[: i + 1, : i + 1])
    cum -= 0.5 * h * weights_row * np.diag(G)[: i + 1]
    cum -= 0.5 * h * weights_row[i] * G[i, : i + 1]
    cum[i] = 0.0
    out[: i + 1] += cum
    return SampledFunction(grid, out)


def write_kernel_csv(K: TriangularKernel, path) -> None:
    """Dump the lower triangle as ``i,j,x,t,re,im`` rows."""
    x = K.grid.nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "t", "re", "im"])
        for i in range(K.grid.size):
            for j in range(i + 1):
                v = K.values[i, j]
                w.writerow([i, j, repr(float(x[i])), repr(float(x[j])), repr(float(v.real)), repr(float(v.imag))])


def read_kernel_csv(path, grid: Grid) -> TriangularKernel:
    vals = np.zeros((grid.size, grid.size), dtype=complex)
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["i", "j", "x", "t", "re", "im"]:
            raise ValueError("kernel CSV must have header i,j,x,t,re,im")
        for row in reader:
            i, j = int(row["i"]), int(row["j"])
            if not (0 <= j <= i < grid.size):
                raise ValueError(f"kernel entry ({i},{j}) outside the grid triangle")
            vals[i, j] = complex(float(row["re"]), float(row["im"]))
    return TriangularKernel(grid, vals)
