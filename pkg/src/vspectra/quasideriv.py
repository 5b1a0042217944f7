"""Shin-Zettl matrices, their resolvent and the change between two
regularizations of the same expression.

A regularization writes ``l y`` as ``Y' - Q(x) Y = (0, ..., 0, l y)``
with ``Y = (y^[0], ..., y^[N-1])`` and ``y^[0] = y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import Grid, GridMismatchError, SampledFunction


class DimensionMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ShinZettlMatrix:
    """Matrix function sampled as ``values[i] = Q(x_i)`` (shape ``P x N x N``)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 3 or v.shape[0] != self.grid.size or v.shape[1] != v.shape[2]:
            raise ValueError("matrix samples must have shape (points, N, N)")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix entries must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_entries(cls, grid: Grid, entries) -> "ShinZettlMatrix":
        """Build from a square nested list of sampled functions / arrays."""
        N = len(entries)
        vals = np.zeros((grid.size, N, N), dtype=complex)
        for r, row in enumerate(entries):
            if len(row) != N:
                raise DimensionMismatchError("matrix must be square")
            for c, e in enumerate(row):
                vals[:, r, c] = e.values if isinstance(e, SampledFunction) else e
        return cls(grid, vals)

    def __sub__(self, other: "ShinZettlMatrix") -> "ShinZettlMatrix":
        _check(self, other)
        return ShinZettlMatrix(self.grid, self.values - other.values)


def _check(a: ShinZettlMatrix, b: ShinZettlMatrix):
    if a.dimension != b.dimension:
        raise DimensionMismatchError(
            f"matrices of dimension {a.dimension} and {b.dimension}"
        )
    if not a.grid.same_as(b.grid):
        raise GridMismatchError("matrices live on different grids")


@dataclass(frozen=True, eq=False)
class QuasiFrameVector:
    """Quasi-derivative vector ``values[i] = Y(x_i)`` (shape ``P x N``)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 2 or v.shape[0] != self.grid.size:
            raise ValueError("frame samples must have shape (points, N)")
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def component(self, j: int) -> SampledFunction:
        return SampledFunction(self.grid, self.values[:, j])

    def __add__(self, other: "QuasiFrameVector") -> "QuasiFrameVector":
        return QuasiFrameVector(self.grid, self.values + other.values)


def second_order_matrix(sigma1: SampledFunction, q1: SampledFunction) -> ShinZettlMatrix:
    """``[[s, 1], [q1 - s^2, -s]]`` for ``q = s' + q1``."""
    s = sigma1.values
    grid = sigma1.grid
    vals = np.zeros((grid.size, 2, 2), dtype=complex)
    vals[:, 0, 0] = s
    vals[:, 0, 1] = 1.0
    vals[:, 1, 0] = q1.values - s**2
    vals[:, 1, 1] = -s
    return ShinZettlMatrix(grid, vals)


@dataclass(frozen=True, eq=False)
class MatrixResolvent:
    """``R(x, t) = Phi(x) Phi(t)^{-1}`` with ``Phi' = Q Phi``, ``Phi(0) = E``.

    ``Phi`` comes from trapezoidal (Crank-Nicolson) steps, so ``R(., t)`` is
    the same discrete solution one gets by integrating each column from
    ``x = t``.
    """

    grid: Grid
    phi: np.ndarray = field(repr=False)
    phi_inv: np.ndarray = field(repr=False)
    x0_index: int = 0

    def __call__(self, i: int, j: int) -> np.ndarray:
        return self.phi[i] @ self.phi_inv[j]

    def dense(self) -> np.ndarray:
        """All values ``R[i, j] = R(x_i, x_j)`` (shape ``P x P x N x N``)."""
        return np.einsum("iab,jbc->ijac", self.phi, self.phi_inv)


def matrix_resolvent(Q: ShinZettlMatrix, x0_index: int = 0) -> MatrixResolvent:
    """Continuous solution of ``R(x, t) = E + int_t^x Q(s) R(s, t) ds``."""
    P, N = Q.grid.size, Q.dimension
    h = Q.grid.h
    E = np.eye(N)
    phi = np.empty((P, N, N), dtype=complex)
    phi[0] = E
    for k in range(P - 1):
        lhs = E - 0.5 * h * Q.values[k + 1]
        rhs = (E + 0.5 * h * Q.values[k]) @ phi[k]
        phi[k + 1] = np.linalg.solve(lhs, rhs)
    phi_inv = np.linalg.inv(phi)
    return MatrixResolvent(Q.grid, phi, phi_inv, x0_index % P)


def matrix_resolvent_series(Q: ShinZettlMatrix, terms: int = 40) -> np.ndarray:
    """Successive approximations ``R = sum_k R_k`` on the full square.

    Dense ``P x P x N x N`` output; small grids only.
    """
    P, N = Q.grid.size, Q.dimension
    h = Q.grid.h
    total = np.broadcast_to(np.eye(N, dtype=complex), (P, P, N, N)).copy()
    term = total.copy()
    for _ in range(terms):
        # next[i, j] = int_{x_j}^{x_i} Q(s) term[s, j] ds (signed trapezoid)
        integrand = np.einsum("sab,sjbc->sjac", Q.values, term)
        cum = np.zeros_like(integrand)
        cum[1:] = np.cumsum(0.5 * h * (integrand[1:] + integrand[:-1]), axis=0)
        nxt = cum - cum[np.arange(P), np.arange(P)][None, :, :, :]
        term = nxt
        total = total + term
        if np.max(np.abs(term)) < 1e-16:
            break
    return total


def _cumtrapz_from(values: np.ndarray, h: float, i0: int) -> np.ndarray:
    """Signed ``int_{x_i0}^{x_i}`` of samples along axis 0."""
    cum = np.zeros_like(values)
    cum[1:] = np.cumsum(0.5 * h * (values[1:] + values[:-1]), axis=0)
    return cum - cum[i0]


def transform_frames(
    Y_tilde: QuasiFrameVector,
    Q: ShinZettlMatrix,
    Q_tilde: ShinZettlMatrix,
    x0_index: int = 0,
    Y_hat_x0=None,
) -> QuasiFrameVector:
    """Difference ``Y - Y~`` of the quasi-derivative vectors of two
    regularizations, given ``Y~`` and the difference at ``x0``.

    ``Y = Y~ + result``.
    """
    _check(Q, Q_tilde)
    if Y_tilde.dimension != Q.dimension:
        raise DimensionMismatchError("frame and matrix dimensions differ")
    if not Y_tilde.grid.same_as(Q.grid):
        raise GridMismatchError("frame and matrix live on different grids")
    grid = Q.grid
    h = grid.h
    i0 = x0_index % grid.size
    N = Q.dimension
    y0 = np.zeros(N, dtype=complex) if Y_hat_x0 is None else np.asarray(Y_hat_x0, dtype=complex)
    if y0.shape != (N,):
        raise DimensionMismatchError("initial difference has the wrong length")
    F = np.einsum("iab,ib->ia", (Q - Q_tilde).values, Y_tilde.values)
    Y0 = y0[None, :] + _cumtrapz_from(F, h, i0)
    R = matrix_resolvent(Q, i0)
    inner = np.einsum("iab,ibc,ic->ia", R.phi_inv, Q.values, Y0)
    correction = np.einsum("iab,ib->ia", R.phi, _cumtrapz_from(inner, h, i0))
    return QuasiFrameVector(grid, Y0 + correction)


def solve_regularized(Q: ShinZettlMatrix, f: SampledFunction, Y_at_0) -> QuasiFrameVector:
    """``Y' = Q Y + (0, ..., 0, f)`` from ``Y(0)`` by trapezoidal steps."""
    P, N = Q.grid.size, Q.dimension
    h = Q.grid.h
    E = np.eye(N)
    out = np.empty((P, N), dtype=complex)
    out[0] = Y_at_0
    e = np.zeros(N)
    e[-1] = 1.0
    for k in range(P - 1):
        lhs = E - 0.5 * h * Q.values[k + 1]
        rhs = out[k] + 0.5 * h * (Q.values[k] @ out[k] + e * (f.values[k] + f.values[k + 1]))
        out[k + 1] = np.linalg.solve(lhs, rhs)
    return QuasiFrameVector(Q.grid, out)
