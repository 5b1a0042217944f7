"""Nyström discretization of the inverse operator, root subspaces and the
completeness hypothesis checker."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .bvp import FiniteRankOperator
from .quadrature import Grid, SampledFunction
from .volterra import TriangularKernel

NOISE_FLOOR = 1e-10
CLUSTER_TOL = 1e-6
BAND = 0.1
FIT_NODES = 5
EXPONENT_SLACK = 0.3


class SpectralError(RuntimeError):
    pass


def discretize(A: FiniteRankOperator) -> np.ndarray:
    """Matrix of ``f -> A f`` acting on node values."""
    grid = A.grid
    mat = A.M.matrix().astype(complex)
    w = grid.weights
    for g, v in zip(A.g, A.v):
        mat += np.outer(g.values, w * v.values)
    return mat


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Eigenvalues ``lambda = 1/mu`` of ``L`` in order of increasing modulus.

    ``root_basis`` holds L2-orthonormal node samples whose first ``k``
    columns span the root subspaces of the first clusters, for every
    cluster boundary ``k``.  ``cluster_basis(j)`` gives the root subspace
    of cluster ``j`` alone.
    """

    grid: Grid
    eigenvalues: np.ndarray
    mu: np.ndarray
    multiplicities: tuple
    residuals: np.ndarray
    root_basis: np.ndarray = field(repr=False)
    slices: tuple = field(repr=False)
    schur: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def root_function_count(self) -> int:
        return self.root_basis.shape[1]

    def root_functions(self, m: int | None = None) -> tuple:
        cols = self.root_basis[:, :m]
        return tuple(SampledFunction(self.grid, cols[:, k]) for k in range(cols.shape[1]))

    def cluster_basis(self, j: int) -> np.ndarray:
        """Orthonormal samples spanning the root subspace of cluster ``j``."""
        s, e = self.slices[j]
        sw = np.sqrt(self.grid.weights)
        U = self.root_basis[:, :e] * sw[:, None]
        if s == 0:
            Z = U
        else:
            T = self.schur
            Y = sla.solve_sylvester(T[:s, :s], -T[s:e, s:e], -T[:s, s:e])
            Z = U @ np.vstack([Y, np.eye(e - s)])
        Q, _ = np.linalg.qr(Z)
        return Q / sw[:, None]


def _clusters(mu: np.ndarray) -> list[list[int]]:
    order = sorted(range(len(mu)), key=lambda i: (-abs(mu[i]), mu[i].real, mu[i].imag))
    groups: list[list[int]] = []
    for i in order:
        for grp in groups:
            ref = mu[grp[0]]
            if abs(mu[i] - ref) <= CLUSTER_TOL * abs(ref):
                grp.append(i)
                break
        else:
            groups.append([i])
    return groups


def spectrum(A: FiniteRankOperator, count: int | None = None) -> SpectralResult:
    """Smallest-modulus eigenvalues of ``L = A^{-1}`` with root subspaces."""
    grid = A.grid
    sw = np.sqrt(grid.weights)
    # similarity to the weighted inner product keeps Schur vectors L2-orthonormal
    S = discretize(A) * sw[:, None] / sw[None, :]
    try:
        T, U = sla.schur(S, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    diag = np.diag(T).copy()
    live = np.nonzero(np.abs(diag) > NOISE_FLOOR)[0]
    groups = _clusters(diag[live])
    groups = [[int(live[i]) for i in g] for g in groups]
    if count is not None:
        groups = groups[:count]
    # move the selected eigenvalues to the top, cluster by cluster
    pos = list(range(len(diag)))  # pos[original index] -> current position
    where = list(range(len(diag)))  # where[current position] -> original index
    filled = 0
    slices = []
    for grp in groups:
        start = filled
        for orig in grp:
            p = pos[orig]
            if p != filled:
                T, U, info = lapack.ztrexc(T, U, p + 1, filled + 1)
                if info != 0:
                    raise SpectralError("Schur reordering failed")
                moved = where[p]
                del where[p]
                where.insert(filled, moved)
                for k in range(filled, p + 1):
                    pos[where[k]] = k
            filled += 1
        slices.append((start, filled))
    mu = np.array([np.mean(np.diag(T)[s:e]) for s, e in slices], dtype=complex)
    basis = U[:, :filled] / sw[:, None]
    result = SpectralResult(
        grid=grid,
        eigenvalues=1.0 / mu if len(mu) else np.zeros(0, dtype=complex),
        mu=mu,
        multiplicities=tuple(e - s for s, e in slices),
        residuals=np.zeros(len(slices)),
        root_basis=basis,
        slices=tuple(slices),
        schur=T[:filled, :filled],
    )
    res = []
    for j in range(len(slices)):
        Z = result.cluster_basis(j) * sw[:, None]
        SZ = S @ Z
        res.append(np.linalg.norm(SZ - Z @ (Z.conj().T @ SZ), 2))
    object.__setattr__(result, "residuals", np.array(res))
    return result


def completeness_residual(result: SpectralResult, f: SampledFunction, m_values) -> np.ndarray:
    """L2 distance from ``f`` to the span of the first ``m`` root functions."""
    sw = np.sqrt(result.grid.weights)
    fw = sw * f.values
    out = []
    for m in m_values:
        if m > result.root_function_count:
            raise ValueError(f"only {result.root_function_count} root functions available, asked for {m}")
        if m == 0:
            out.append(np.linalg.norm(fw))
            continue
        B = result.root_basis[:, :m] * sw[:, None]
        Q, R, _ = sla.qr(B, mode="economic", pivoting=True)
        rdiag = np.abs(np.diag(R))
        rank = int(np.sum(rdiag > 1e-12 * rdiag[0]))
        Q = Q[:, :rank]
        out.append(np.linalg.norm(fw - Q @ (Q.conj().T @ fw)))
    return np.array(out)


# ---------------------------------------------------------------------------
# hypothesis checker
# ---------------------------------------------------------------------------


@dataclass
class ExponentFit:
    value: float
    rounded: int
    amplitude: complex
    mismatch: bool


@dataclass
class KhromovReport:
    N: int
    d: int
    rank_condition: bool
    m_exponent: float
    m_condition: bool
    chi: list
    chi_distinct: bool
    kappa: list
    kappa_distinct: bool
    amplitudes_nonzero: bool
    smoothness_probe: float
    notes: list = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        exps_ok = not any(e.mismatch for e in self.chi + self.kappa)
        return (
            self.rank_condition
            and self.m_condition
            and self.chi_distinct
            and self.kappa_distinct
            and self.amplitudes_nonzero
            and exps_ok
        )

    def as_dict(self) -> dict:
        def fix(o):
            if isinstance(o, complex):
                return [o.real, o.imag]
            if isinstance(o, float) and not math.isfinite(o):
                return str(o)
            if isinstance(o, dict):
                return {k: fix(v) for k, v in o.items()}
            if isinstance(o, list):
                return [fix(v) for v in o]
            return o

        out = fix(asdict(self))
        out["applicable"] = self.applicable
        out["smoothness_probe_note"] = "indicative only"
        return out


def _loglog(s: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    mask = np.abs(y) > 0
    if mask.sum() < 2:
        return math.inf, 0.0
    slope, icept = np.polyfit(np.log(s[mask]), np.log(np.abs(y[mask])), 1)
    return float(slope), float(icept)


def _fit_endpoint(s: np.ndarray, y: np.ndarray) -> ExponentFit:
    slope, _ = _loglog(s, y)
    if not math.isfinite(slope):
        return ExponentFit(slope, -1, 0j, True)
    k = int(round(slope))
    ratio = y / s**k
    amp = complex(np.polyval(np.polyfit(s, ratio.real, 1), 0.0) + 1j * np.polyval(np.polyfit(s, ratio.imag, 1), 0.0))
    return ExponentFit(slope, k, amp, abs(slope - k) > EXPONENT_SLACK)


def _m_exponent(M: TriangularKernel, N: int) -> float:
    grid = M.grid
    h = grid.h
    kmax = max(2, int(round(BAND / h)))
    offs, devs = [], []
    for k in range(1, min(kmax, grid.size - 1) + 1):
        s = k * h
        band = np.diagonal(M.values, offset=-k)
        devs.append(np.max(np.abs(band - s ** (N - 1) / math.factorial(N - 1))))
        offs.append(s)
    offs, devs = np.array(offs), np.array(devs)
    scale = max(np.max(np.abs(M.values)), 1.0)
    keep = devs > 1e-13 * scale
    if keep.sum() < 3:
        return math.inf
    slope, _ = _loglog(offs[keep], devs[keep])
    return slope


def _smoothness_probe(M: TriangularKernel, N: int) -> float:
    h = M.grid.h
    P = M.grid.size
    i, j = np.indices((P, P))
    inband = (i - j >= 0) & ((i - j) * h <= BAND)
    worst = 0.0
    for p in range(N + 1):
        for q in range(N + 1 - p):
            if p + q == 0:
                continue
            D = M.values.copy()
            mask = inband.copy()
            for _ in range(p):
                D = np.diff(D, axis=0)
                mask = mask[1:] & mask[:-1]
            for _ in range(q):
                D = np.diff(D, axis=1)
                mask = mask[:, 1:] & mask[:, :-1]
            if mask.any():
                worst = max(worst, float(np.max(np.abs(D[mask]))) / h ** (p + q))
    return worst


def check_khromov(A: FiniteRankOperator, N: int | None = None) -> KhromovReport:
    """Numerical evidence for the completeness hypotheses; never raises."""
    N = A.N if N is None else N
    d = A.d
    notes = []
    grid = A.grid
    x = grid.nodes
    try:
        mexp = _m_exponent(A.M, N)
    except Exception as exc:  # report is pure data
        mexp = float("nan")
        notes.append(f"condition 2 fit failed: {exc}")
    m_ok = bool(mexp > N - EXPONENT_SLACK) if math.isfinite(mexp) or mexp == math.inf else False
    if mexp == math.inf:
        notes.append("kernel deviation at machine zero on the band")
    idx = np.arange(1, FIT_NODES + 1)
    chi = [_fit_endpoint(x[idx], g.values[idx]) for g in A.g]
    s = 1.0 - x[-1 - idx]
    kappa = [_fit_endpoint(s, v.values[-1 - idx]) for v in A.v]
    chi_r = [c.rounded for c in chi]
    kap_r = [k.rounded for k in kappa]
    chi_distinct = len(set(chi_r)) == len(chi_r) and all(0 <= c <= N - 1 for c in chi_r)
    kap_distinct = len(set(kap_r)) == len(kap_r) and all(0 <= k <= N - 1 for k in kap_r)
    amp_ok = all(abs(k.amplitude) > 1e-8 for k in kappa) and all(abs(c.amplitude) > 1e-8 for c in chi)
    rank_ok = 2 * d < N
    if not rank_ok:
        notes.append("2d < N fails: the completeness theorem is inapplicable")
    try:
        probe = _smoothness_probe(A.M, N)
    except Exception as exc:
        probe = float("nan")
        notes.append(f"smoothness probe failed: {exc}")
    return KhromovReport(
        N=N,
        d=d,
        rank_condition=rank_ok,
        m_exponent=mexp,
        m_condition=m_ok,
        chi=chi,
        chi_distinct=chi_distinct,
        kappa=kappa,
        kappa_distinct=kap_distinct,
        amplitudes_nonzero=amp_ok,
        smoothness_probe=probe,
        notes=notes,
    )
