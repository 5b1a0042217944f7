"""Cauchy problem, separated boundary conditions and the inverse operator.

For ``l y = d^m/dx^m((I+K) y^(n) + C y)`` the inverse of the boundary
value operator is ``A f = M f + sum_k g_k(x) int_0^1 f v_k`` with
``M = J^n (I+R) J^m``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from math import factorial

import numpy as np
import scipy.linalg as sla

from .quadrature import Grid, QuasiDerivativeFrame, SampledFunction, iterated_integral
from .reduction import OperatorForm, shift
from .volterra import TriangularKernel, _inner_g, apply, m_kernel, m_kernel_x_derivative, resolvent

log = logging.getLogger(__name__)

ELIMINATION_TOL = 1e-12
SINGULAR_CONDITION = 1e10


class BoundaryConditionError(ValueError):
    pass


class SpectralDegeneracyError(RuntimeError):
    """Zero is (numerically) an eigenvalue; a spectral shift is needed."""

    def __init__(self, message: str, suggested_shift: complex | None = None):
        super().__init__(message)
        self.suggested_shift = suggested_shift


@dataclass(frozen=True)
class BoundaryConditions:
    """Rows ``0..l-1`` act at ``x = 0``, rows ``l..N-1`` at ``x = 1``."""

    alpha: np.ndarray
    l: int

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.alpha, dtype=complex))
        N = a.shape[0]
        if a.shape != (N, N):
            raise BoundaryConditionError("alpha must be an N x N matrix")
        if self.l >= N:
            raise BoundaryConditionError("no right-end conditions (need l < N)")
        if self.l <= 0:
            raise BoundaryConditionError("no left-end conditions (need l > 0)")
        l = self.l
        if np.linalg.matrix_rank(a[:l]) < l or np.linalg.matrix_rank(a[l:]) < N - l:
            raise BoundaryConditionError("boundary conditions are linearly dependent")
        object.__setattr__(self, "alpha", a)

    @property
    def N(self) -> int:
        return self.alpha.shape[0]

    @property
    def d(self) -> int:
        return self.N - self.l

    @property
    def regular_case(self) -> bool:
        return 2 * self.l == self.N

    @property
    def left_dominant(self) -> bool:
        return self.l > self.N - self.l

    def warnings(self) -> list[str]:
        if self.regular_case:
            return ["regular case out of scope (2l = N)"]
        return []


@dataclass(frozen=True)
class NormalizedBC:
    alpha: np.ndarray
    sigma: tuple
    l: int

    @property
    def N(self) -> int:
        return self.alpha.shape[0]

    @property
    def d(self) -> int:
        return self.N - self.l


def _staircase(rows: np.ndarray) -> tuple[np.ndarray, list[int]]:
    rows = rows.astype(complex).copy()
    k, N = rows.shape
    free = list(range(k))
    sigma = [None] * k
    scale = max(np.max(np.abs(rows)), 1.0)
    for col in range(N - 1, -1, -1):
        if not free:
            break
        cand = max(free, key=lambda r: abs(rows[r, col]))
        if abs(rows[cand, col]) <= ELIMINATION_TOL * scale:
            continue
        rows[cand] /= rows[cand, col]
        for r in range(k):
            if r != cand:
                rows[r] -= rows[r, col] * rows[cand]
                rows[r, col] = 0.0
        sigma[cand] = col
        free.remove(cand)
    if free:
        raise BoundaryConditionError("degenerate boundary conditions")
    order = np.argsort(sigma)
    rows = rows[order]
    rows[np.abs(rows) <= ELIMINATION_TOL * scale] = 0.0
    return rows, [sigma[i] for i in order]


def normalize_bc(bc: BoundaryConditions) -> NormalizedBC:
    """Staircase form within each end: unit leading entries at increasing
    indices ``sigma`` and zeros to the right of them."""
    top, s_top = _staircase(bc.alpha[: bc.l])
    bot, s_bot = _staircase(bc.alpha[bc.l :])
    return NormalizedBC(np.vstack([top, bot]), tuple(s_top + s_bot), bc.l)


@dataclass(frozen=True, eq=False)
class _Representation:
    """``y = sum_{nu<n} c_nu x^nu/nu! + J^n phi`` together with
    ``(I+K) y^(n) + C y = sum_{j<m} d_j x^j/j! + J^m f``."""

    form: OperatorForm
    c: np.ndarray
    phi: np.ndarray
    d: np.ndarray
    f: np.ndarray | None = None

    def derivative(self, j: int) -> np.ndarray:
        grid = self.form.grid
        x = grid.nodes
        n = self.form.n
        out = np.zeros(grid.size, dtype=complex)
        for nu in range(j, n):
            out += self.c[nu] * x ** (nu - j) / factorial(nu - j)
        if n - j >= 1:
            out += iterated_integral(SampledFunction(grid, self.phi), n - j).values
        else:
            out += self.phi
        return out

    def quasi(self, s: int) -> np.ndarray:
        grid = self.form.grid
        x = grid.nodes
        out = np.zeros(grid.size, dtype=complex)
        for j in range(s, self.form.m):
            out += self.d[j] * x ** (j - s) / factorial(j - s)
        if self.f is not None:
            out += iterated_integral(SampledFunction(grid, self.f), self.form.m - s).values
        return out

    def frame(self) -> QuasiDerivativeFrame:
        grid = self.form.grid
        ents = [SampledFunction(grid, self.derivative(j)) for j in range(self.form.n)]
        ents += [SampledFunction(grid, self.quasi(s)) for s in range(self.form.m)]
        return QuasiDerivativeFrame(self.form.N, tuple(ents))

    def frame_at_one(self) -> np.ndarray:
        """Frame values at ``x = 1``; quasi entries from the polynomial identity."""
        n, m = self.form.n, self.form.m
        out = np.zeros(n + m, dtype=complex)
        for j in range(n):
            out[j] = self.derivative(j)[-1]
        for s in range(m):
            val = sum(self.d[j] / factorial(j - s) for j in range(s, m))
            if self.f is not None:
                val += iterated_integral(SampledFunction(self.form.grid, self.f), m - s).values[-1]
            out[n + s] = val
        return out


class FundamentalSystem:
    """Solutions ``y_1..y_N`` of ``l y = 0`` whose initial frames are the
    unit vectors."""

    def __init__(self, form: OperatorForm):
        form.require_identity_multiplier()
        self.form = form
        grid = form.grid
        x = grid.nodes
        n, m = form.n, form.m
        self.R = resolvent(form.kernel)
        eye = np.eye(form.N)
        reps = []
        self.eta = []
        for nu in range(n):
            u = form.rank_part[nu].values
            eta = -(u + apply(self.R, form.rank_part[nu]).values)
            self.eta.append(SampledFunction(grid, eta))
            reps.append(_Representation(form, eye[nu, :n], eta, np.zeros(m)))
        self.xi = []
        for j in range(m):
            pj = SampledFunction(grid, x**j / factorial(j))
            xi = pj.values + apply(self.R, pj).values
            self.xi.append(SampledFunction(grid, xi))
            reps.append(_Representation(form, np.zeros(n), xi, eye[n + j, n:]))
        self._reps = reps

    @property
    def N(self) -> int:
        return self.form.N

    @cached_property
    def functions(self) -> tuple:
        grid = self.form.grid
        if self.form.n == 0:
            return tuple(SampledFunction(grid, r.phi) for r in self._reps)
        return tuple(SampledFunction(grid, r.derivative(0)) for r in self._reps)

    @property
    def initial_frames(self) -> np.ndarray:
        """Columns are the frames of ``y_k`` at 0 (the identity)."""
        return np.eye(self.N, dtype=complex)

    @cached_property
    def frames_at_one(self) -> np.ndarray:
        """``F[i, k] = y_{k+1}^<i>(1)``."""
        return np.column_stack([r.frame_at_one() for r in self._reps])

    @cached_property
    def inner(self) -> np.ndarray:
        return _inner_g(self.R, self.form.m)

    @cached_property
    def M(self) -> TriangularKernel:
        return m_kernel(self.R, self.form.m, self.form.n, inner=self.inner)

    def frame(self, k: int) -> QuasiDerivativeFrame:
        return self._reps[k].frame()


def fundamental_system(form: OperatorForm) -> FundamentalSystem:
    return FundamentalSystem(form)


def solve_cauchy(form: OperatorForm, f: SampledFunction, initial, fs: FundamentalSystem | None = None):
    """``y = M f + sum_j initial_j y_{j+1}`` and its quasi-derivative frame."""
    fs = fs or FundamentalSystem(form)
    grid = form.grid
    n, m = form.n, form.m
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (form.N,):
        raise ValueError("initial frame must have N entries")
    Jm = iterated_integral(f, m)
    phi_f = Jm.values + apply(fs.R, Jm).values
    phi = phi_f + sum((initial[k] * fs._reps[k].phi for k in range(form.N)), np.zeros(grid.size, dtype=complex))
    rep = _Representation(form, initial[:n], phi, initial[n:], f.values)
    y = apply(fs.M, f).values + sum(
        (initial[k] * fs.functions[k].values for k in range(form.N)), np.zeros(grid.size, dtype=complex)
    )
    frame = rep.frame()
    ents = list(frame.entries)
    if n > 0:
        ents[0] = SampledFunction(grid, y)
    return SampledFunction(grid, y), QuasiDerivativeFrame(form.N, tuple(ents)), rep


def boundary_values(nbc: NormalizedBC, frame0: np.ndarray, frame1: np.ndarray) -> np.ndarray:
    """``U_j`` of a function with quasi-derivative frames ``frame0`` / ``frame1``."""
    a = nbc.alpha
    return np.concatenate([a[: nbc.l] @ frame0, a[nbc.l :] @ frame1])


@dataclass(frozen=True, eq=False)
class HomogeneousSolutions:
    g: tuple
    beta: np.ndarray  # coefficients in the fundamental system, columns = g_k
    chi: tuple
    transform: np.ndarray  # g_canonical = g_normalized @ transform
    pairing: np.ndarray  # U_{l+j}(g_k) before canonicalization (should be -I)


def _leading_index(col: np.ndarray) -> int:
    scale = np.max(np.abs(col))
    nz = np.nonzero(np.abs(col) > 1e-12 * scale)[0]
    return int(nz[0])


def shift_preserves_bc(nbc: NormalizedBC, n: int) -> bool:
    """Shifting adds ``a J^(m-s) y`` to entry ``n+s`` of the frame.  That
    vanishes at 0 but not at 1, so right-end rows must avoid those entries."""
    return not np.any(nbc.alpha[nbc.l :, n:])


def _suggest_shift(form: OperatorForm, nbc: NormalizedBC) -> complex | None:
    if not shift_preserves_bc(nbc, form.n):
        return None
    for a in (1.0, -1.0, 1j, -1j, 2.0, -2.0, 5.0):
        try:
            fs = FundamentalSystem(shift(form, a))
            _pairing(fs, nbc)
            return a
        except SpectralDegeneracyError:
            continue
    return None


def _pairing(fs: FundamentalSystem, nbc: NormalizedBC):
    null = sla.null_space(nbc.alpha[: nbc.l])
    if null.shape[1] != nbc.d:
        raise BoundaryConditionError("left conditions do not leave a d-dimensional solution space")
    Ub = nbc.alpha[nbc.l :] @ fs.frames_at_one
    P = Ub @ null
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
        raise SpectralDegeneracyError("0 is in the spectrum (singular boundary system)")
    return null, Ub, P


def homogeneous_solutions(form: OperatorForm, nbc: NormalizedBC, fs: FundamentalSystem | None = None) -> HomogeneousSolutions:
    """Solutions ``g_k`` of ``l y = 0`` meeting the left conditions with
    ``U_{l+j}(g_k) = -delta_jk``, recombined so that their leading
    exponents at 0 are distinct and decreasing."""
    fs = fs or FundamentalSystem(form)
    try:
        null, Ub, P = _pairing(fs, nbc)
    except SpectralDegeneracyError as exc:
        a = _suggest_shift(form, nbc)
        if a is not None:
            hint = f"; apply shift(a={a})"
        elif not shift_preserves_bc(nbc, form.n):
            hint = "; no shift suggested, it would alter the right-end conditions"
        else:
            hint = ""
        raise SpectralDegeneracyError(f"{exc}{hint}", a) from None
    beta = null @ (-np.linalg.inv(P))
    pairing = Ub @ beta
    d = nbc.d
    T = np.eye(d, dtype=complex)
    beta = beta.copy()
    lead = [_leading_index(beta[:, k]) for k in range(d)]
    while True:
        dup = next(((i, j) for i in range(d) for j in range(i + 1, d) if lead[i] == lead[j]), None)
        if dup is None:
            break
        i, j = dup
        b = lead[i]
        a = beta[b, i] / beta[b, j]
        beta[:, i] -= a * beta[:, j]
        beta[b, i] = 0.0
        T[:, i] -= a * T[:, j]
        lead[i] = _leading_index(beta[:, i])
    order = sorted(range(d), key=lambda k: -lead[k])
    beta = beta[:, order]
    T = T[:, order]
    Y = np.column_stack([y.values for y in fs.functions])
    g = tuple(SampledFunction(form.grid, Y @ beta[:, k]) for k in range(d))
    return HomogeneousSolutions(g, beta, tuple(lead[k] for k in order), T, pairing)


def functional_kernels(form: OperatorForm, nbc: NormalizedBC, fs: FundamentalSystem | None = None) -> tuple:
    """``v_j`` with ``U_{l+j}(M f) = int_0^1 f v_j``."""
    fs = fs or FundamentalSystem(form)
    grid = form.grid
    t = grid.nodes
    n, N = form.n, form.N
    derivs = {}
    out = []
    for j in range(nbc.d):
        row = nbc.l + j
        sig = nbc.sigma[row]
        v = np.zeros(grid.size, dtype=complex)
        for k in range(min(sig, n - 1) + 1):
            a = nbc.alpha[row, k]
            if a == 0:
                continue
            if k not in derivs:
                derivs[k] = m_kernel_x_derivative(fs.R, form.m, n, k, -1, inner=fs.inner).values
            v += a * derivs[k]
        for k in range(n, sig + 1):
            v += nbc.alpha[row, k] * (1 - t) ** (N - 1 - k) / factorial(N - 1 - k)
        out.append(SampledFunction(grid, v))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class FiniteRankOperator:
    """``A f = M f + sum_k g_k(x) int_0^1 f(t) v_k(t) dt``."""

    M: TriangularKernel
    g: tuple
    v: tuple
    N: int
    chi: tuple = ()
    kappa: tuple = ()
    amplitudes: tuple = ()
    pairing: np.ndarray | None = None
    form: OperatorForm | None = field(default=None, repr=False)
    nbc: NormalizedBC | None = field(default=None, repr=False)
    beta: np.ndarray | None = field(default=None, repr=False)
    fundamental: FundamentalSystem | None = field(default=None, repr=False)

    @property
    def grid(self) -> Grid:
        return self.M.grid

    @property
    def d(self) -> int:
        return len(self.g)

    def functionals(self, f: SampledFunction) -> np.ndarray:
        w = self.grid.weights
        return np.array([np.sum(w * f.values * v.values) for v in self.v], dtype=complex)

    def apply(self, f: SampledFunction) -> SampledFunction:
        out = apply(self.M, f).values
        for c, g in zip(self.functionals(f), self.g):
            out = out + c * g.values
        return SampledFunction(self.grid, out)

    def frame(self, f: SampledFunction, fs: FundamentalSystem | None = None):
        """Value and quasi-derivative frame of ``A f`` (needs the source form)."""
        if self.form is None:
            raise ValueError("operator was not assembled from a form")
        initial = self.beta @ self.functionals(f) if self.d else np.zeros(self.N)
        return solve_cauchy(self.form, f, initial, fs or self.fundamental)


def assemble_inverse(form: OperatorForm, nbc: NormalizedBC, fs: FundamentalSystem | None = None) -> FiniteRankOperator:
    """Inverse of the boundary value operator in finite-rank Volterra form."""
    fs = fs or FundamentalSystem(form)
    if nbc.N != form.N:
        raise BoundaryConditionError("boundary conditions and operator form differ in order")
    if 2 * nbc.l == nbc.N:
        warnings.warn("regular case out of scope (2l = N)", stacklevel=2)
    hs = homogeneous_solutions(form, nbc, fs)
    v = functional_kernels(form, nbc, fs)
    N = form.N
    kappa0 = [N - 1 - nbc.sigma[nbc.l + j] for j in range(nbc.d)]
    Tinv = np.linalg.inv(hs.transform)
    # v_canonical[k] = sum_j Tinv[k, j] v_j
    vals = np.array([vj.values for vj in v]).reshape(nbc.d, -1)
    v_can = Tinv @ vals
    # the mixing only adds earlier (higher-exponent) v's to later ones
    kappa = []
    for k in range(nbc.d):
        nz = [j for j in range(nbc.d) if abs(Tinv[k, j]) > 1e-14]
        kappa.append(min(kappa0[j] for j in nz))
    amps = []
    for k in range(nbc.d):
        amps.append(sum(Tinv[k, j] / factorial(kappa0[j]) for j in range(nbc.d) if kappa0[j] == kappa[k]))
    return FiniteRankOperator(
        M=fs.M,
        g=hs.g,
        v=tuple(SampledFunction(form.grid, r) for r in v_can),
        N=N,
        chi=hs.chi,
        kappa=tuple(kappa),
        amplitudes=tuple(complex(a) for a in amps),
        pairing=hs.pairing,
        form=form,
        nbc=nbc,
        beta=hs.beta,
        fundamental=fs,
    )
