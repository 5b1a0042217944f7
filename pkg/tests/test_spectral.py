import numpy as np
import pytest

from oracles import shooting_eigenvalues
from vspectra.bvp import FiniteRankOperator, assemble_inverse
from vspectra.coefficients import EvenCoefficientSpec
from vspectra.quadrature import SampledFunction, make_grid
from vspectra.reduction import build_even, build_raw
from vspectra.spectral import check_khromov, completeness_residual, discretize, spectrum
from vspectra.volterra import TriangularKernel

from conftest import jackson_bc, jackson_form


def rank_one(grid, g, v, M=None):
    M = M if M is not None else TriangularKernel.zeros(grid)
    return FiniteRankOperator(
        M=M, g=(SampledFunction(grid, g),), v=(SampledFunction(grid, v),), N=3
    )


def test_discretize_rank_one():
    grid = make_grid(11)
    A = rank_one(grid, np.ones(11), np.ones(11))
    np.testing.assert_allclose(discretize(A), np.outer(np.ones(11), grid.weights))


def test_discretize_volterra_structure():
    grid = make_grid(11)
    M = TriangularKernel.from_function(grid, lambda X, T: X - T)
    A = FiniteRankOperator(M=M, g=(), v=(), N=2)
    D = discretize(A)
    assert np.all(np.triu(D) == 0)


def test_discretize_jackson_action():
    form = jackson_form(201)
    A = assemble_inverse(form, jackson_bc())
    x = form.grid.nodes
    np.testing.assert_allclose(discretize(A) @ np.ones_like(x), x**3 / 6 - x**2 / 6, atol=1e-4)


def test_rank_one_spectrum():
    grid = make_grid(101)
    x = grid.nodes
    A = rank_one(grid, x, np.ones_like(x))
    res = spectrum(A)
    assert len(res) == 1
    assert res.mu[0] == pytest.approx(0.5)
    assert res.eigenvalues[0] == pytest.approx(2.0)
    np.testing.assert_allclose(np.abs(res.root_basis[:, 0]), x / np.sqrt(grid.weights @ x**2), rtol=1e-10, atol=1e-12)


def test_jackson_against_shooting():
    A = assemble_inverse(jackson_form(401), jackson_bc())
    res = spectrum(A, 3)
    ref = shooting_eigenvalues(3)
    assert np.max(np.abs(res.eigenvalues - ref) / np.abs(ref)) < 1e-5
    assert np.all(res.residuals <= 1e-6)
    assert list(np.abs(res.eigenvalues)) == sorted(np.abs(res.eigenvalues))


def test_jackson_grid_stability():
    lam = [spectrum(assemble_inverse(jackson_form(P), jackson_bc()), 3).eigenvalues for P in (201, 401)]
    assert np.max(np.abs(lam[0] - lam[1]) / np.abs(lam[1])) < 1e-3


def test_dirichlet():
    grid = make_grid(401)
    from vspectra.bvp import BoundaryConditions, normalize_bc

    nbc = normalize_bc(BoundaryConditions(np.array([[1, 0], [1, 0]]), 1))
    with pytest.warns(UserWarning):
        A = assemble_inverse(build_raw(grid, 1, 1, "0"), nbc)
    lam = spectrum(A, 3).eigenvalues
    ref = -((np.arange(1, 4) * np.pi) ** 2)
    assert np.max(np.abs(lam - ref) / np.abs(ref)) < 1e-4


def test_eigenfunctions_solve_the_equation():
    grid = make_grid(401)
    form = build_even(EvenCoefficientSpec(1, ("x^2",), ("0",)), grid)
    from vspectra.bvp import BoundaryConditions, normalize_bc

    nbc = normalize_bc(BoundaryConditions(np.array([[1, 0], [1, 0]]), 1))
    with pytest.warns(UserWarning):
        A = assemble_inverse(form, nbc)
    res = spectrum(A, 3)
    for k in range(3):
        phi = SampledFunction(grid, res.cluster_basis(k)[:, 0])
        # A phi = mu phi, and the frame of A phi is consistent with A phi
        y, frame, _ = A.frame(phi)
        np.testing.assert_allclose(y.values, res.mu[k] * phi.values, atol=1e-4 * np.max(np.abs(phi.values)))


def test_completeness_examples():
    A = assemble_inverse(jackson_form(201), jackson_bc())
    res = spectrum(A, 20)
    f = SampledFunction(res.grid, res.root_basis[:, 0] * 3)
    r = completeness_residual(res, f, [0, 1, 5])
    assert r[0] == pytest.approx(f.norm())
    assert r[1] < 1e-10 and r[2] < 1e-10
    with pytest.raises(ValueError):
        completeness_residual(res, f, [res.root_function_count + 1])


def test_completeness_decreases():
    A = assemble_inverse(jackson_form(401), jackson_bc())
    res = spectrum(A, 40)
    x = res.grid.nodes
    f = SampledFunction(res.grid, x * (1 - x))
    r = completeness_residual(res, f, [5, 10, 20, 40])
    assert np.all(np.diff(r) < 0)
    assert r[-1] < 0.1 * f.norm()


def test_cluster_bases_are_invariant():
    A = assemble_inverse(jackson_form(201), jackson_bc())
    D = discretize(A)
    res = spectrum(A, 6)
    sw = np.sqrt(res.grid.weights)
    for j in range(6):
        Z = res.cluster_basis(j)
        Zw = Z * sw[:, None]
        np.testing.assert_allclose(Zw.conj().T @ Zw, np.eye(Z.shape[1]), atol=1e-10)
        np.testing.assert_allclose(D @ Z, res.mu[j] * Z, atol=1e-8)


def test_defective_cluster():
    # M = 0, rank two with a Jordan block: A g1 = g1, A g2 = g1 + g2
    grid = make_grid(101)
    x = grid.nodes
    w = grid.weights
    g1, g2 = np.ones_like(x), 2 * x - 1
    g2 = g2 / np.sqrt(w @ g2**2)  # orthonormal for the discrete pairing
    # dual functions so that <A f> reproduces the Jordan structure
    v1, v2 = g1 + g2, g2
    A = FiniteRankOperator(
        M=TriangularKernel.zeros(grid),
        g=(SampledFunction(grid, g1), SampledFunction(grid, g2)),
        v=(SampledFunction(grid, v1), SampledFunction(grid, v2)),
        N=5,
    )
    res = spectrum(A)
    assert res.multiplicities == (2,)
    assert res.eigenvalues[0] == pytest.approx(1.0, abs=1e-6)
    assert res.residuals[0] < 1e-6


def test_khromov_jackson():
    A = assemble_inverse(jackson_form(401), jackson_bc())
    rep = check_khromov(A, 3)
    assert rep.rank_condition and rep.m_condition
    assert rep.m_exponent >= 2.7
    assert [c.rounded for c in rep.chi] == [2]
    assert [k.rounded for k in rep.kappa] == [2]
    assert abs(rep.kappa[0].amplitude - 0.5) < 1e-3
    assert rep.applicable
    d = rep.as_dict()
    assert d["applicable"] and d["m_exponent"] == "inf"


def test_khromov_wrong_order():
    grid = make_grid(401)
    A = assemble_inverse(jackson_form(401), jackson_bc())
    wrong = TriangularKernel.from_function(grid, lambda X, T: X - T)
    B = FiniteRankOperator(M=wrong, g=A.g, v=A.v, N=3)
    rep = check_khromov(B, 3)
    assert not rep.m_condition
    assert not rep.applicable


def test_khromov_nontrivial_kernel():
    grid = make_grid(401)
    from vspectra.bvp import BoundaryConditions, normalize_bc

    form = build_raw(grid, 1, 2, "(x-t)*cos(x)")
    A = assemble_inverse(form, normalize_bc(BoundaryConditions(np.array([[1, 0, 0], [0, 1, 0], [1, 0, 0]]), 2)))
    rep = check_khromov(A)
    assert rep.m_condition and 2.7 < rep.m_exponent < np.inf


def test_khromov_rank_condition():
    grid = make_grid(51)
    x = grid.nodes
    A = FiniteRankOperator(
        M=TriangularKernel.from_function(grid, lambda X, T: (X - T) ** 2 / 2),
        g=(SampledFunction(grid, x**2), SampledFunction(grid, x)),
        v=(SampledFunction(grid, (1 - x) ** 2), SampledFunction(grid, 1 - x)),
        N=3,
    )
    rep = check_khromov(A)
    assert not rep.rank_condition
    assert any("inapplicable" in n for n in rep.notes)
