import numpy as np
import pytest
from scipy.linalg import expm

from vspectra.quadrature import SampledFunction, make_grid
from vspectra.quasideriv import (
    DimensionMismatchError,
    QuasiFrameVector,
    ShinZettlMatrix,
    matrix_resolvent,
    matrix_resolvent_series,
    second_order_matrix,
    solve_regularized,
    transform_frames,
)


def sf(g, v):
    return SampledFunction(g, np.broadcast_to(v, g.nodes.shape))


def const_matrix(g, A):
    return ShinZettlMatrix(g, np.broadcast_to(np.asarray(A, dtype=complex), (g.size,) + np.shape(A)).copy())


def test_second_order_matrix_free():
    g = make_grid(5)
    Q = second_order_matrix(sf(g, 0.0), sf(g, 0.0))
    np.testing.assert_array_equal(Q.values[2], [[0, 1], [0, 0]])


def test_second_order_matrix_step():
    g = make_grid(5)
    s = sf(g, (g.nodes >= 0.5) * 1.0)
    Q = second_order_matrix(s, sf(g, 0.0))
    np.testing.assert_array_equal(Q.values[1], [[0, 1], [0, 0]])
    np.testing.assert_array_equal(Q.values[3], [[1, 1], [-1, -1]])


def test_second_order_matrix_companion():
    g = make_grid(5)
    Q = second_order_matrix(sf(g, 0.0), sf(g, np.cos(g.nodes)))
    np.testing.assert_allclose(Q.values[:, 1, 0], np.cos(g.nodes))


def test_resolvent_zero_is_identity():
    g = make_grid(11)
    R = matrix_resolvent(const_matrix(g, np.zeros((3, 3))))
    np.testing.assert_allclose(R.dense(), np.broadcast_to(np.eye(3), (11, 11, 3, 3)))


def test_resolvent_constant_matrix():
    A = np.array([[0.3, 1.0], [-2.0, 0.1j]])
    errs = []
    for P in (51, 101):
        g = make_grid(P)
        R = matrix_resolvent(const_matrix(g, A)).dense()
        x = g.nodes
        exact = np.array([[expm(A * (xi - tj)) for tj in x] for xi in x])
        errs.append(np.max(np.abs(R - exact)))
    assert errs[1] < 1e-4
    assert 1.7 < np.log2(errs[0] / errs[1]) < 2.3


def test_resolvent_scalar():
    g = make_grid(201)
    R = matrix_resolvent(const_matrix(g, [[1.0]])).dense()[:, :, 0, 0]
    x = g.nodes
    np.testing.assert_allclose(R, np.exp(x[:, None] - x[None, :]), rtol=1e-4)


def test_resolvent_matches_series_on_full_square():
    g = make_grid(41)
    x = g.nodes
    vals = np.zeros((g.size, 2, 2), dtype=complex)
    vals[:, 0, 0] = np.sin(x)
    vals[:, 0, 1] = 1
    vals[:, 1, 0] = np.cos(3 * x)
    Q = ShinZettlMatrix(g, vals)
    np.testing.assert_allclose(matrix_resolvent(Q, 20).dense(), matrix_resolvent_series(Q), atol=1e-12)


def test_resolvent_semigroup():
    g = make_grid(201)
    x = g.nodes
    vals = np.zeros((g.size, 2, 2), dtype=complex)
    vals[:, 0, 1] = 1
    vals[:, 1, 0] = -np.exp(x)
    R = matrix_resolvent(ShinZettlMatrix(g, vals))
    for t, s, xx in [(0, 50, 200), (10, 90, 150), (30, 31, 60)]:
        np.testing.assert_allclose(R(xx, s) @ R(s, t), R(xx, t), atol=1e-10)


def test_transform_identity_case():
    g = make_grid(51)
    Q = second_order_matrix(sf(g, np.sin(g.nodes)), sf(g, 0.0))
    Y = solve_regularized(Q, sf(g, 1.0), [1, 0])
    assert np.max(np.abs(transform_frames(Y, Q, Q).values)) == 0


def _split_q(P):
    g = make_grid(P)
    x = g.nodes
    Q = second_order_matrix(sf(g, np.sin(x)), sf(g, 0.0))  # sigma = J cos
    Qt = second_order_matrix(sf(g, 0.0), sf(g, np.cos(x)))
    return g, Q, Qt


def test_transform_smooth_split():
    g, Q, Qt = _split_q(1001)
    x = g.nodes
    Yt = solve_regularized(Qt, sf(g, np.exp(x)), [1.0, 0.3])
    Yh = transform_frames(Yt, Q, Qt)
    assert np.max(np.abs(Yh.values[:, 0])) < 1e-4
    assert np.max(np.abs(Yh.values[:, 1] + np.sin(x) * Yt.values[:, 0])) < 1e-4


def test_transform_consistency_order():
    errs = []
    for P in (101, 201, 401):
        g, Q, Qt = _split_q(P)
        f = sf(g, np.cos(5 * g.nodes))
        Yt = solve_regularized(Qt, f, [0.2, 1.0])
        Y = solve_regularized(Q, f, [0.2, 1.0])
        Yh = transform_frames(Yt, Q, Qt)
        errs.append(np.max(np.abs(Y.values - Yt.values - Yh.values)))
    # both sides share the trapezoid discretization, so agreement is close to exact
    assert max(errs) < 1e-10


def test_transform_interior_x0():
    g, Q, Qt = _split_q(401)
    x = g.nodes
    Yt = solve_regularized(Qt, sf(g, x), [1.0, -1.0])
    i0 = 200
    d0 = [0.0, -np.sin(x[i0]) * Yt.values[i0, 0]]
    Yh = transform_frames(Yt, Q, Qt, i0, d0)
    assert np.max(np.abs(Yh.values[:, 1] + np.sin(x) * Yt.values[:, 0])) < 1e-4


def test_prop1_difference_is_fy():
    g, Q, Qt = _split_q(801)
    Yt = solve_regularized(Qt, sf(g, 0.0), [1.0, 0.5])
    Yh = transform_frames(Yt, Q, Qt)
    y = Yt.values[:, 0]
    mask = np.abs(y) > 0.1
    ratio = Yh.values[mask, 1] / y[mask]
    assert np.max(np.abs(np.diff(ratio))) < 10 * g.h
    assert np.max(np.abs(np.gradient(ratio, g.h))) < 5


def test_transform_continuity():
    g = make_grid(401)
    x = g.nodes
    step = (x >= 0.5) * 1.0
    Q = second_order_matrix(sf(g, step + x), sf(g, 0.0))
    Qt = second_order_matrix(sf(g, step), sf(g, 1.0))
    Yt = solve_regularized(Qt, sf(g, 0.0), [1.0, 0.0])
    Yh = transform_frames(Yt, Q, Qt)
    bound = 10 * g.h * np.max(np.abs(np.einsum("iab,ib->ia", (Q - Qt).values, Yt.values)))
    assert np.max(np.abs(np.diff(Yh.values, axis=0))) <= bound
    np.testing.assert_allclose(Yh.values[:, 1], -x * Yt.values[:, 0], atol=1e-4)


def test_dimension_mismatch():
    g = make_grid(11)
    Q2 = const_matrix(g, np.eye(2))
    Q3 = const_matrix(g, np.eye(3))
    Y = QuasiFrameVector(g, np.zeros((11, 2)))
    with pytest.raises(DimensionMismatchError):
        transform_frames(Y, Q2, Q3)
    with pytest.raises(DimensionMismatchError):
        transform_frames(QuasiFrameVector(g, np.zeros((11, 3))), Q2, Q2)
    with pytest.raises(DimensionMismatchError):
        ShinZettlMatrix.from_entries(g, [[1, 2], [3]])
