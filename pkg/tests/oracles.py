"""Independent reference computations used by the tests."""

import numpy as np
from scipy.integrate import solve_ivp


def third_order_end_value(lam: complex) -> complex:
    """``y(1)`` for ``y''' = lam y``, ``y(0) = y'(0) = 0``, ``y''(0) = 1``."""

    def rhs(_, u):
        return np.array([u[1], u[2], lam * u[0]])

    sol = solve_ivp(rhs, (0.0, 1.0), np.array([0, 0, 1], dtype=complex), method="DOP853", rtol=1e-12, atol=1e-14)
    return complex(sol.y[0, -1])


def shooting_eigenvalues(count: int, lo: float = -5000.0, step: float = 5.0) -> np.ndarray:
    """Roots of ``y(1; lam)`` bracketed on the negative real axis, then
    polished by complex secant iterations."""
    roots = []
    lam_prev, f_prev = 0.0, third_order_end_value(0.0).real
    lam = -step
    while len(roots) < count and lam > lo:
        f = third_order_end_value(lam).real
        if np.sign(f) != np.sign(f_prev):
            roots.append(_secant(lam_prev, lam))
        lam_prev, f_prev = lam, f
        lam -= step
    return np.array(roots)


def _secant(a: complex, b: complex, tol: float = 1e-13, maxit: int = 60) -> complex:
    fa, fb = third_order_end_value(a), third_order_end_value(b)
    for _ in range(maxit):
        if fb == fa:
            break
        c = b - fb * (b - a) / (fb - fa)
        a, fa = b, fb
        b, fb = c, third_order_end_value(c)
        if abs(b - a) <= tol * abs(b):
            break
    return complex(b)
