"""Independent brute-force references: backward shooting, finite-difference
Jacobians, and quartic root formulas for the mode-pair blocks.

These deliberately use their own integrators and step sizes so their
discretization error is uncorrelated with the methods they check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .graded import as_state
from .linalg import SpectralSplitting

__all__ = [
    "ShootingResult",
    "backward_shoot",
    "finite_difference_jacobian",
    "quartic_roots",
]


@dataclass
class ShootingResult:
    base_point: np.ndarray
    matched_value: np.ndarray   # complement coordinates of u(0)
    shooting_time: float
    match_residual: float
    newton_iterations: int


def _rk4(f, y, t0, t1, dt):
    """Local fixed-step RK4 (kept separate from the main integration path)."""
    span = t1 - t0
    n = max(1, int(math.ceil(abs(span) / dt)))
    h = span / n
    t = t0
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def backward_shoot(model, splitting: SpectralSplitting, target_plus,
                   T: float, tol: float = 1e-9, dt: float = 2e-3,
                   max_iter: int = 50) -> ShootingResult:
    """Manifold value at a base point by shooting from near the equilibrium.

    Initial conditions at t = -T are parameterized as eps*w in the unstable
    subspace (complement part zero), integrated forward by RK4, and the
    parameters solved so the unstable projection of u(0) hits target_plus.
    Exponentially decaying orbits lie on the manifold, so the matched
    complement part of u(0) is the oracle value.  Requires dim X_+ <= 3.
    """
    d_plus = splitting.dim_plus
    if d_plus == 0 or d_plus > 3:
        raise ValueError("backward shooting requires 1 <= dim X_+ <= 3")
    target = as_state(target_plus, d_plus)
    Bp = splitting.projection.basis_plus
    Br = splitting.projection.basis_rest
    eq = model.equilibrium
    A_plus = Bp.T @ model.jacobian(eq) @ Bp
    # parameterize through the backward linear flow so the unknowns stay
    # O(target) and the shot Jacobian stays O(1) despite the e^{rate*T} growth
    back = sla.expm(-T * A_plus)

    def flow_plus(theta):
        u = eq + Bp @ (back @ theta)
        u_end = _rk4(lambda y: model.vector_field(y), u, -T, 0.0, dt)
        y_end = u_end - eq
        return Bp.T @ y_end, Br.T @ y_end

    theta = target.copy()
    res_vec, rest = flow_plus(theta)
    res_vec = res_vec - target
    res = np.linalg.norm(res_vec)
    it = 0
    while res > tol:
        it += 1
        if it > max_iter:
            raise RuntimeError(
                f"shooting Newton failed after {max_iter} iterations "
                f"(residual {res:.3e})")
        J = np.empty((d_plus, d_plus))
        h = 1e-6 * (1.0 + np.linalg.norm(theta))
        for k in range(d_plus):
            dth = np.zeros(d_plus)
            dth[k] = h
            rp, _ = flow_plus(theta + dth)
            J[:, k] = (rp - target - res_vec) / h
        step = np.linalg.solve(J, -res_vec)
        lam = 1.0
        while lam > 1e-6:
            cand = theta + lam * step
            rv, rr = flow_plus(cand)
            rv = rv - target
            if np.linalg.norm(rv) < res:
                theta, res_vec, rest, res = cand, rv, rr, np.linalg.norm(rv)
                break
            lam *= 0.5
        else:
            raise RuntimeError(
                f"shooting Newton stagnated (residual {res:.3e})")
    return ShootingResult(base_point=target, matched_value=rest,
                          shooting_time=T, match_residual=float(res),
                          newton_iterations=it)


def finite_difference_jacobian(F, u, h_step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian, column by column."""
    if h_step <= 0:
        raise ValueError("h_step must be positive")
    u = as_state(u)
    f0 = np.asarray(F(u), dtype=float)
    n_out, n_in = f0.shape[0], u.shape[0]
    J = np.empty((n_out, n_in))
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = h_step
        J[:, j] = (np.asarray(F(u + e)) - np.asarray(F(u - e))) / (2 * h_step)
    return J


def quartic_roots(c_plus: float, c_minus: float, c: float) -> np.ndarray:
    """Roots of lambda^4 + (c+^2 + c-^2 - 2c^2) lambda^2 + (c+c- - c^2)^2 = 0.

    Solved by the quadratic formula in lambda^2; returned sorted by (Re, Im).
    """
    B = c_plus * c_plus + c_minus * c_minus - 2.0 * c * c
    C = (c_plus * c_minus - c * c) ** 2
    disc = complex(B * B - 4.0 * C)
    s = np.sqrt(disc)
    roots = []
    for z in ((-B + s) / 2.0, (-B - s) / 2.0):
        r = np.sqrt(complex(z))
        roots.extend([r, -r])
    return np.array(sorted(roots, key=lambda w: (w.real, w.imag)))
