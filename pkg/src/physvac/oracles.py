"""Exact affine solutions and brute-force quadrature used as references.

With ``rho0 = A x (1 - x)`` the ansatz ``eta = h(t) x + g(t)`` closes the
regularized Lagrangian Euler system into two ODEs:

    h'' =  4 A / h^2 - 4 kappa A h'
    g'' = -2 A / h^2 + 2 kappa A h'

with ``h(0) = 1``, ``g(0) = 0``, ``h'(0) = beta`` and ``g'(0) = delta``, so the
velocity ``v = h' x + g'`` is affine in ``x`` for all time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy.integrate import solve_ivp

from .errors import FlowCollapse, NoConvergence
from .function_space import ScalarField

ODE_RTOL = 1e-13
ODE_ATOL = 1e-15


@dataclass(frozen=True, eq=False)
class AffineOracle:
    A: float = 1.0
    beta: float = 0.0
    delta: float = 0.0
    kappa: float = 0.0
    rtol: float = ODE_RTOL
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.A <= 0:
            raise ValueError("A must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")

    def _rhs(self, t, y):
        h, hp, _, gp = y
        A, k = self.A, self.kappa
        return [hp, 4 * A / h**2 - 4 * k * A * hp, gp, -2 * A / h**2 + 2 * k * A * hp]

    def solution(self, t_final):
        """Dense ODE solution on ``[0, t_final]``."""
        key = float(t_final)
        for cached_t, sol in self._cache.items():
            if cached_t >= key:
                return sol

        def collapse(t, y):
            return y[0] - 1e-8

        collapse.terminal = True
        sol = solve_ivp(
            self._rhs, (0.0, key), [1.0, self.beta, 0.0, self.delta],
            method="DOP853", rtol=self.rtol, atol=ODE_ATOL * self.rtol / ODE_RTOL,
            dense_output=True, events=collapse,
        )
        if sol.status == 1 or not sol.success:
            raise FlowCollapse(f"h(t) collapsed before t = {key} (stopped at {sol.t[-1]:.6g})")
        self._cache[key] = sol
        return sol

    def state(self, t):
        """``(h, h', g, g')`` at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        return self.solution(max(float(np.max(t)), 1e-300)).sol(t)

    def velocity(self, t, x):
        """``v(t, x)``; a 2-D array ``(len(t), len(x))`` when ``t`` is an array."""
        _, hp, _, gp = self.state(t)
        return np.multiply.outer(hp, x) + np.asarray(gp)[..., None] if np.ndim(t) else hp * np.asarray(x) + gp

    def first_integral(self, t):
        """``h'^2 / 2 + 4 A / h``, conserved when kappa = 0."""
        h, hp, _, _ = self.state(t)
        return 0.5 * hp**2 + 4 * self.A / h

    def jet(self, t, order):
        """Time derivatives ``(h^(k), g^(k))`` for ``k = 0..order`` at one time.

        Taylor recursion on the ODE, independent of any spatial machinery.
        """
        h0, h1, g0, g1 = self.state(float(t))
        A, kap = self.A, self.kappa
        H = [h0, h1]
        G = [g0, g1]
        inv2 = [h0**-2]  # Taylor coefficients of h^-2
        p = -2.0
        for n in range(order - 1):
            # extend h^-2 to degree n
            if len(inv2) <= n:
                m = len(inv2)
                acc = sum(((p + 1) * k - m) * H[k] * inv2[m - k] for k in range(1, m + 1))
                inv2.append(acc / (m * H[0]))
            denom = (n + 1) * (n + 2)
            H.append((4 * A * inv2[n] - 4 * kap * A * (n + 1) * H[n + 1]) / denom)
            G.append((-2 * A * inv2[n] + 2 * kap * A * (n + 1) * H[n + 1]) / denom)
        fact = [math.factorial(k) for k in range(order + 1)]
        return (np.array(H[: order + 1]) * fact, np.array(G[: order + 1]) * fact)


def affine_solution(A, beta, delta, kappa, t, grid=None):
    """Exact ``(v, eta_x)`` at time ``t``: an affine velocity field and ``h(t)``."""
    oracle = AffineOracle(A, beta, delta, kappa)
    h, hp, _, gp = oracle.state(float(t))
    # Chebyshev on [0, 1]: c0 + c1 (2x - 1)
    v = ScalarField.from_chebyshev([gp + 0.5 * hp, 0.5 * hp], grid)
    return v, float(h)


_GL_X, _GL_W = legendre.leggauss(10)


def _gauss(f, a, b):
    x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_X
    return 0.5 * (b - a) * float(np.dot(_GL_W, f(x)))


def quadrature_oracle(integrand, tol=1e-12, a=0.0, b=1.0, max_depth=60, full_output=False):
    """Adaptive Gauss-Legendre panel bisection on ``(a, b)``.

    A panel is accepted when the 10-point rule and the sum over its two halves
    agree to ``tol`` scaled by the panel's share of the interval; the accepted
    value gets the Richardson correction ``(Q2 - Q1) / (2^20 - 1)``.  Nodes
    are interior, so integrands may be singular-looking (0/0) at ``a``, ``b``.
    """
    total, err = 0.0, 0.0
    stack = [(a, b, _gauss(integrand, a, b), 0)]
    length = b - a
    while stack:
        lo, hi, q1, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gauss(integrand, lo, mid), _gauss(integrand, mid, hi)
        q2 = left + right
        diff = abs(q2 - q1)
        if diff <= max(tol * (hi - lo) / length, 4 * np.finfo(float).eps * abs(q2)):
            total += q2 + (q2 - q1) / (2.0**20 - 1.0)
            err += diff
        elif depth >= max_depth:
            raise NoConvergence(f"quadrature stalled on [{lo:.3e}, {hi:.3e}] (estimate {diff:.2e})")
        else:
            stack.append((lo, mid, left, depth + 1))
            stack.append((mid, hi, right, depth + 1))
    return (total, err) if full_output else total
