"""Time derivatives of a Lagrangian state by Taylor-mode recursion.

Given ``v(t0)`` and ``eta(t0)`` as Chebyshev series, the equation of motion

    v_t = -(gamma/(gamma-1)) w' q^-gamma + gamma w q' q^(-gamma-1) + kappa (rho0 v'' + 2 rho0' v')

with ``q = eta'`` and ``w = rho0^(gamma-1)``, together with ``eta_t = v``,
determines every time derivative algebraically.  The recursion works with
Taylor coefficients ``V_n = d^n v / n!`` so that products are Cauchy sums and
powers ``q^p`` follow the classical J.C.P. Miller recurrence.
"""
from __future__ import annotations

import math

from numpy.polynomial import Chebyshev

from .function_space import chop, interpolate

PRODUCT_TOL = 1e-15


class _PowerSeries:
    """Taylor coefficients of ``a(t)^p`` where ``a`` is a growing coefficient list."""

    def __init__(self, a, p, tol):
        self.a, self.p, self.tol = a, p, tol
        a0 = a[0]
        self.inv0 = interpolate(lambda x: 1.0 / a0(x))
        self.b = [interpolate(lambda x: a0(x) ** p)]

    def __getitem__(self, n):
        while len(self.b) <= n:
            m = len(self.b)
            acc = Chebyshev([0.0], domain=self.a[0].domain)
            for k in range(1, m + 1):
                acc = acc + ((self.p + 1) * k - m) * (self.a[k] * self.b[m - k])
            self.b.append(chop(self.inv0 * acc / m, self.tol))
        return self.b[n]


def taylor_coefficients(v, eta, w, *, gamma=2.0, kappa=0.0, rho0=None, order=4, tol=PRODUCT_TOL):
    """Taylor coefficients ``[V_0, ..., V_order]`` of ``v`` about the current time.

    ``w`` is the Chebyshev series of ``rho0^(gamma-1)``; ``rho0`` (a Chebyshev
    series) is only needed when ``kappa > 0``.
    """
    if kappa > 0 and rho0 is None:
        raise ValueError("rho0 is required when kappa > 0")
    dw = w.deriv()
    if kappa > 0:
        drho = rho0.deriv()
    c_w = gamma / (gamma - 1.0)

    V, H = [v], [eta]
    Q = [eta.deriv()]
    Qx = [eta.deriv(2)]
    pow_a = _PowerSeries(Q, -gamma, tol)
    pow_b = _PowerSeries(Q, -gamma - 1.0, tol)
    for n in range(order):
        r = -c_w * (dw * pow_a[n])
        conv = Chebyshev([0.0], domain=v.domain)
        for j in range(n + 1):
            conv = conv + Qx[j] * pow_b[n - j]
        r = r + gamma * (w * conv)
        if kappa > 0:
            r = r + kappa * (rho0 * V[n].deriv(2) + 2.0 * drho * V[n].deriv())
        V.append(chop(r / (n + 1), tol))
        H.append(chop(V[n] / (n + 1), tol))
        Q.append(H[-1].deriv())
        Qx.append(H[-1].deriv(2))
    return V


def time_derivatives(v, eta, w, *, gamma=2.0, kappa=0.0, rho0=None, order=4, tol=PRODUCT_TOL):
    """``[v, v_t, ..., d^order v / dt^order]`` as Chebyshev series."""
    V = taylor_coefficients(v, eta, w, gamma=gamma, kappa=kappa, rho0=rho0, order=order, tol=tol)
    return [math.factorial(n) * c for n, c in enumerate(V)]
