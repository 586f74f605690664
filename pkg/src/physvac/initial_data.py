"""Density profiles, initial velocities and the quantities derived from them at t = 0."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import Chebyshev, legendre

from .errors import GammaOutOfRange, VacuumConditionViolated
from .function_space import (
    UNIT,
    PiecewiseSeries,
    ScalarField,
    as_chebyshev,
    chop,
    default_grid,
    interpolate,
)
from .jets import time_derivatives

DENSITY_KINDS = ("quadratic", "power", "sampled")

# a boundary slope this far below the floor still counts as meeting it
SLOPE_TOL = 1e-10


# {{{ density


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """``rho0`` and ``w = rho0^(gamma-1)`` with the constants of the vacuum condition.

    ``vacuum_slope_alpha`` is the width of the boundary layers on which
    ``|w'|`` stays above half the boundary slope floor; ``interior_floor`` is
    the minimum of ``w`` where ``d(x) >= alpha``.
    """

    rho0: ScalarField
    sound: ScalarField
    gamma: float
    kind: str
    vacuum_slope_alpha: float
    interior_floor: float
    boundary_slope: float
    params: dict = field(default_factory=dict)

    @cached_property
    def rho0_series(self):
        return as_chebyshev(self.rho0.series)

    @cached_property
    def reduced_rho0(self):
        """``rho0 / (x (1 - x))`` by exact Chebyshev division; positive on [0, 1]."""
        return chop(self.rho0_series // Chebyshev(_quadratic_coef(1.0), domain=list(UNIT)))

    @cached_property
    def sound_series(self):
        return as_chebyshev(self.sound.series)

    @property
    def drho0(self):
        return self.rho0.deriv(1)

    @property
    def d2rho0(self):
        return self.rho0.deriv(2)

    @property
    def d3rho0(self):
        return self.rho0.deriv(3)

    @property
    def grid(self):
        return self.rho0.grid


def _quadratic_coef(A):
    # A x (1 - x) = A/8 - (A/8) T_2(2x - 1)
    return [A / 8.0, 0.0, -A / 8.0]


def _power_of_quadratic(A, m, grid):
    """``(A x (1 - x))^m`` with three closed-form derivatives (Chebyshev if ``m`` is a whole number)."""
    if float(m).is_integer() and m >= 1:
        base = Chebyshev(_quadratic_coef(A), domain=list(UNIT))
        return ScalarField(grid, chop(base ** int(m)))

    def p(x):
        return A * x * (1.0 - x)

    def f0(x):
        with np.errstate(all="ignore"):
            return p(x) ** m

    def f1(x):
        with np.errstate(all="ignore"):
            return m * A * p(x) ** (m - 1) * (1 - 2 * x)

    def f2(x):
        with np.errstate(all="ignore"):
            q = 1 - 2 * x
            return m * (m - 1) * A**2 * p(x) ** (m - 2) * q**2 - 2 * m * A * p(x) ** (m - 1)

    def f3(x):
        with np.errstate(all="ignore"):
            q = 1 - 2 * x
            return (m * (m - 1) * (m - 2) * A**3 * p(x) ** (m - 3) * q**3
                    - 6 * m * (m - 1) * A**2 * p(x) ** (m - 2) * q)

    return ScalarField.from_derivatives((f0, f1, f2, f3), grid)


def validate_density(rho0, sound, slope_floor=1.0):
    """Check the vacuum condition; return ``(alpha, interior_floor, boundary_slope)``.

    Raises :class:`VacuumConditionViolated` naming the failing node and condition.
    """
    grid = rho0.grid
    x = grid.nodes
    rv = rho0.values
    scale = max(1.0, float(np.max(np.abs(rv))))
    for end in (0.0, 1.0):
        val = float(rho0(end))
        if not abs(val) <= 1e-10 * scale:
            raise VacuumConditionViolated(f"rho0({end:g}) = {val:.3e} is not zero", end, "rho0 = 0 on the boundary")
    bad = np.nonzero(~(rv > 0.0))[0]
    if bad.size:
        node = float(x[bad[0]])
        raise VacuumConditionViolated(f"rho0 is not positive at x = {node:.6g}", node, "rho0 > 0 in I")

    dw = sound.deriv(1)
    with np.errstate(all="ignore"):
        ends = np.array([float(dw(0.0)), float(dw(1.0))])
    slopes = np.abs(ends)
    for end, slope in zip((0.0, 1.0), slopes):
        if not np.isfinite(slope):
            raise VacuumConditionViolated(
                f"|w'({end:g})| is infinite", end, "0 < |w'| < inf on the boundary")
        if slope < slope_floor - SLOPE_TOL:
            raise VacuumConditionViolated(
                f"|w'({end:g})| = {slope:.3e} is below {slope_floor:g}", end, "|w'| >= 1 on the boundary")

    # alpha: extend the boundary layer while |w'| stays above half the floor
    d = np.minimum(x, 1.0 - x)
    order = np.argsort(d, kind="stable")
    ok = np.abs(dw.values[order]) >= 0.5 * slope_floor
    first_bad = int(np.argmin(ok)) if not ok.all() else ok.size
    if first_bad == 0:
        node = float(x[order[0]])
        raise VacuumConditionViolated(
            f"|w'| drops below {0.5 * slope_floor:g} at x = {node:.6g}", node, "|w'| >= 1/2 near the boundary")
    alpha = float(d[order[first_bad - 1]])
    interior = sound.values[d >= alpha]
    floor_val = float(np.min(interior))
    if not floor_val > 0.0:
        node = float(x[d >= alpha][np.argmin(interior)])
        raise VacuumConditionViolated(f"w = {floor_val:.3e} at x = {node:.6g}", node, "w >= C_alpha > 0 inside")
    return alpha, floor_val, float(np.min(slopes))


def make_density(kind="quadratic", gamma=2.0, *, A=1.0, samples=None, grid=None, slope_floor=1.0):
    """Build and validate a density profile.

    ``quadratic``: ``rho0 = A x (1 - x)``.  ``power``: ``rho0 = (A x (1 - x))^(1/(gamma-1))``,
    so that ``w`` is the quadratic.  ``sampled``: ``rho0`` given by the callable ``samples``.
    """
    if not gamma > 1.0:
        raise GammaOutOfRange(f"gamma must exceed 1, got {gamma}")
    grid = grid or default_grid()
    if kind == "quadratic":
        rho0 = _power_of_quadratic(A, 1, grid)
        sound = _power_of_quadratic(A, gamma - 1.0, grid)
    elif kind == "power":
        rho0 = _power_of_quadratic(A, 1.0 / (gamma - 1.0), grid)
        sound = _power_of_quadratic(A, 1, grid)
    elif kind == "sampled":
        if samples is None:
            raise ValueError("kind 'sampled' needs a callable in `samples`")
        if isinstance(samples, ScalarField):
            rho0 = samples.with_grid(grid)
        else:
            rho0 = ScalarField.from_function(samples, grid)
        if gamma == 2.0:
            sound = rho0
        else:
            series = rho0.to_chebyshev()
            with np.errstate(all="ignore"):
                sound = ScalarField.from_function(lambda x: np.abs(series(x)) ** (gamma - 1.0), grid)
    else:
        raise ValueError(f"unknown density kind {kind!r}; expected one of {DENSITY_KINDS}")
    alpha, floor_val, slope = validate_density(rho0, sound, slope_floor)
    return DensityProfile(rho0, sound, float(gamma), kind, alpha, floor_val, slope, {"A": A})


# }}}


# {{{ initial data


@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial velocity, density and the time derivatives ``d^k v/dt^k (0)``."""

    u0: ScalarField
    density: DensityProfile
    kappa_used: float
    time_derivs: tuple


IDENTITY = Chebyshev([0.5, 0.5], domain=list(UNIT))


def initial_time_derivatives(u0, density, kappa=0.0, k_max=4):
    """``[u0, v_t(0), ..., d^k_max v/dt^k_max (0)]`` computed from the equation with ``eta = x``.

    Each time derivative consumes one spatial derivative of ``u0`` without
    viscosity and two with it.
    """
    if not 0 <= k_max <= 5:
        raise ValueError("k_max must lie in 0..5")
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if kappa > 0 and density.gamma != 2.0:
        raise GammaOutOfRange("viscous regularization is implemented for gamma = 2 only")
    u0.require_order(2 * k_max if kappa > 0 else k_max)
    v = chop(u0.to_chebyshev())
    stack = time_derivatives(
        v, IDENTITY, density.sound_series, gamma=density.gamma, kappa=kappa,
        rho0=density.rho0_series if kappa > 0 else None, order=k_max,
    )
    return tuple(ScalarField(u0.grid, s) for s in stack)


def make_initial_data(u0, density, kappa=0.0, k_max=4):
    """Bundle ``u0`` (a field or vectorized callable) with its time-derivative stack."""
    if not isinstance(u0, ScalarField):
        u0 = ScalarField.from_function(u0, density.grid)
    return InitialData(u0, density, float(kappa), initial_time_derivatives(u0, density, kappa, k_max))


def _variable_width(x, epsilon):
    # shrinks to zero at both ends so the smoothed function keeps its boundary values
    return epsilon * -np.expm1(-x / epsilon) * -np.expm1(-(1.0 - x) / epsilon)


def _smoothing_rule(n_panels=8, n_points=12):
    """Composite Gauss-Legendre nodes and weights on [-1, 1]."""
    xg, wg = legendre.leggauss(n_points)
    edges = np.linspace(-1.0, 1.0, n_panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (a + b) + 0.5 * (b - a) * xg).ravel(), (0.5 * (b - a) * wg).ravel()


def _breakpoints(func):
    series = getattr(func, "series", None)
    if isinstance(series, PiecewiseSeries):
        return tuple(float(b) for b in series.breaks[1:-1])
    return ()


def smooth(func, epsilon, kernel_power=8, breakpoints=None):
    """Convolution of ``func`` with the bump ``(1 - s^2)^kernel_power`` of width ``epsilon(x)``.

    The kernel integral is split wherever the shifted argument crosses one of
    ``breakpoints`` (taken from a piecewise field when not given), so kinks of
    ``func`` do not spoil the quadrature.
    """
    if not 0.0 < epsilon < 0.25:
        raise ValueError("epsilon must lie in (0, 1/4)")
    r, wr = _smoothing_rule()
    norm = float(np.dot(wr, (1.0 - r * r) ** kernel_power))
    breaks = np.asarray(_breakpoints(func) if breakpoints is None else breakpoints, dtype=float)

    def smoothed(x):
        x = np.asarray(x, dtype=float)
        width = _variable_width(x, epsilon)[..., None]
        inner = np.clip((x[..., None] - breaks) / width, -1.0, 1.0)
        ones = np.ones(x.shape + (1,))
        cuts = np.sort(np.concatenate([-ones, inner, ones], axis=-1), axis=-1)
        lo, hi = cuts[..., :-1, None], cuts[..., 1:, None]
        s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * r
        w = 0.5 * (hi - lo) * wr * (1.0 - s * s) ** kernel_power / norm
        args = np.clip(x[..., None, None] - width[..., None] * s, 0.0, 1.0)
        return np.sum(func(args) * w, axis=(-2, -1))

    return interpolate(smoothed, tol=1e-13)


def mollify(data, epsilon, kernel_power=8):
    """Smooth ``u0`` and ``rho0`` and rebuild (and revalidate) the initial data."""
    grid = data.u0.grid
    u0 = ScalarField(grid, smooth(data.u0, epsilon, kernel_power))
    rho = smooth(data.density.rho0, epsilon, kernel_power)
    # the interpolant reproduces rho0(0) = rho0(1) = 0 only to round-off; remove that residue
    r0, r1 = rho(0.0), rho(1.0)
    rho = rho - Chebyshev([0.5 * (r0 + r1), 0.5 * (r1 - r0)], domain=list(UNIT))
    density = make_density("sampled", data.density.gamma, samples=ScalarField(grid, rho), grid=data.density.grid)
    k_max = len(data.time_derivs) - 1
    return InitialData(u0, density, data.kappa_used, initial_time_derivatives(u0, density, data.kappa_used, k_max))


@dataclass(frozen=True)
class InitialNorms:
    M0: float
    N0: float
    m0_components: dict
    n0_components: dict


def initial_state(data):
    from .state import LagrangianState

    grid = data.u0.grid
    eta = ScalarField(grid, IDENTITY)
    return LagrangianState(0.0, data.u0, eta, eta.deriv(1), data.time_derivs)


def initial_norms(data):
    """The initial energy ``M0`` and the higher-order quantity ``N0``."""
    from .diagnostics import energy_snapshot
    from .function_space import sobolev_norm

    stack = data.time_derivs
    if len(stack) < 6:
        stack = initial_time_derivatives(data.u0, data.density, data.kappa_used, 5)
    snap = energy_snapshot(initial_state(data), data.density)
    rho = data.density.rho0
    n0 = {
        "sqrt_rho0_dt5_dx_v_L2": math.sqrt(rho.grid.integrate(rho.values * stack[5].derivative_values(1) ** 2)),
        "dt4v_H1": sobolev_norm(stack[4], 1),
        "dt3v_H2": sobolev_norm(stack[3], 2),
        "dt2v_H2": sobolev_norm(stack[2], 2),
        "dt1v_H2": sobolev_norm(stack[1], 2),
        "u0_H2": sobolev_norm(stack[0], 2),
    }
    return InitialNorms(snap.total, sum(c * c for c in n0.values()), dict(snap.components), n0)


# }}}
