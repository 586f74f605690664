"""Energy functionals and a-posteriori checks on computed trajectories."""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from .errors import StackDepthInsufficient
from .function_space import default_grid, distance_weighted, lobatto_interpolation_matrix, sobolev_norm

# order of the Sobolev norm applied to d^s v / dt^s in the energy
TIME_DERIVATIVE_ORDERS = (2.0, 1.5, 1.0, 0.5, 0.0)

ENERGY_COMPONENTS = (
    "dt0v_H2", "dt1v_H3/2", "dt2v_H1", "dt3v_H1/2", "dt4v_L2",
    "rho0_v_H3", "rho0_dt2v_H2", "rho0_dt4v_H1",
    "sqrt_rho0_dt1_dxx_v_L2", "sqrt_rho0_dt3_dx_v_L2",
)


def _require_stack(state, depth):
    if len(state.dt_stack) < depth:
        raise StackDepthInsufficient(
            f"need time derivatives up to order {depth - 1}, state carries {len(state.dt_stack) - 1}"
        )


def _weighted_sq(weight_values, field, order, grid):
    return grid.integrate(weight_values * field.with_grid(grid).derivative_values(order) ** 2)


@dataclass(frozen=True)
class EnergySnapshot:
    t: float
    components: dict

    @property
    def total(self):
        return float(sum(self.components.values()))


@dataclass(frozen=True)
class GammaEnergySnapshot:
    t: float
    gamma: float
    a0: int
    components: dict

    @property
    def total(self):
        return float(sum(self.components.values()))


def energy_snapshot(state, density):
    """Squared terms of the higher-order energy at one time (their sum is ``E(t)``)."""
    _require_stack(state, 5)
    stack = state.dt_stack
    rho = density.rho0
    grid = rho.grid
    comps = {}
    for s, order in enumerate(TIME_DERIVATIVE_ORDERS):
        comps[ENERGY_COMPONENTS[s]] = sobolev_norm(stack[s].with_grid(grid), order) ** 2
    for s in range(3):
        weighted = rho * stack[2 * s].with_grid(grid)
        comps[ENERGY_COMPONENTS[5 + s]] = sobolev_norm(weighted, 3 - s) ** 2
    comps["sqrt_rho0_dt1_dxx_v_L2"] = _weighted_sq(rho.values, stack[1], 2, grid)
    comps["sqrt_rho0_dt3_dx_v_L2"] = _weighted_sq(rho.values, stack[3], 1, grid)
    return EnergySnapshot(float(state.t), comps)


def a0_for_gamma(gamma):
    """Number of extra weighted terms in the general-gamma energy, ``ceil(1/(gamma-1)) - 1``.

    Evaluated in exact rational arithmetic on the given value (a float or a
    :class:`~fractions.Fraction`), so ``1 + 1/(gamma-1) - a0`` lies in ``(1, 2]``
    without rounding surprises near integer ``1/(gamma-1)``.
    """
    g = Fraction(gamma)
    if not g > 1:
        raise ValueError("gamma must exceed 1")
    return math.ceil(1 / (g - 1)) - 1


def energy_gamma(state, density, gamma=None):
    """General-gamma energy: ``d`` replaces ``rho0`` and extra ``d``-weighted terms appear."""
    gamma = density.gamma if gamma is None else gamma
    a0 = a0_for_gamma(gamma)
    _require_stack(state, 5 + a0)
    stack = state.dt_stack
    grid = density.grid
    d = np.minimum(grid.nodes, 1.0 - grid.nodes)
    comps = {}
    for s, order in enumerate(TIME_DERIVATIVE_ORDERS):
        comps[ENERGY_COMPONENTS[s]] = sobolev_norm(stack[s].with_grid(grid), order) ** 2
    for s in range(3):
        weighted = distance_weighted(stack[2 * s].with_grid(grid))
        comps[f"d_dt{2 * s}v_H{3 - s}"] = sobolev_norm(weighted, 3 - s) ** 2
    comps["sqrt_d_dt1_dxx_v_L2"] = _weighted_sq(d, stack[1], 2, grid)
    comps["sqrt_d_dt3_dx_v_L2"] = _weighted_sq(d, stack[3], 1, grid)
    for a in range(a0 + 1):
        power = 1.0 + 1.0 / (gamma - 1.0) - a
        comps[f"d^{power:g}_dt{4 + a0 - a}_dx_v_L2"] = _weighted_sq(d ** power, stack[4 + a0 - a], 1, grid)
    return GammaEnergySnapshot(float(state.t), float(gamma), a0, comps)


# {{{ bound checks


@dataclass(frozen=True)
class BoundReport:
    """How ``E(t)`` compares with ``2 M0``.

    ``fitted_inequality = (c0, c1)`` is a bound ``sup_{s<=t} E <= c0 + c1 t sup_{s<=t} E``
    valid on every sample; ``c1`` comes from a least-squares fit.
    """

    M0: float
    sup_E: float
    ratio: float
    first_violation_t: float | None
    T_good: float
    fitted_inequality: tuple = field(default=(float("nan"), float("nan")))


def check_bound(snapshots, M0):
    t = np.array([s.t for s in snapshots], dtype=float)
    E = np.array([s.total for s in snapshots], dtype=float)
    if M0 <= 0:
        raise ValueError("M0 must be positive")
    sup_E = float(E.max())
    over = np.nonzero(E > 2.0 * M0)[0]
    first = None
    if over.size:
        i = int(over[0])
        if i == 0:
            first = float(t[0])
        else:
            frac = (2.0 * M0 - E[i - 1]) / (E[i] - E[i - 1])
            first = float(t[i - 1] + frac * (t[i] - t[i - 1]))
    T_good = first if first is not None else float(t[-1])

    running = np.maximum.accumulate(E)
    if t.size > 1:
        X = np.column_stack([np.ones_like(t), t * running])
        (c0, c1), *_ = np.linalg.lstsq(X, running, rcond=None)
        c0 += float(np.max(running - (c0 + c1 * t * running)))
    else:
        c0, c1 = float(running[0]), 0.0
    return BoundReport(float(M0), sup_E, sup_E / M0, first, T_good, (float(c0), float(c1)))


# }}}


# {{{ physical energy


def physical_energy(state, density):
    """``int rho0 v^2/2 + rho0^gamma eta_x^(1-gamma)/(gamma-1)``."""
    grid = density.grid
    g = density.gamma
    rho, w = density.rho0.values, density.sound.values
    v = state.v.with_grid(grid).values
    q = state.eta_x.with_grid(grid).values
    return grid.integrate(0.5 * rho * v * v + rho * w * q ** (1.0 - g) / (g - 1.0))


def energy_history(traj, stride=1):
    """Physical energy and accumulated viscous dissipation along a trajectory.

    Returns ``(t, E, D)`` with ``D(t) = kappa int_0^t int rho0^2 v_x^2``.
    """
    density = traj.density
    grid = density.grid
    rho = density.rho0.values
    idx = np.arange(0, traj.t.size, stride)
    if idx[-1] != traj.t.size - 1:
        idx = np.append(idx, traj.t.size - 1)
    E = np.empty(idx.size)
    rate = np.empty(idx.size)
    for j, i in enumerate(idx):
        st = traj.state(i, grid=grid)
        E[j] = physical_energy(st, density)
        rate[j] = traj.kappa * grid.integrate(rho * rho * st.v.derivative_values(1) ** 2)
    t = traj.t[idx]
    D = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (rate[1:] + rate[:-1]))])
    return t, E, D


def energy_trajectory(traj, stride=1, gamma_form=False):
    """Higher-order energy snapshots every ``stride`` stored steps (last step included)."""
    idx = list(range(0, traj.t.size, stride))
    if idx[-1] != traj.t.size - 1:
        idx.append(traj.t.size - 1)
    out = []
    a0 = a0_for_gamma(traj.gamma) if gamma_form else 0
    for i in idx:
        st = traj.state(i, derivatives=4 + a0)
        out.append(energy_gamma(st, traj.density) if gamma_form else energy_snapshot(st, traj.density))
    return out


# }}}


# {{{ time-regularized comparison


@dataclass(frozen=True)
class RegularizationReport:
    """``f = 2 (rho0 u'' + 2 rho0' u')`` with ``u = d^2 v/dt^2`` and ``g = f + kappa f_t``."""

    t: np.ndarray
    f_norm: np.ndarray
    g_norm: np.ndarray
    holds: bool
    margin: float


def regularization_monitor(traj, stride=1, tol=1e-8):
    """Check ``||f(t)|| <= max(||f(0)||, sup ||g||)`` in L2 along a trajectory."""
    density = traj.density
    grid = density.grid
    rho, drho = density.rho0.values, density.drho0.values
    idx = list(range(0, traj.t.size, stride))
    fn, gn = [], []
    for i in idx:
        st = traj.state(i, derivatives=3, grid=grid)
        u, ut = st.dt_stack[2], st.dt_stack[3]
        f = 2.0 * (rho * u.derivative_values(2) + 2.0 * drho * u.derivative_values(1))
        ft = 2.0 * (rho * ut.derivative_values(2) + 2.0 * drho * ut.derivative_values(1))
        g = f + traj.kappa * ft
        fn.append(math.sqrt(grid.integrate(f * f)))
        gn.append(math.sqrt(grid.integrate(g * g)))
    fn, gn = np.array(fn), np.array(gn)
    bound = max(fn[0], gn.max())
    margin = float(bound * (1.0 + tol) - fn.max())
    return RegularizationReport(traj.t[idx], fn, gn, margin >= 0.0, margin)


# }}}


def state_difference_norms(a, b, grid):
    """L2, H1 and H2 norms of ``v_a - v_b`` for two states."""
    diff = a.v.with_grid(grid) - b.v.with_grid(grid)
    return tuple(sobolev_norm(diff, s) for s in (0, 1, 2))



def trajectory_l2_error(traj, exact, grid=None):
    """``sup_t ||v(t) - exact(t, .)||_L2`` with ``exact(t, x)`` vectorized over ``x``."""
    grid = grid or default_grid()
    V = traj.v @ lobatto_interpolation_matrix(traj.degree, grid.nodes).T
    errs = [math.sqrt(grid.integrate((V[i] - exact(t, grid.nodes)) ** 2)) for i, t in enumerate(traj.t)]
    return float(max(errs))


def trajectory_l2_difference(a, b, grid=None, sup=True):
    """Velocity difference of two trajectories on common times: sup-L2 or L2(0,T;L2)."""
    if a.t.size != b.t.size or not np.allclose(a.t, b.t, rtol=0, atol=1e-12):
        raise ValueError("trajectories are stored at different times")
    grid = grid or default_grid()
    Va = a.v @ lobatto_interpolation_matrix(a.degree, grid.nodes).T
    Vb = b.v @ lobatto_interpolation_matrix(b.degree, grid.nodes).T
    per_t = ((Va - Vb) ** 2) @ grid.quad_weights
    if sup:
        return float(math.sqrt(per_t.max()))
    return float(math.sqrt(np.trapezoid(per_t, a.t)))


__all__ = [
    "ENERGY_COMPONENTS", "EnergySnapshot", "GammaEnergySnapshot", "BoundReport",
    "RegularizationReport", "energy_snapshot", "energy_gamma", "a0_for_gamma", "check_bound",
    "physical_energy", "energy_history", "energy_trajectory", "regularization_monitor",
    "state_difference_norms", "trajectory_l2_error", "trajectory_l2_difference",
]
