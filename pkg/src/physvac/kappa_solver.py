"""Solvers for the viscously regularized Lagrangian Euler system.

Two independent discretizations are provided.

``picard_solve`` linearizes around a frozen flow gradient ``eta_bar_x`` and
evolves ``X = rho0 v_x`` in the Dirichlet sine basis.  Writing ``v`` through
``X`` removes the degenerate weight: with ``P_i = e_i / rho0`` one has
``v = f(t) + sum_i lambda_i int_0^x P_i``, and the Galerkin system reads

    M lambda' + kappa K lambda = F(eta_bar)

with ``M_ki = (e_i / rho0, e_k)``, ``K_ki = (e_i' + rho0' e_i / rho0, e_k')`` and
``F_k = (2 / q (rho0' / q - rho0 q' / q^2), e_k')``, ``q = eta_bar_x``.  The
boundary value ``f(t) = v(t, 0)`` is recovered from the equation at ``x = 0``.
Iterating the map ``eta_bar -> eta`` to a fixed point solves the nonlinear problem.

``direct_mol_solve`` collocates ``(v, eta)`` on Chebyshev-Lobatto points and
integrates the full nonlinear system with an implicit trapezoid rule and Newton.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import zeta
from numpy.polynomial import Chebyshev

from .errors import (
    DirichletViolation,
    EtaRangeViolation,
    GammaOutOfRange,
    NoConvergence,
    SolverFailure,
)
from .function_space import (
    ScalarField,
    build_sine_basis,
    chebyshev_from_lobatto,
    interpolate,
    lobatto_differentiation_matrix,
    lobatto_nodes,
    make_grid,
)
from .state import STATE_CHOP, LagrangianState, Trajectory

log = logging.getLogger(__name__)

INTEGRATORS = ("implicit-trapezoid", "bdf2")
ETA_RANGE = (0.5, 1.5)

__all__ = [
    "SolverConfig", "LagrangianState", "Trajectory", "GalerkinSystem", "PicardTrace",
    "assemble_galerkin", "step_linear_X", "reconstruct_velocity", "picard_solve",
    "direct_mol_solve", "gamma_general_rhs", "solve",
]


@dataclass(frozen=True)
class SolverConfig:
    kappa: float
    n_modes: int
    dt: float
    t_final: float
    gamma: float = 2.0
    picard_tol: float = 1e-10
    picard_max_iter: int = 30
    time_integrator: str = "implicit-trapezoid"
    n_panels: int | None = None

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError("kappa must be nonnegative")
        if not self.gamma > 1:
            raise GammaOutOfRange(f"gamma must exceed 1, got {self.gamma}")
        if self.n_modes < 2:
            raise ValueError("n_modes must be at least 2")
        if not self.dt > 0 or not self.t_final > 0:
            raise ValueError("dt and t_final must be positive")
        if self.dt > self.t_final:
            raise ValueError("dt exceeds t_final")
        if not self.picard_tol > 0 or self.picard_max_iter < 1:
            raise ValueError("picard_tol must be positive and picard_max_iter at least 1")
        if self.time_integrator not in INTEGRATORS:
            raise ValueError(f"time_integrator must be one of {INTEGRATORS}")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


def _check_eta_range(q, t, x):
    lo, hi = ETA_RANGE
    bad = np.nonzero((q < lo) | (q > hi))
    if bad[0].size:
        j = tuple(b[0] for b in bad)
        tj = float(np.broadcast_to(t, q.shape)[j]) if np.ndim(t) else float(t)
        raise EtaRangeViolation(
            f"eta_x = {q[j]:.6g} left [{lo}, {hi}]", tj, float(np.broadcast_to(x, q.shape)[j]), float(q[j])
        )


def _cumtrapz(y, t):
    """Cumulative trapezoid along axis 0, starting at zero."""
    y = np.asarray(y, dtype=float)
    dt = np.diff(t).reshape((-1,) + (1,) * (y.ndim - 1))
    inc = 0.5 * dt * (y[1:] + y[:-1])
    return np.concatenate([np.zeros((1,) + y.shape[1:]), np.cumsum(inc, axis=0)])


# {{{ Galerkin pieces


def _mode_over_quadratic(k, x):
    """``e_k(x) / (x (1 - x))`` with the sine evaluated at the nearer endpoint distance."""
    left = x <= 0.5
    d = np.where(left, x, 1.0 - x)
    sign = np.where(left, 1.0, (-1.0) ** (k + 1))
    return math.sqrt(2.0) * sign * np.sin(k * np.pi * d) / (x * (1.0 - x))


def _trace_tail(n, n_fit=8):
    """Linear functional estimating ``sum_{k>n} e_k'(0) lambda_k`` from the top modes.

    For ``X`` vanishing at both ends, ``lambda_k ~ -sqrt(2) (X''(0) - (-1)^k X''(1)) / (k pi)^3``;
    fitting ``X''(0)`` and ``X''(1)`` on the last ``n_fit`` modes and summing the
    tail with Hurwitz zeta lifts the O(1/n) truncation error of the trace.
    """
    n_fit = min(n_fit, n)
    k = np.arange(n - n_fit + 1, n + 1)
    sign = (-1.0) ** k
    design = np.column_stack([np.ones(n_fit), -sign])
    scaled = np.linalg.pinv(design) * ((k * np.pi) ** 3 / -math.sqrt(2.0))  # lambda -> (X''(0), X''(1))
    k_even = n + 1 if (n + 1) % 2 == 0 else n + 2
    k_odd = n + 1 if (n + 1) % 2 == 1 else n + 2
    s_even = 0.25 * zeta(2.0, k_even / 2.0) / np.pi**2
    s_odd = 0.25 * zeta(2.0, k_odd / 2.0) / np.pi**2
    # sum_{k>n} sqrt(2) k pi lambda_k = -2 (a (s_even + s_odd) - b (s_even - s_odd))
    out = np.zeros(n)
    out[n - n_fit:] = -2.0 * np.array([s_even + s_odd, -(s_even - s_odd)]) @ scaled
    return out


class _Workspace:
    """Density- and basis-dependent matrices shared by all Picard iterations."""

    def __init__(self, density, basis, n_out):
        grid = basis.grid
        x = grid.nodes
        w = grid.quad_weights
        rho_series = density.rho0_series
        self.rho = rho_series(x)
        self.drho = rho_series.deriv()(x)
        self.drho_left = float(rho_series.deriv()(0.0))
        n = basis.n_modes
        quot, anti = [], []
        reduced = density.reduced_rho0
        for k in range(1, n + 1):
            q = interpolate(lambda s, k=k: _mode_over_quadratic(k, s) / reduced(s), tol=1e-14)
            quot.append(q)
            anti.append(q.integ(lbnd=0.0))
        self.quot, self.anti = quot, anti
        E = basis.nodal
        dE = basis.evaluate(x, 1)
        P = np.column_stack([q(x) for q in quot])
        self.P, self.P1 = P, np.column_stack([q.deriv()(x) for q in quot])
        self.G = np.column_stack([a(x) for a in anti])
        self.mass = 0.5 * (E.T @ (w[:, None] * P) + (E.T @ (w[:, None] * P)).T)
        self.stiff = dE.T @ (w[:, None] * (dE + self.drho[:, None] * P))
        self.load = (w[:, None] * dE).T
        self.P_left = np.array([q(0.0) for q in quot])
        self.trace = basis.evaluate(np.array([0.0]), 1)[0] + self.drho_left * self.P_left
        self.trace = self.trace + 2.0 * _trace_tail(n)
        self.n_out = n_out
        self.x_out = lobatto_nodes(n_out)
        self.P_out = np.column_stack([q(self.x_out) for q in quot])
        self.G_out = np.column_stack([a(self.x_out) for a in anti])
        self.x = x
        self.w = w

    def forcing(self, q, qx):
        """``F`` for flow gradients ``q``, ``q'`` sampled on the grid (rows = times)."""
        phi = (2.0 / q) * (self.drho / q - self.rho * qx / q**2)
        return phi @ self.load.T


@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """``mass @ lambda' + kappa * stiffness @ lambda = forcing`` in the sine basis."""

    mass: np.ndarray
    stiffness: np.ndarray
    forcing: np.ndarray
    kappa: float
    basis: object


def assemble_galerkin(density, basis, eta_bar_x, kappa=0.0, t=0.0):
    """Matrices and load for the frozen flow gradient ``eta_bar_x`` (a field)."""
    ws = _Workspace(density, basis, 8)
    q = eta_bar_x.with_grid(basis.grid).values
    _check_eta_range(q, t, basis.grid.nodes)
    qx = eta_bar_x.with_grid(basis.grid).derivative_values(1)
    return GalerkinSystem(ws.mass, ws.stiff, ws.forcing(q, qx), float(kappa), basis)


def step_linear_X(system, coeffs, dt, *, forcing_next=None, integrator="implicit-trapezoid", previous=None):
    """One step of the linear ODE for the sine coefficients of ``X = rho0 v_x``.

    ``forcing_next`` defaults to the system's (time-frozen) forcing.  ``bdf2``
    needs the coefficients of the step before in ``previous``.
    """
    M, K, k = system.mass, system.stiffness, system.kappa
    F0 = system.forcing
    F1 = F0 if forcing_next is None else forcing_next
    if integrator == "implicit-trapezoid" or previous is None:
        lhs = M + 0.5 * dt * k * K
        rhs = (M - 0.5 * dt * k * K) @ coeffs + 0.5 * dt * (F0 + F1)
    elif integrator == "bdf2":
        lhs = M + (2.0 / 3.0) * dt * k * K
        rhs = M @ ((4.0 * coeffs - previous) / 3.0) + (2.0 / 3.0) * dt * F1
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    return np.linalg.solve(lhs, rhs)


def reconstruct_velocity(X_history, times, density, kappa, eta_bar_x_left, u0_left, tol=1e-8):
    """Velocity fields from ``X = rho0 v_x`` histories.

    ``eta_bar_x_left`` holds ``eta_bar_x(t, 0)`` at each time.  The left trace
    ``f(t) = v(t, 0)`` follows from the equation evaluated at ``x = 0``:
    ``f' = -2 rho0'(0) / eta_bar_x(t,0)^2 + kappa (X' + rho0' X / rho0)(t, 0)``.
    """
    drho_left = float(density.rho0_series.deriv()(0.0))
    reduced = density.reduced_rho0
    quadratic = Chebyshev([0.125, 0.0, -0.125], domain=[0.0, 1.0])
    grid = density.grid
    antis, traces = [], []
    for X in X_history:
        scale = max(1.0, float(np.max(np.abs(X.values))))
        ends = X.endpoint_values()
        if max(abs(e) for e in ends) > tol * scale:
            raise DirichletViolation(f"X does not vanish at the boundary: {ends}")
        Xs = X.to_chebyshev()
        q = interpolate(lambda s, r=Xs // quadratic: r(s) / reduced(s))
        antis.append(q.integ(lbnd=0.0))
        traces.append(float(Xs.deriv()(0.0)) + drho_left * float(q(0.0)))
    times = np.asarray(times, dtype=float)
    rate = -2.0 * drho_left / np.asarray(eta_bar_x_left, dtype=float) ** 2 + kappa * np.array(traces)
    f = u0_left + _cumtrapz(rate, times)
    return [ScalarField(grid, a + fi) for a, fi in zip(antis, f)]


# }}}


# {{{ Picard iteration


@dataclass
class PicardTrace:
    """Residual history of the final horizon, earlier abandoned horizons, and ``v(T)`` per iterate."""

    residuals: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    restarts: list = field(default_factory=list)
    converged: bool = False
    T_used: float = float("nan")

    @property
    def iterations(self):
        return len(self.residuals)

    def contraction_ratios(self):
        r = np.asarray(self.residuals)
        return r[1:] / r[:-1] if r.size > 1 else np.array([])


class _PicardRun:
    def __init__(self, config, data, basis, ws):
        self.config = config
        self.data = data
        self.ws = ws
        self.basis = basis
        u0 = data.u0.with_grid(basis.grid)
        rhs = basis.nodal.T @ (ws.w * u0.derivative_values(1))
        self.lam0 = np.linalg.solve(ws.mass, rhs)
        self.u0_left = float(data.u0(0.0))

    def sweep(self, lam_bar, t):
        """One application of the Picard map: returns the new coefficient history."""
        ws, cfg = self.ws, self.config
        Lam = _cumtrapz(lam_bar, t)
        q = 1.0 + Lam @ ws.P.T
        _check_eta_range(q, t[:, None], ws.x[None, :])
        qx = Lam @ ws.P1.T
        F = ws.forcing(q, qx)
        dt = cfg.dt
        k = cfg.kappa
        lhs_tr = sla.lu_factor(ws.mass + 0.5 * dt * k * ws.stiff)
        explicit = ws.mass - 0.5 * dt * k * ws.stiff
        use_bdf = cfg.time_integrator == "bdf2"
        if use_bdf:
            lhs_bdf = sla.lu_factor(ws.mass + (2.0 / 3.0) * dt * k * ws.stiff)
        lam = np.empty_like(lam_bar)
        lam[0] = self.lam0
        for n in range(t.size - 1):
            if use_bdf and n > 0:
                rhs = ws.mass @ ((4.0 * lam[n] - lam[n - 1]) / 3.0) + (2.0 / 3.0) * dt * F[n + 1]
                lam[n + 1] = sla.lu_solve(lhs_bdf, rhs)
            else:
                rhs = explicit @ lam[n] + 0.5 * dt * (F[n] + F[n + 1])
                lam[n + 1] = sla.lu_solve(lhs_tr, rhs)
        q_left = 1.0 + Lam @ ws.P_left
        rate = -2.0 * ws.drho_left / q_left**2 + k * (lam @ ws.trace)
        f = self.u0_left + _cumtrapz(rate, t)
        return lam, f

    def final_velocity(self, iterate):
        lam, f = iterate
        v = f[-1] + self.ws.G_out @ lam[-1]
        return ScalarField(self.data.density.grid, chebyshev_from_lobatto(v))

    def distance(self, a, b, t):
        """``L2(0, T; H2)`` norm of the velocity difference between two iterates."""
        ws = self.ws
        dlam, df = a[0] - b[0], a[1] - b[1]
        dv = df[:, None] + dlam @ ws.G.T
        dv1 = dlam @ ws.P.T
        dv2 = dlam @ ws.P1.T
        per_t = (dv**2 + dv1**2 + dv2**2) @ ws.w
        return math.sqrt(max(0.0, float(np.trapezoid(per_t, t))))


def _picard_on(run, t, snapshots):
    """Iterate from the frozen guess ``v_bar = u0``; returns ``(iterate, residuals, converged)``."""
    cfg = run.config
    current = (np.tile(run.lam0, (t.size, 1)), np.full(t.size, run.u0_left))
    residuals = []
    growth = 0
    for _ in range(cfg.picard_max_iter):
        nxt = run.sweep(current[0], t)
        res = run.distance(nxt, current, t)
        residuals.append(res)
        snapshots.append(run.final_velocity(nxt))
        log.debug("picard iteration %d: residual %.3e", len(residuals), res)
        current = nxt
        if res < cfg.picard_tol:
            return current, residuals, True
        growth = growth + 1 if len(residuals) > 1 and res > residuals[-2] else 0
        if growth >= 3:
            return current, residuals, False
    return current, residuals, False


def picard_solve(config, data, *, n_out=None, grid=None):
    """Fixed-point iteration of the linearized problem; returns ``(Trajectory, PicardTrace)``.

    If the residual grows three times in a row the horizon is halved and the
    iteration restarts; :class:`NoConvergence` is raised once it drops below ``dt``.
    """
    if not config.kappa > 0:
        raise ValueError("picard_solve needs kappa > 0; use direct_mol_solve for the Euler system")
    if data.density.gamma != 2.0:
        raise GammaOutOfRange("the Galerkin solver is implemented for gamma = 2")
    grid = grid or make_grid(config.n_panels or max(32, 2 * math.ceil(config.n_modes / 8)))
    basis = build_sine_basis(config.n_modes, grid)
    n_out = n_out or min(config.n_modes, 64)
    ws = _Workspace(data.density, basis, n_out)
    run = _PicardRun(config, data, basis, ws)
    trace = PicardTrace()
    T = config.t_final
    while True:
        n_steps = int(round(T / config.dt))
        if n_steps < 1:
            raise NoConvergence(f"horizon shrank below dt without convergence (residuals {trace.residuals[-3:]})")
        t = np.linspace(0.0, n_steps * config.dt, n_steps + 1)
        snapshots = []
        (lam, f), residuals, ok = _picard_on(run, t, snapshots)
        if ok:
            break
        if len(residuals) >= config.picard_max_iter:
            raise NoConvergence(
                f"no convergence in {config.picard_max_iter} iterations (last residual {residuals[-1]:.3e})"
            )
        trace.restarts.append((float(t[-1]), residuals))
        T = 0.5 * t[-1]
        log.info("picard residual grew; restarting on [0, %g]", T)
    trace.residuals = residuals
    trace.iterates = snapshots
    trace.converged = True
    trace.T_used = float(t[-1])

    Lam = _cumtrapz(lam, t)
    v = f[:, None] + lam @ ws.G_out.T
    eta_x = 1.0 + Lam @ ws.P_out.T
    eta = ws.x_out[None, :] + _cumtrapz(v, t)
    # modes beyond n are missing at about the size of the last retained ones
    top = np.max(np.abs(lam[:, -4:]), axis=1) / np.maximum(np.max(np.abs(lam), axis=1), 1e-300)
    chop_tol = max(STATE_CHOP, 10.0 * float(np.max(top)))
    traj = Trajectory(t, ws.x_out, v, eta, eta_x, data.density, config.kappa, "picard",
                      info={"n_modes": config.n_modes, "picard": trace}, chop_tol=chop_tol)
    return traj, trace


# }}}


# {{{ direct collocation


def gamma_general_rhs(v, eta, density, kappa=0.0, D=None):
    """``v_t`` on the Lobatto nodes for general gamma (``kappa`` only for gamma = 2)."""
    n = v.size - 1
    D = lobatto_differentiation_matrix(n) if D is None else D
    x = lobatto_nodes(n)
    g = density.gamma
    w = density.sound_series(x)
    dw = density.sound_series.deriv()(x)
    q = D @ eta
    qx = D @ q
    rhs = -(g / (g - 1.0)) * dw * q**-g + g * w * qx * q ** (-g - 1.0)
    if kappa > 0:
        rho = density.rho0_series
        rhs = rhs + kappa * (rho(x) * (D @ (D @ v)) + 2.0 * rho.deriv()(x) * (D @ v))
    return rhs


class _Collocation:
    def __init__(self, density, kappa, n):
        self.n = n
        self.x = lobatto_nodes(n)
        self.D = lobatto_differentiation_matrix(n)
        self.D2 = self.D @ self.D
        g = density.gamma
        self.gamma = g
        self.w = density.sound_series(self.x)
        self.dw = density.sound_series.deriv()(self.x)
        self.kappa = kappa
        if kappa > 0:
            rho = density.rho0_series
            self.visc = kappa * (rho(self.x)[:, None] * self.D2 + 2.0 * rho.deriv()(self.x)[:, None] * self.D)
        else:
            self.visc = np.zeros((n + 1, n + 1))

    def rhs(self, v, eta):
        g = self.gamma
        q = self.D @ eta
        if np.any(q <= 0):
            raise SolverFailure("eta_x became nonpositive")
        qx = self.D2 @ eta
        acc = -(g / (g - 1.0)) * self.dw * q**-g + g * self.w * qx * q ** (-g - 1.0) + self.visc @ v
        return acc, q

    def jac_eta(self, eta):
        g = self.gamma
        q = self.D @ eta
        qx = self.D2 @ eta
        c1 = (g * g / (g - 1.0)) * self.dw * q ** (-g - 1.0) - g * (g + 1.0) * self.w * qx * q ** (-g - 2.0)
        c2 = g * self.w * q ** (-g - 1.0)
        return c1[:, None] * self.D + c2[:, None] * self.D2


def direct_mol_solve(config, data, *, newton_tol=1e-13, max_newton=12):
    """Method of lines on Chebyshev-Lobatto points with Newton-solved implicit steps.

    The degree of the collocation polynomial is ``config.n_modes``.
    """
    density = data.density
    if config.kappa > 0 and density.gamma != 2.0:
        raise GammaOutOfRange("viscous regularization is implemented for gamma = 2 only")
    n = config.n_modes
    col = _Collocation(density, config.kappa, n)
    m = n + 1
    dt = config.dt
    n_steps = config.n_steps
    t = np.linspace(0.0, n_steps * dt, n_steps + 1)
    V = np.empty((n_steps + 1, m))
    H = np.empty_like(V)
    Q = np.empty_like(V)
    V[0] = data.u0(col.x)
    H[0] = col.x
    acc0, Q[0] = col.rhs(V[0], H[0])
    eye = np.eye(m)
    bdf = config.time_integrator == "bdf2"
    prev_acc = acc0
    for k in range(n_steps):
        v_old, h_old = V[k], H[k]
        use_bdf = bdf and k > 0
        # predictor: explicit Euler
        v, h = v_old + dt * prev_acc, h_old + dt * v_old
        for it in range(max_newton):
            acc, _ = col.rhs(v, h)
            if use_bdf:
                c = 2.0 / 3.0 * dt
                rv = v - (4.0 * v_old - V[k - 1]) / 3.0 - c * acc
                rh = h - (4.0 * h_old - H[k - 1]) / 3.0 - c * v
            else:
                c = 0.5 * dt
                rv = v - v_old - c * (acc + prev_acc)
                rh = h - h_old - c * (v + v_old)
            J = np.block([[eye - c * col.visc, -c * col.jac_eta(h)], [-c * eye, eye]])
            delta = np.linalg.solve(J, -np.concatenate([rv, rh]))
            v += delta[:m]
            h += delta[m:]
            if np.max(np.abs(delta)) <= newton_tol * max(1.0, np.max(np.abs(v)), np.max(np.abs(h))):
                break
        else:
            raise SolverFailure(f"Newton failed to converge at t = {t[k + 1]:.6g}; reduce dt")
        V[k + 1], H[k + 1] = v, h
        prev_acc, Q[k + 1] = col.rhs(v, h)
        _check_eta_range(Q[k + 1], t[k + 1], col.x)
    return Trajectory(t, col.x, V, H, Q, density, config.kappa, "mol", info={"n_modes": n})


# }}}


def solve(config, data, method="mol"):
    """Dispatch to :func:`direct_mol_solve` or :func:`picard_solve` (trajectory only)."""
    if method == "mol":
        return direct_mol_solve(config, data)
    if method == "picard":
        return picard_solve(config, data)[0]
    raise ValueError(f"unknown method {method!r}")
