"""Containers for a snapshot of the flow and for a stored trajectory."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .function_space import ScalarField, chebyshev_from_lobatto, chop, lobatto_interpolation_matrix
from .jets import time_derivatives

# relative coefficient floor applied to solver output before differentiating in time
STATE_CHOP = 1e-13


@dataclass(eq=False)
class LagrangianState:
    """``v``, ``eta`` and ``eta_x`` at time ``t``; ``dt_stack[k]`` is ``d^k v / dt^k``."""

    t: float
    v: ScalarField
    eta: ScalarField
    eta_x: ScalarField
    dt_stack: tuple = ()


@dataclass(eq=False)
class Trajectory:
    """Nodal history on the Chebyshev-Lobatto points ``x = nodes``.

    Arrays ``v``, ``eta`` and ``eta_x`` have shape ``(len(t), len(nodes))``.
    ``chop_tol`` is the relative coefficient level below which the stored
    polynomials are treated as unresolved before time derivatives are taken.
    """

    t: np.ndarray
    nodes: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    eta_x: np.ndarray
    density: object
    kappa: float
    method: str
    info: dict = field(default_factory=dict)
    chop_tol: float = STATE_CHOP

    @property
    def gamma(self):
        return self.density.gamma

    @property
    def degree(self):
        return self.nodes.size - 1

    def series(self, i, which="v", tol=None):
        return chop(chebyshev_from_lobatto(getattr(self, which)[i]), self.chop_tol if tol is None else tol)

    def state(self, i, derivatives=0, grid=None):
        """Snapshot ``i``; ``derivatives = k`` fills ``dt_stack`` up to order ``k``."""
        v, eta = self.series(i, "v"), self.series(i, "eta")
        grid = grid or self.density.rho0.grid
        stack = ()
        if derivatives:
            d = self.density
            stack = time_derivatives(
                v, eta, d.sound_series, gamma=d.gamma, kappa=self.kappa,
                rho0=d.rho0_series if self.kappa > 0 else None, order=derivatives,
            )
            stack = tuple(ScalarField(grid, s) for s in stack)
        return LagrangianState(
            t=float(self.t[i]),
            v=ScalarField(grid, v),
            eta=ScalarField(grid, eta),
            eta_x=ScalarField(grid, eta.deriv()),
            dt_stack=stack,
        )

    def velocity_at(self, x):
        """``v`` at arbitrary points for every stored time, shape ``(len(t), len(x))``."""
        return self.v @ lobatto_interpolation_matrix(self.degree, x).T
