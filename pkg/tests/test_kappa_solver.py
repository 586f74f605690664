import dataclasses
import math

import numpy as np
import pytest
import sympy as sp
from numpy.polynomial import Chebyshev

from physvac.errors import DirichletViolation, EtaRangeViolation
from physvac.function_space import (
    ScalarField,
    build_sine_basis,
    chebyshev_from_lobatto,
    lobatto_nodes,
    make_grid,
)
from physvac.initial_data import IDENTITY, make_density, make_initial_data
from physvac.jets import time_derivatives
from physvac.kappa_solver import (
    SolverConfig,
    assemble_galerkin,
    direct_mol_solve,
    gamma_general_rhs,
    picard_solve,
    reconstruct_velocity,
    step_linear_X,
)
from physvac.diagnostics import trajectory_l2_error
from physvac.oracles import AffineOracle, quadrature_oracle

def _unit_flow(grid):
    return ScalarField.constant(1.0, grid)


class TestAssembly:
    @pytest.mark.parametrize("n", [8, 16, 32])
    def test_mass_spd(self, quadratic, grid, n):
        sys_ = assemble_galerkin(quadratic, build_sine_basis(n, grid), _unit_flow(grid))
        M = sys_.mass
        assert np.allclose(M, M.T, atol=0)
        assert np.linalg.eigvalsh(M).min() > 0
        assert np.all(np.isfinite(sys_.stiffness)) and np.all(np.isfinite(sys_.forcing))

    def test_m11_against_oracle(self, quadratic, basis16, grid):
        M = assemble_galerkin(quadratic, basis16, _unit_flow(grid)).mass
        ref = quadrature_oracle(lambda x: 2 * np.sin(np.pi * x) ** 2 / (x * (1 - x)))
        assert abs(M[0, 0] - ref) < 1e-8

    def test_mass_entry_off_diagonal(self, quadratic, basis16, grid):
        M = assemble_galerkin(quadratic, basis16, _unit_flow(grid)).mass
        ref = quadrature_oracle(lambda x: 2 * np.sin(2 * np.pi * x) * np.sin(5 * np.pi * x) / (x * (1 - x)))
        assert abs(M[1, 4] - ref) < 1e-8

    def test_forcing_closed_form(self, quadratic, basis16, grid):
        F = assemble_galerkin(quadratic, basis16, _unit_flow(grid)).forcing
        k = np.arange(1, 17)
        # 2 int (1 - 2x) e_k' = 4 int e_k after integrating by parts
        exact = 4 * math.sqrt(2) * (1 - (-1.0) ** k) / (k * np.pi)
        assert np.max(np.abs(F - exact)) < 1e-12

    def test_stiffness_against_oracle(self, quadratic, basis16, grid):
        K = assemble_galerkin(quadratic, basis16, _unit_flow(grid)).stiffness
        s2 = math.sqrt(2)

        def integrand(x):
            e1 = s2 * np.sin(np.pi * x)
            de1 = s2 * np.pi * np.cos(np.pi * x)
            de2 = s2 * 2 * np.pi * np.cos(2 * np.pi * x)
            return (de1 + (1 - 2 * x) * e1 / (x * (1 - x))) * de2

        # K[k, i] pairs (rho0 e_i)'/rho0 with e_k'
        assert abs(K[1, 0] - quadrature_oracle(integrand)) < 1e-8

    def test_flow_gradient_window(self, quadratic, basis16, grid):
        with pytest.raises(EtaRangeViolation) as info:
            assemble_galerkin(quadratic, basis16, ScalarField.constant(1.6, grid), t=0.25)
        assert info.value.t == 0.25
        assert info.value.value == pytest.approx(1.6)


class TestStepping:
    def test_exact_for_constant_forcing(self, quadratic, basis16, grid):
        sys_ = assemble_galerkin(quadratic, basis16, _unit_flow(grid), kappa=0.0)
        lam0 = np.linspace(0.1, -0.1, 16)
        lam, dt = lam0.copy(), 0.01
        for _ in range(10):
            lam = step_linear_X(sys_, lam, dt)
        exact = lam0 + 0.1 * np.linalg.solve(sys_.mass, sys_.forcing)
        assert np.max(np.abs(lam - exact)) < 1e-12

    @pytest.mark.parametrize("integrator", ["implicit-trapezoid", "bdf2"])
    def test_unforced_decay(self, quadratic, basis16, grid, integrator):
        sys_ = assemble_galerkin(quadratic, basis16, _unit_flow(grid), kappa=0.1)
        sys_ = dataclasses.replace(sys_, forcing=np.zeros(16))
        lam = np.ones(16) / np.arange(1, 17) ** 2
        prev = None
        norms = [math.sqrt(lam @ sys_.mass @ lam)]
        for _ in range(40):
            lam, prev = step_linear_X(sys_, lam, 1e-3, integrator=integrator, previous=prev), lam
            norms.append(math.sqrt(lam @ sys_.mass @ lam))
        assert np.all(np.diff(norms) < 0)

    def test_symmetric_part_nonnegative(self, quadratic, basis16, grid):
        K = assemble_galerkin(quadratic, basis16, _unit_flow(grid)).stiffness
        assert np.linalg.eigvalsh(0.5 * (K + K.T)).min() > -1e-10

    def test_unknown_integrator(self, quadratic, basis16, grid):
        sys_ = assemble_galerkin(quadratic, basis16, _unit_flow(grid), kappa=0.1)
        with pytest.raises(ValueError):
            step_linear_X(sys_, np.zeros(16), 1e-3, integrator="euler", previous=np.zeros(16))


class TestReconstruction:
    def test_zero_X(self, quadratic, grid):
        X = [ScalarField.constant(0.0, grid)] * 3
        t = np.array([0.0, 0.05, 0.1])
        vs = reconstruct_velocity(X, t, quadratic, 0.1, np.ones(3), 0.3)
        x = np.linspace(0, 1, 5)
        for ti, v in zip(t, vs):
            assert np.allclose(v(x), 0.3 - 2.0 * ti, atol=1e-14)

    def test_inverse_relation(self, quadratic, grid):
        X = ScalarField.from_function(lambda x: x * (1 - x) * np.cos(3 * x), grid)
        v = reconstruct_velocity([X], [0.0], quadratic, 0.0, [1.0], 0.0)[0]
        assert np.max(np.abs(quadratic.rho0.values * v.derivative_values(1) - X.values)) < 1e-8

    def test_affine_history(self, quadratic, grid):
        oracle = AffineOracle(1.0, 0.1, -0.05, kappa=0.1)
        t = np.linspace(0, 0.1, 101)
        h, hp, _, gp = oracle.state(t)
        X = [ScalarField(grid, quadratic.rho0_series * float(s)) for s in hp]
        vs = reconstruct_velocity(X, t, quadratic, 0.1, h, -0.05)
        x = np.linspace(0, 1, 7)
        err = max(np.max(np.abs(v(x) - (a * x + b))) for v, a, b in zip(vs, hp, gp))
        assert err < 1e-6

    def test_dirichlet(self, quadratic, grid):
        with pytest.raises(DirichletViolation):
            reconstruct_velocity([ScalarField.from_function(lambda x: 1 + x, grid)], [0.0], quadratic, 0.0, [1.0], 0.0)


@pytest.fixture(scope="module")
def affine_run(affine_data):
    cfg = SolverConfig(kappa=0.1, n_modes=64, dt=1e-4, t_final=0.1)
    return picard_solve(cfg, dataclasses.replace(affine_data, kappa_used=0.1))


class TestPicard:
    def test_affine_oracle(self, affine_run):
        traj, trace = affine_run
        oracle = AffineOracle(1.0, 0.1, -0.05, kappa=0.1)
        assert trace.converged and trace.T_used == pytest.approx(0.1)
        assert trajectory_l2_error(traj, oracle.velocity) < 1e-5

    def test_residuals_decrease(self, affine_run):
        trace = affine_run[1]
        r = np.array(trace.residuals)
        assert r[-1] < 1e-10
        assert np.all(np.diff(r[1:]) <= 0)

    def test_infinite_tolerance_returns_first_iterate(self, affine_data):
        cfg = SolverConfig(kappa=0.1, n_modes=16, dt=1e-3, t_final=0.01, picard_tol=math.inf)
        traj, trace = picard_solve(cfg, affine_data)
        assert trace.converged and trace.iterations == 1

    def test_first_iterate_is_linear_problem(self, quadratic, grid):
        data = make_initial_data(lambda x: 0 * x, quadratic, 0.1)
        n, dt, steps = 32, 1e-3, 10
        cfg = SolverConfig(kappa=0.1, n_modes=n, dt=dt, t_final=dt * steps, picard_tol=math.inf)
        traj, _ = picard_solve(cfg, data)
        basis = build_sine_basis(n, make_grid(32))
        sys_ = assemble_galerkin(quadratic, basis, ScalarField.constant(1.0, basis.grid), kappa=0.1)
        lam = np.zeros(n)
        hist = [basis.synthesize(lam)]
        for _ in range(steps):
            lam = step_linear_X(sys_, lam, dt)
            hist.append(basis.synthesize(lam))
        t = dt * np.arange(steps + 1)
        v = reconstruct_velocity(hist, t, quadratic, 0.1, np.ones(steps + 1), 0.0)[-1]
        x = np.linspace(0, 1, 9)
        assert np.max(np.abs(traj.velocity_at(x)[-1] - v(x))) < 1e-6

    def test_needs_viscosity(self, affine_data):
        with pytest.raises(ValueError):
            picard_solve(SolverConfig(kappa=0.0, n_modes=16, dt=1e-3, t_final=0.01), affine_data)


class TestDirectMOL:
    def test_euler_affine(self, affine_mol_run):
        oracle = AffineOracle(1.0, 0.1, -0.05)
        x = lobatto_nodes(64)
        assert np.max(np.abs(affine_mol_run.v[-1] - oracle.velocity(0.1, x))) < 1e-6
        assert np.all(affine_mol_run.eta_x > 0)

    def test_flow_map_consistency(self, affine_mol_run):
        h, _, g, _ = AffineOracle(1.0, 0.1, -0.05).state(0.1)
        x = lobatto_nodes(64)
        assert np.max(np.abs(affine_mol_run.eta[-1] - (h * x + g))) < 1e-8
        assert np.all(np.diff(affine_mol_run.eta[-1]) > 0)

    def test_bdf2_viscous_affine(self, affine_data):
        cfg = SolverConfig(kappa=0.1, n_modes=32, dt=1e-4, t_final=0.05, time_integrator="bdf2")
        traj = direct_mol_solve(cfg, affine_data)
        oracle = AffineOracle(1.0, 0.1, -0.05, kappa=0.1)
        assert trajectory_l2_error(traj, oracle.velocity) < 1e-6

    def test_zero_velocity_acceleration(self, quadratic):
        data = make_initial_data(lambda x: 0 * x, quadratic, 0.0)
        x = lobatto_nodes(16)
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            traj = direct_mol_solve(SolverConfig(kappa=0.0, n_modes=16, dt=dt, t_final=dt), data)
            errs.append(np.max(np.abs(traj.v[1] / dt + 2 * (1 - 2 * x))))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 0.9)

    def test_window_exit(self, quadratic):
        data = make_initial_data(lambda x: 8 * x - 4, quadratic, 0.0)
        with pytest.raises(EtaRangeViolation) as info:
            direct_mol_solve(SolverConfig(kappa=0.0, n_modes=16, dt=1e-3, t_final=0.2), data)
        assert 0 < info.value.t < 0.2
        assert info.value.value > 1.5


class TestGeneralGamma:
    def test_gamma_two_matches_euler_form(self, quadratic):
        n = 24
        x = lobatto_nodes(n)
        eta = x + 0.05 * np.sin(np.pi * x) * x
        v = np.zeros_like(x)
        q = 1 + 0.05 * (np.pi * np.cos(np.pi * x) * x + np.sin(np.pi * x))
        qx = 0.05 * (2 * np.pi * np.cos(np.pi * x) - np.pi**2 * np.sin(np.pi * x) * x)
        rho, drho = x * (1 - x), 1 - 2 * x
        expected = -rho * (-2 * qx / q**3) - 2 * drho / q**2
        assert np.max(np.abs(gamma_general_rhs(v, eta, quadratic) - expected)) < 1e-10

    def test_gamma_three_symbolic(self):
        density = make_density("power", 3.0)
        xs = sp.symbols("x")
        rho = sp.sqrt(xs * (1 - xs))
        eta = xs + sp.Rational(1, 10) * xs**2 * (1 - xs)
        expr = sp.simplify(-sp.diff(rho**3 * sp.diff(eta, xs) ** -3, xs) / rho)
        f = sp.lambdify(xs, expr, "numpy")
        n = 20
        x = lobatto_nodes(n)
        num = gamma_general_rhs(np.zeros(n + 1), x + 0.1 * x**2 * (1 - x), density)
        assert np.max(np.abs(num - f(x))) < 1e-10

    @pytest.mark.parametrize("gamma", [2.0, 3.0])
    def test_homogeneity(self, gamma):
        density = make_density("quadratic" if gamma == 2.0 else "power", gamma)
        x = lobatto_nodes(12)
        base = gamma_general_rhs(np.zeros(13), x, density)
        for h in (0.8, 1.3):
            assert np.allclose(gamma_general_rhs(np.zeros(13), h * x, density), h**-gamma * base, atol=1e-13)


class TestJets:
    def test_first_jet_is_the_rhs(self):
        density = make_density("power", 3.0)
        n = 20
        x = lobatto_nodes(n)
        eta_vals = x + 0.1 * x**2 * (1 - x)
        eta = chebyshev_from_lobatto(eta_vals)
        v = chebyshev_from_lobatto(0.1 * np.sin(np.pi * x))
        stack = time_derivatives(v, eta, density.sound_series, gamma=3.0, order=1)
        assert np.max(np.abs(stack[1](x) - gamma_general_rhs(v(x), eta_vals, density))) < 1e-10

    def test_viscous_jet_requires_density(self, quadratic):
        with pytest.raises(ValueError):
            time_derivatives(Chebyshev([0.0], domain=[0, 1]), IDENTITY, quadratic.sound_series, kappa=0.1)

    def test_stack_against_oracle_in_time(self):
        """At t > 0 the jets of the affine flow match the ODE Taylor recursion."""
        density = make_density("quadratic", 2.0)
        oracle = AffineOracle(1.0, 0.1, -0.05)
        h, hp, g, gp = oracle.state(0.08)
        lin = lambda a, b: Chebyshev([b + 0.5 * a, 0.5 * a], domain=[0, 1])  # noqa: E731
        stack = time_derivatives(lin(hp, gp), lin(h, g), density.sound_series, order=4)
        H, G = oracle.jet(0.08, 5)
        x = np.linspace(0, 1, 5)
        for k in range(5):
            assert np.allclose(stack[k](x), H[k + 1] * x + G[k + 1], rtol=1e-10, atol=1e-10)


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SolverConfig(kappa=0.0, n_modes=16, dt=0.2, t_final=0.1)
        with pytest.raises(ValueError):
            SolverConfig(kappa=0.0, n_modes=16, dt=1e-3, t_final=0.1, time_integrator="rk4")
        with pytest.raises(ValueError):
            SolverConfig(kappa=-1.0, n_modes=16, dt=1e-3, t_final=0.1)
        with pytest.raises(ValueError):
            SolverConfig(kappa=0.0, n_modes=16, dt=1e-3, t_final=0.1, picard_tol=0.0)

    def test_step_count(self):
        assert SolverConfig(kappa=0.0, n_modes=16, dt=1e-4, t_final=0.1).n_steps == 1000
