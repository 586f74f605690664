import numpy as np
import pytest

from physvac.function_space import build_sine_basis, default_grid
from physvac.initial_data import make_density, make_initial_data
from physvac.kappa_solver import SolverConfig, direct_mol_solve


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def basis16(grid):
    return build_sine_basis(16, grid)


@pytest.fixture(scope="session")
def quadratic():
    return make_density("quadratic", 2.0)


@pytest.fixture(scope="session")
def affine_data(quadratic):
    return make_initial_data(lambda x: 0.1 * x - 0.05, quadratic, 0.0)


@pytest.fixture(scope="session")
def affine_mol_run(affine_data):
    """Euler run on the affine data at the default resolution."""
    cfg = SolverConfig(kappa=0.0, n_modes=64, dt=1e-4, t_final=0.1)
    return direct_mol_solve(cfg, affine_data)


@pytest.fixture(scope="session")
def sine_u0():
    return lambda x: 0.1 * np.sin(np.pi * x)
