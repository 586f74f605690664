"""Euler flow with an exact answer.

For rho0 = A x (1 - x) and an affine initial velocity the flow map stays
affine, eta = h(t) x + g(t), and the PDE collapses to two ODEs.  This demo
integrates the PDE with the collocation solver and tracks the distance to
that reference as time advances.
"""
import numpy as np

from physvac.function_space import default_grid, lobatto_nodes
from physvac.initial_data import make_density, make_initial_data
from physvac.kappa_solver import SolverConfig, direct_mol_solve
from physvac.oracles import AffineOracle


def main():
    density = make_density("quadratic", gamma=2.0, A=1.0)
    data = make_initial_data(lambda x: 0.1 * x - 0.05, density, kappa=0.0)
    print("v_t at t = 0 on a few points (should be -2 rho0' = 4x - 2):")
    for x in (0.0, 0.25, 0.5, 1.0):
        print(f"  x = {x:4.2f}: {float(data.time_derivs[1](x)):+.12f}")

    traj = direct_mol_solve(SolverConfig(kappa=0.0, n_modes=64, dt=1e-4, t_final=0.1), data)
    oracle = AffineOracle(A=1.0, beta=0.1, delta=-0.05)
    grid = default_grid()
    V = traj.velocity_at(grid.nodes)
    print("\n     t        h(t)      L2 error")
    for i in range(0, traj.t.size, 200):
        t = traj.t[i]
        err = np.sqrt(grid.integrate((V[i] - oracle.velocity(t, grid.nodes)) ** 2))
        print(f"  {t:6.3f}  {oracle.state(t)[0]:.8f}  {err:.2e}")
    x = lobatto_nodes(64)
    print(f"\nflow map at T: max |eta - (h x + g)| = "
          f"{np.max(np.abs(traj.eta[-1] - (oracle.state(0.1)[0] * x + oracle.state(0.1)[2]))):.2e}")


if __name__ == "__main__":
    main()
