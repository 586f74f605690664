"""Shrinking kappa: do the regularized flows settle down?

Each viscous run is compared with the run at half the viscosity.  If the
solutions converge as kappa -> 0, these gaps shrink like a power of kappa.
"""
import numpy as np

from physvac.diagnostics import trajectory_l2_difference
from physvac.initial_data import make_density, make_initial_data
from physvac.kappa_solver import SolverConfig, direct_mol_solve


def run(kappa, density):
    data = make_initial_data(lambda x: 0.1 * np.sin(np.pi * x), density, kappa)
    return direct_mol_solve(SolverConfig(kappa=kappa, n_modes=64, dt=1e-4, t_final=0.1), data)


def main():
    density = make_density("quadratic", 2.0)
    euler = run(0.0, density)
    kappas = [1e-1, 1e-2, 1e-3]
    gaps = []
    print("  kappa     ||v_k - v_k/2||   ||v_k - v_euler||")
    for k in kappas:
        vk = run(k, density)
        gaps.append(trajectory_l2_difference(vk, run(k / 2, density), sup=False))
        print(f"  {k:7.0e}   {gaps[-1]:.3e}         {trajectory_l2_difference(vk, euler, sup=False):.3e}")
    p = np.polyfit(np.log(kappas), np.log(gaps), 1)[0]
    print(f"\nfitted rate: gap ~ kappa^{p:.3f}")


if __name__ == "__main__":
    main()
