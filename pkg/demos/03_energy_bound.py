"""How long does the higher-order energy stay below twice its initial value?

The energy mixes Sobolev norms of v and of its first four time derivatives,
some weighted by rho0.  Time derivatives come from differentiating the
equation itself (a Taylor recursion in t), not from differencing the run.
"""
import numpy as np

from physvac.diagnostics import check_bound, energy_trajectory
from physvac.initial_data import initial_norms, make_density, make_initial_data
from physvac.kappa_solver import SolverConfig, direct_mol_solve

CASES = {
    "affine u0 = x/10 - 1/20": lambda x: 0.1 * x - 0.05,
    "u0 = sin(pi x)/10": lambda x: 0.1 * np.sin(np.pi * x),
}


def main():
    density = make_density("quadratic", 2.0)
    cfg = SolverConfig(kappa=0.0, n_modes=64, dt=1e-4, t_final=0.1)
    for label, u0 in CASES.items():
        data = make_initial_data(u0, density, 0.0)
        norms = initial_norms(data)
        traj = direct_mol_solve(cfg, data)
        snaps = energy_trajectory(traj, stride=50)
        rep = check_bound(snaps, norms.M0)
        print(f"\n{label}\n  M0 = {norms.M0:.4f}   N0 = {norms.N0:.4e}")
        print("  largest contributions to E(0):")
        for name, val in sorted(norms.m0_components.items(), key=lambda kv: -kv[1])[:4]:
            print(f"    {name:24s} {val:12.4f}")
        print("       t        E(t)/M0")
        for s in snaps[::4]:
            print(f"    {s.t:6.3f}   {s.total / norms.M0:8.4f}")
        when = "never" if rep.first_violation_t is None else f"t = {rep.first_violation_t:.4f}"
        print(f"  E exceeds 2 M0: {when}; T_good = {rep.T_good:.4f}")
        c0, c1 = rep.fitted_inequality
        print(f"  fitted sup E <= {c0:.1f} + {c1:.2f} t sup E")


if __name__ == "__main__":
    main()
