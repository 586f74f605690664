"""Batch front-end: ``physvac run scenario.ini``.

A scenario file has three sections::

    [data]
    profile = quadratic        ; quadratic | power
    A = 1.0
    gamma = 2.0
    velocity = affine          ; affine | sine | zero
    beta = 0.1                 ; affine: u0 = beta x + delta
    delta = -0.05
    amplitude = 0.1            ; sine: u0 = amplitude sin(pi x)
    epsilon = 0                ; > 0 mollifies the data

    [solver]
    method = mol               ; mol | picard
    kappa = 0.0
    n_modes = 64
    dt = 1e-4
    t_final = 0.1
    picard_tol = 1e-10
    picard_max_iter = 30
    time_integrator = implicit-trapezoid
    energy_stride = 10

    [experiment]
    type = single-run          ; single-run | kappa-sweep | picard-vs-mol | stability-probe | hardy-suite
    kappa_list = 0.1, 0.01
    perturbation_eps = 1e-4, 2e-4
    perturbation = bump        ; bump | sine
    output_dir = out

Exit status: 0 on success, 2 for an invalid configuration, 3 when a solver fails.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .diagnostics import (
    a0_for_gamma,
    check_bound,
    energy_history,
    energy_trajectory,
    regularization_monitor,
    trajectory_l2_difference,
    trajectory_l2_error,
)
from .errors import ConfigInvalid, PhysvacError
from .function_space import (
    ScalarField,
    build_sine_basis,
    check_embedding,
    check_hardy_ratio,
    chebyshev_from_lobatto,
    default_grid,
    sobolev_norm,
)
from .initial_data import initial_norms, make_density, make_initial_data, mollify
from .kappa_solver import SolverConfig, direct_mol_solve, picard_solve
from .oracles import AffineOracle
from .state import Trajectory

log = logging.getLogger("physvac")

EXPERIMENTS = ("single-run", "kappa-sweep", "picard-vs-mol", "stability-probe", "hardy-suite")
PROFILES = ("quadratic", "power")
VELOCITIES = ("affine", "sine", "zero")
METHODS = ("mol", "picard")

# perturbation shapes offered to the stability probe
PERTURBATIONS = {
    "bump": lambda x: 16.0 * x**2 * (1.0 - x) ** 2,
    "sine": lambda x: np.sin(np.pi * x),
    "constant": lambda x: np.ones_like(x),
    "ramp": lambda x: x,
}

FLOAT_FMT = "%.17g"


# {{{ scenario


@dataclass(frozen=True)
class Scenario:
    experiment: str
    solver: SolverConfig | None
    method: str = "mol"
    profile: str = "quadratic"
    A: float = 1.0
    gamma: float = 2.0
    velocity: str = "affine"
    beta: float = 0.1
    delta: float = -0.05
    amplitude: float = 0.1
    epsilon: float = 0.0
    energy_stride: int = 10
    kappa_list: tuple = ()
    perturbation_eps: tuple = ()
    perturbation: str = "bump"
    output_dir: str = "out"
    config_hash: str = field(default="", compare=False)

    def u0(self):
        if self.velocity == "affine":
            beta, delta = self.beta, self.delta
            return lambda x: beta * x + delta
        if self.velocity == "sine":
            amp = self.amplitude
            return lambda x: amp * np.sin(np.pi * x)
        return lambda x: np.zeros_like(x)

    @property
    def has_affine_oracle(self):
        return (self.profile == "quadratic" and self.gamma == 2.0 and self.velocity in ("affine", "zero")
                and self.epsilon == 0.0)


class _Reader:
    """Typed access to a parsed config, raising :class:`ConfigInvalid` with the field name."""

    def __init__(self, parser):
        self.p = parser

    def raw(self, section, key, default=None, required=False):
        if self.p.has_option(section, key):
            return self.p.get(section, key).strip()
        if required:
            raise ConfigInvalid(f"missing required field {key!r} in [{section}]", key)
        return default

    def number(self, section, key, default=None, required=False, kind=float):
        raw = self.raw(section, key, None, required)
        if raw is None:
            return default
        try:
            value = kind(raw)
        except ValueError:
            raise ConfigInvalid(f"{key} = {raw!r} is not a valid {kind.__name__}", key) from None
        if kind is float and not math.isfinite(value):
            raise ConfigInvalid(f"{key} must be finite", key)
        return value

    def choice(self, section, key, options, default):
        value = self.raw(section, key, default)
        if value not in options:
            raise ConfigInvalid(f"{key} = {value!r}; expected one of {', '.join(options)}", key)
        return value

    def number_list(self, section, key):
        raw = self.raw(section, key)
        if raw is None or raw == "":
            return ()
        try:
            return tuple(float(tok) for tok in raw.replace(";", ",").split(",") if tok.strip())
        except ValueError:
            raise ConfigInvalid(f"{key} must be a comma-separated list of numbers", key) from None


def _canonical_hash(parser):
    lines = []
    for section in sorted(parser.sections()):
        for key, value in sorted(parser.items(section)):
            if (section, key) == ("experiment", "output_dir"):
                continue
            lines.append(f"{section}.{key}={value.strip()}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def _require(condition, message, key):
    if not condition:
        raise ConfigInvalid(message, key)


def parse_scenario(parser):
    r = _Reader(parser)
    for section in ("data", "solver", "experiment"):
        if not parser.has_section(section) and section != "solver":
            raise ConfigInvalid(f"missing section [{section}]", section)
    experiment = r.choice("experiment", "type", EXPERIMENTS, "single-run")

    kw = dict(
        experiment=experiment,
        profile=r.choice("data", "profile", PROFILES, "quadratic"),
        A=r.number("data", "A", 1.0),
        gamma=r.number("data", "gamma", 2.0),
        velocity=r.choice("data", "velocity", VELOCITIES, "affine"),
        beta=r.number("data", "beta", 0.1),
        delta=r.number("data", "delta", -0.05),
        amplitude=r.number("data", "amplitude", 0.1),
        epsilon=r.number("data", "epsilon", 0.0),
        output_dir=r.raw("experiment", "output_dir", "out"),
        perturbation=r.choice("experiment", "perturbation", tuple(PERTURBATIONS), "bump"),
        kappa_list=r.number_list("experiment", "kappa_list"),
        perturbation_eps=r.number_list("experiment", "perturbation_eps"),
        config_hash=_canonical_hash(parser),
    )
    _require(kw["A"] > 0, "A must be positive", "A")
    _require(kw["gamma"] > 1, "gamma must exceed 1", "gamma")
    _require(0 <= kw["epsilon"] < 0.25, "epsilon must lie in [0, 1/4)", "epsilon")

    if experiment != "hardy-suite":
        if not parser.has_section("solver"):
            raise ConfigInvalid("missing section [solver]", "solver")
        kappa = r.number("solver", "kappa", 0.0)
        n_modes = r.number("solver", "n_modes", required=True, kind=int)
        dt = r.number("solver", "dt", required=True)
        t_final = r.number("solver", "t_final", required=True)
        picard_tol = r.number("solver", "picard_tol", 1e-10)
        picard_max_iter = r.number("solver", "picard_max_iter", 30, kind=int)
        integrator = r.choice("solver", "time_integrator", ("implicit-trapezoid", "bdf2"), "implicit-trapezoid")
        stride = r.number("solver", "energy_stride", 10, kind=int)
        method = r.choice("solver", "method", METHODS, "mol")
        _require(kappa >= 0, "kappa must be nonnegative", "kappa")
        _require(n_modes >= 2, "n_modes must be at least 2", "n_modes")
        _require(dt > 0, "dt must be positive", "dt")
        _require(t_final > dt, "t_final must exceed dt", "t_final")
        _require(picard_tol > 0, "picard_tol must be positive", "picard_tol")
        _require(picard_max_iter >= 1, "picard_max_iter must be at least 1", "picard_max_iter")
        _require(stride >= 1, "energy_stride must be at least 1", "energy_stride")
        kw.update(
            solver=SolverConfig(kappa=kappa, n_modes=n_modes, dt=dt, t_final=t_final, gamma=kw["gamma"],
                                picard_tol=picard_tol, picard_max_iter=picard_max_iter,
                                time_integrator=integrator),
            energy_stride=stride,
            method=method,
        )
        uses_picard = method == "picard" or experiment == "picard-vs-mol"
        if uses_picard:
            _require(kw["gamma"] == 2.0, "the Galerkin solver needs gamma = 2", "gamma")
        if uses_picard and experiment != "kappa-sweep":
            _require(kappa > 0, "the Galerkin solver needs kappa > 0", "kappa")
        if kappa > 0:
            _require(kw["gamma"] == 2.0, "kappa > 0 needs gamma = 2", "gamma")
    else:
        kw["solver"] = None

    if experiment == "kappa-sweep":
        ks = kw["kappa_list"]
        _require(len(ks) >= 2, "kappa-sweep needs at least two values in kappa_list", "kappa_list")
        _require(all(k > 0 for k in ks), "kappa_list entries must be positive", "kappa_list")
        _require(kw["gamma"] == 2.0, "kappa > 0 needs gamma = 2", "gamma")
    if experiment == "stability-probe":
        eps = kw["perturbation_eps"]
        _require(len(eps) >= 1, "stability-probe needs perturbation_eps", "perturbation_eps")
        _require(all(e >= 0 for e in eps), "perturbation_eps entries must be nonnegative", "perturbation_eps")
        shape = PERTURBATIONS[kw["perturbation"]]
        ends = shape(np.array([0.0, 1.0]))
        _require(np.all(np.abs(ends) <= 1e-14),
                 f"perturbation {kw['perturbation']!r} does not vanish on the boundary", "perturbation")
    return Scenario(**kw)


def load_scenario(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc.strerror}", "config") from None
    except configparser.Error as exc:
        raise ConfigInvalid(f"malformed config: {exc}", "config") from None
    return parse_scenario(parser)


# }}}


# {{{ single cases (run in workers)


@dataclass
class CaseResult:
    kappa: float
    eps: float
    method: str
    t: np.ndarray
    nodes: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    eta_x: np.ndarray
    energy_t: np.ndarray
    energy_names: tuple
    energy: np.ndarray
    physical: np.ndarray
    dissipation: np.ndarray
    M0: float
    N0: float | None
    picard: dict | None = None


def _build_data(sc, kappa, eps=0.0):
    density = make_density(sc.profile, sc.gamma, A=sc.A)
    u0 = sc.u0()
    if eps:
        shape = PERTURBATIONS[sc.perturbation]
        base = u0
        u0 = lambda x: base(x) + eps * shape(x)  # noqa: E731
    gamma_form = sc.gamma != 2.0
    depth = 4 + (a0_for_gamma(sc.gamma) if gamma_form else 0)
    data = make_initial_data(u0, density, kappa=kappa, k_max=min(depth, 5))
    if sc.epsilon > 0:
        data = mollify(data, sc.epsilon)
    return data


def _solve_case(sc, kappa, eps=0.0, method=None):
    method = method or sc.method
    data = _build_data(sc, kappa, eps)
    config = replace(sc.solver, kappa=kappa)
    picard = None
    if method == "picard":
        traj, trace = picard_solve(config, data)
        picard = {
            "iterations": trace.iterations,
            "residuals": list(trace.residuals),
            "T_used": trace.T_used,
            "restarts": [T for T, _ in trace.restarts],
        }
    else:
        traj = direct_mol_solve(config, data)
    gamma_form = sc.gamma != 2.0
    snaps = energy_trajectory(traj, stride=sc.energy_stride, gamma_form=gamma_form)
    names = tuple(snaps[0].components)
    _, phys, diss = energy_history(traj, stride=sc.energy_stride)
    N0 = initial_norms(data).N0 if not gamma_form else None
    return CaseResult(
        kappa=kappa, eps=eps, method=method, t=traj.t, nodes=traj.nodes, v=traj.v, eta=traj.eta,
        eta_x=traj.eta_x, energy_t=np.array([s.t for s in snaps]), energy_names=names,
        energy=np.array([[s.components[n] for n in names] for s in snaps]),
        physical=phys, dissipation=diss, M0=float(snaps[0].total), N0=N0, picard=picard,
    )


def _as_trajectory(res, density):
    return Trajectory(res.t, res.nodes, res.v, res.eta, res.eta_x, density, res.kappa, res.method)


def _map(func, jobs, threads):
    """Run ``func(*job)`` for each job; results come back in job order."""
    if threads <= 1 or len(jobs) <= 1:
        return [func(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(func, *job) for job in jobs]
        return [f.result() for f in futures]


# }}}


# {{{ output


def _write_csv(path, header, rows, config_hash):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_sha256={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([FLOAT_FMT % x if isinstance(x, (float, np.floating)) else x for x in row])


def _write_trajectory(path, res, config_hash):
    rows = (
        (float(t), j, float(res.v[i, j]), float(res.eta_x[i, j]))
        for i, t in enumerate(res.t)
        for j in range(res.nodes.size)
    )
    _write_csv(path, ("t", "x_index", "v", "eta_x"), rows, config_hash)


def _write_energy(path, res, config_hash):
    header = ("t",) + res.energy_names + ("E_total", "physical_energy", "dissipation")
    rows = []
    for i, t in enumerate(res.energy_t):
        comps = [float(c) for c in res.energy[i]]
        rows.append([float(t)] + comps + [float(sum(comps)), float(res.physical[i]), float(res.dissipation[i])])
    _write_csv(path, header, rows, config_hash)


class _Report:
    def __init__(self):
        self.lines = []

    def section(self, title):
        if self.lines:
            self.lines.append("")
        self.lines.append(f"[{title}]")

    def add(self, key, value):
        if isinstance(value, (float, np.floating)):
            value = FLOAT_FMT % value
        self.lines.append(f"{key} = {value}")

    def write(self, path):
        Path(path).write_text("\n".join(self.lines) + "\n", encoding="utf-8")


class _Snap:
    def __init__(self, t, total):
        self.t, self.total = t, total


def _bound(res):
    snaps = [_Snap(t, float(row.sum())) for t, row in zip(res.energy_t, res.energy)]
    return check_bound(snaps, res.M0)


def _report_case(rep, res, sc, label=""):
    b = _bound(res)
    rep.section(f"bound{label}")
    rep.add("kappa", res.kappa)
    rep.add("method", res.method)
    rep.add("M0", b.M0)
    if res.N0 is not None:
        rep.add("N0", res.N0)
    rep.add("sup_E", b.sup_E)
    rep.add("ratio", b.ratio)
    rep.add("first_violation_t", "none" if b.first_violation_t is None else FLOAT_FMT % b.first_violation_t)
    rep.add("T_good", b.T_good)
    rep.add("fitted_c0", b.fitted_inequality[0])
    rep.add("fitted_c1", b.fitted_inequality[1])
    E0 = res.physical[0]
    rep.add("physical_energy_drift", float(np.max(np.abs(res.physical - E0)) / E0))
    rep.add("max_increase_energy_plus_dissipation", float(np.max(np.diff(res.physical + res.dissipation))))
    if res.picard:
        rep.section(f"picard{label}")
        rep.add("iterations", res.picard["iterations"])
        rep.add("T_used", res.picard["T_used"])
        rep.add("restarted_from", ", ".join(FLOAT_FMT % T for T in res.picard["restarts"]) or "none")
        rep.add("residuals", ", ".join("%.6e" % r for r in res.picard["residuals"]))
    if sc.has_affine_oracle:
        beta, delta = (sc.beta, sc.delta) if sc.velocity == "affine" else (0.0, 0.0)
        oracle = AffineOracle(sc.A, beta, delta, res.kappa)
        density = make_density(sc.profile, sc.gamma, A=sc.A)
        err = trajectory_l2_error(_as_trajectory(res, density), lambda t, x: oracle.velocity(t, x))
        rep.section(f"oracle{label}")
        rep.add("sup_L2_error", err)


# }}}


# {{{ experiments


def _single_run(sc, out, threads):
    (res,) = _map(_solve_case, [(sc, sc.solver.kappa)], threads)
    _write_trajectory(out / "trajectory.csv", res, sc.config_hash)
    _write_energy(out / "energy.csv", res, sc.config_hash)
    rep = _Report()
    _report_case(rep, res, sc)
    if sc.gamma == 2.0:
        density = make_density(sc.profile, sc.gamma, A=sc.A)
        mon = regularization_monitor(_as_trajectory(res, density), stride=sc.energy_stride)
        rep.section("regularized_comparison")
        rep.add("sup_f_L2", float(mon.f_norm.max()))
        rep.add("f0_L2", float(mon.f_norm[0]))
        rep.add("sup_g_L2", float(mon.g_norm.max()))
        rep.add("holds", mon.holds)
    return rep


def _sweep_values(kappa_list):
    ks = sorted(set(kappa_list), reverse=True)
    extra = sorted({k / 2.0 for k in ks} - set(ks), reverse=True)
    return ks, sorted(set(ks) | set(extra), reverse=True)


def _fit_rate(kappas, diffs):
    k, d = np.asarray(kappas), np.asarray(diffs)
    mask = (k > 0) & (d > 0)
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(k[mask]), np.log(d[mask]), 1)[0])


def _kappa_sweep(sc, out, threads):
    ks, all_k = _sweep_values(sc.kappa_list)
    results = dict(zip(all_k, _map(_solve_case, [(sc, k) for k in all_k], threads)))
    density = make_density(sc.profile, sc.gamma, A=sc.A)
    trajs = {k: _as_trajectory(r, density) for k, r in results.items()}
    smallest = ks[-1]

    def common(a, b):
        n = min(trajs[a].t.size, trajs[b].t.size)
        return _truncate(trajs[a], n), _truncate(trajs[b], n)

    half = [trajectory_l2_difference(*common(k, k / 2.0), sup=False) for k in ks]
    to_small = [trajectory_l2_difference(*common(k, smallest), sup=False) for k in ks]
    p = _fit_rate(ks, half)
    rows = [(k, _bound(results[k]).sup_E, d_small, d_half, p) for k, d_small, d_half in zip(ks, to_small, half)]
    _write_csv(out / "sweep.csv", ("kappa", "sup_E", "L2_diff_to_smallest_kappa", "L2_diff_to_half_kappa",
                                   "fitted_p"), rows, sc.config_hash)
    _write_trajectory(out / "trajectory.csv", results[smallest], sc.config_hash)
    _write_energy(out / "energy.csv", results[smallest], sc.config_hash)
    rep = _Report()
    rep.section("sweep")
    rep.add("kappas", ", ".join(FLOAT_FMT % k for k in ks))
    rep.add("fitted_p", p)
    sups = [r[1] for r in rows]
    rep.add("sup_E_spread", max(sups) / min(sups))
    rep.add("half_differences_monotone", bool(np.all(np.diff(half) < 0)))
    for i, k in enumerate(ks):
        _report_case(rep, results[k], sc, label=f" kappa={FLOAT_FMT % k}")
    return rep


def _truncate(traj, n):
    return Trajectory(traj.t[:n], traj.nodes, traj.v[:n], traj.eta[:n], traj.eta_x[:n], traj.density,
                      traj.kappa, traj.method, traj.info)


def _picard_vs_mol(sc, out, threads):
    kappa = sc.solver.kappa
    pic, mol = _map(_solve_case, [(sc, kappa, 0.0, "picard"), (sc, kappa, 0.0, "mol")], threads)
    _write_trajectory(out / "trajectory.csv", pic, sc.config_hash)
    _write_trajectory(out / "trajectory_mol.csv", mol, sc.config_hash)
    _write_energy(out / "energy.csv", pic, sc.config_hash)
    _write_energy(out / "energy_mol.csv", mol, sc.config_hash)
    density = make_density(sc.profile, sc.gamma, A=sc.A)
    a, b = _as_trajectory(pic, density), _as_trajectory(mol, density)
    n = min(a.t.size, b.t.size)
    rep = _Report()
    rep.section("comparison")
    rep.add("common_horizon", float(a.t[n - 1]))
    rep.add("sup_L2_difference", trajectory_l2_difference(_truncate(a, n), _truncate(b, n)))
    _report_case(rep, pic, sc, label=" picard")
    _report_case(rep, mol, sc, label=" mol")
    return rep


def difference_norms(base, other, grid=None):
    """``sup_t`` of the L2, H1 and H2 norms of the velocity difference of two runs."""
    grid = grid or default_grid()
    n = min(base.t.size, other.t.size)
    best = np.zeros(3)
    for i in range(n):
        if base.nodes.size == other.nodes.size:
            diff = ScalarField(grid, chebyshev_from_lobatto(other.v[i] - base.v[i]))
        else:  # pragma: no cover - same solver settings give the same nodes
            raise ValueError("runs use different collocation nodes")
        best = np.maximum(best, [sobolev_norm(diff, s) for s in (0, 1, 2)])
    return best


def stability_probe(sc, threads=1):
    """Paired runs with ``u0`` and ``u0 + eps w``; returns rows ``(eps, sup L2, sup H1, sup H2, H2/eps)``."""
    jobs = [(sc, sc.solver.kappa, 0.0)] + [(sc, sc.solver.kappa, e) for e in sc.perturbation_eps]
    results = _map(_solve_case, jobs, threads)
    base = results[0]
    rows = []
    for eps, res in zip(sc.perturbation_eps, results[1:]):
        norms = difference_norms(base, res)
        amp = norms[2] / eps if eps > 0 else float("nan")
        rows.append((eps, float(norms[0]), float(norms[1]), float(norms[2]), float(amp)))
    return base, rows


def _stability(sc, out, threads):
    base, rows = stability_probe(sc, threads)
    _write_trajectory(out / "trajectory.csv", base, sc.config_hash)
    _write_energy(out / "energy.csv", base, sc.config_hash)
    _write_csv(out / "stability.csv", ("eps", "sup_dv_L2", "sup_dv_H1", "sup_dv_H2", "amplification_H2"),
               rows, sc.config_hash)
    rep = _Report()
    rep.section("stability")
    rep.add("perturbation", sc.perturbation)
    for eps, l2, h1, h2, amp in rows:
        rep.add(f"amplification_H2[eps={FLOAT_FMT % eps}]", amp)
    amps = [r[4] for r in rows if r[0] > 0]
    if len(amps) >= 2:
        rep.add("amplification_spread", max(amps) / min(amps) - 1.0)
    _report_case(rep, base, sc, label=" base")
    return rep


def hardy_family(grid=None):
    """The test family: the first ten sine modes and two quadratics."""
    grid = grid or default_grid()
    basis = build_sine_basis(10, grid)
    fam = [(f"e_{k}", basis.mode(k)) for k in range(1, 11)]
    fam.append(("x(1-x)", ScalarField.from_function(lambda x: x * (1 - x), grid)))
    fam.append(("x^2(1-x)+x(1-x)^2", ScalarField.from_function(lambda x: x * x * (1 - x) + x * (1 - x) ** 2, grid)))
    return fam


def hardy_suite():
    """Hardy and embedding ratios on the default grid and its refinement."""
    grid = default_grid()
    fine = grid.refined()
    hardy, embed = [], []
    for name, u in hardy_family(grid):
        for s in (1, 2, 3):
            r0, r1 = check_hardy_ratio(u, s), check_hardy_ratio(u.with_grid(fine), s)
            hardy.append((name, s, r0, r1, abs(r1 / r0 - 1.0)))
        for p in (1, 2):
            embed.append((name, p, check_embedding(u, p), check_embedding(u.with_grid(fine), p)))
    return hardy, embed


def _hardy(sc, out, threads):
    hardy, embed = hardy_suite()
    _write_csv(out / "hardy.csv", ("member", "s", "ratio", "ratio_refined", "relative_change"), hardy,
               sc.config_hash)
    _write_csv(out / "embedding.csv", ("member", "p", "ratio", "ratio_refined"), embed, sc.config_hash)
    rep = _Report()
    rep.section("hardy")
    for s in (1, 2, 3):
        rows = [r for r in hardy if r[1] == s]
        rep.add(f"max_C[s={s}]", max(r[2] for r in rows))
        rep.add(f"max_refinement_change[s={s}]", max(r[4] for r in rows))
    rep.section("embedding")
    for p in (1, 2):
        vals = np.array([r[3] for r in embed if r[1] == p])
        rep.add(f"max_ratio[p={p}]", float(vals.max()))
        rep.add(f"median_ratio[p={p}]", float(np.median(vals)))
        rep.add(f"max_over_median[p={p}]", float(vals.max() / np.median(vals)))
    return rep


RUNNERS = {
    "single-run": _single_run,
    "kappa-sweep": _kappa_sweep,
    "picard-vs-mol": _picard_vs_mol,
    "stability-probe": _stability,
    "hardy-suite": _hardy,
}


def run_scenario(sc, threads=1, seed=None):
    """Run a scenario and write its artifacts; returns the output directory."""
    out = Path(sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s into %s", sc.experiment, out)
    rep = RUNNERS[sc.experiment](sc, out, threads)
    rep.section("config")
    rep.add("experiment", sc.experiment)
    rep.add("config_sha256", sc.config_hash)
    if seed is not None:
        rep.add("seed", seed)
    rep.write(out / "report.txt")
    return out


# }}}


def build_parser():
    parser = argparse.ArgumentParser(prog="physvac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("config", help="path to the scenario (.ini)")
    run.add_argument("--output-dir", help="overrides [experiment] output_dir")
    run.add_argument("--threads", type=int, default=1, help="worker processes for sweeps and probes")
    run.add_argument("--seed", type=int, default=None, help="reserved; recorded in the report")
    run.add_argument("--verbose", "-v", action="count", default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)],
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        sc = load_scenario(args.config)
        if args.output_dir:
            sc = replace(sc, output_dir=args.output_dir)
        if args.threads < 1:
            raise ConfigInvalid("--threads must be at least 1", "threads")
    except ConfigInvalid as exc:
        print(f"config-invalid: {exc.field}: {exc}", file=sys.stderr)
        return 2
    try:
        out = run_scenario(sc, threads=args.threads, seed=args.seed)
    except (PhysvacError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"solver-failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(out / "report.txt")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
