import csv
import textwrap

import numpy as np
import pytest

from physvac.cli import load_scenario, main, stability_probe

AFFINE = """
[data]
profile = quadratic
velocity = affine
beta = 0.1
delta = -0.05

[solver]
method = mol
kappa = 0.0
n_modes = 32
dt = 1e-4
t_final = 0.02
energy_stride = 20

[experiment]
type = single-run
"""


def _write(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


def _report(path):
    out = {}
    for line in (path / "report.txt").read_text().splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out.setdefault(k, v)
    return out


def _rows(path):
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config_sha256=")
    return list(csv.reader(lines[1:]))


def test_single_run_affine(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", _write(tmp_path, AFFINE), "--output-dir", str(out)]) == 0
    rep = _report(out)
    assert float(rep["sup_L2_error"]) < 1e-5
    assert rep["first_violation_t"] is not None
    for name in ("trajectory.csv", "energy.csv", "report.txt"):
        assert (out / name).exists()
    traj = _rows(out / "trajectory.csv")
    assert traj[0] == ["t", "x_index", "v", "eta_x"]
    energy = _rows(out / "energy.csv")
    assert energy[0][0] == "t" and "physical_energy" in energy[0] and "E_total" in energy[0]
    assert len(energy) - 1 == 11


def test_csv_number_format(tmp_path):
    out = tmp_path / "run"
    main(["run", _write(tmp_path, AFFINE), "--output-dir", str(out)])
    row = _rows(out / "energy.csv")[1]
    # 17 significant digits round-trip exactly
    for cell in row:
        assert float(repr(float(cell))) == float(cell)
    assert any(len(c.replace("-", "").replace(".", "").lstrip("0")) >= 15 for c in row)


def test_deterministic_outputs(tmp_path):
    cfg = _write(tmp_path, AFFINE)
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert main(["run", cfg, "--output-dir", str(d)]) == 0
    for name in ("trajectory.csv", "energy.csv", "report.txt"):
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_missing_t_final(tmp_path, capsys):
    text = AFFINE.replace("t_final = 0.02\n", "")
    assert main(["run", _write(tmp_path, text)]) == 2
    assert "t_final" in capsys.readouterr().err


@pytest.mark.parametrize(
    "old,new,field",
    [
        ("type = single-run", "type = stability-probe\nperturbation_eps = 1e-4\nperturbation = ramp", "perturbation"),
        ("type = single-run", "type = stability-probe\nperturbation_eps = 1e-4\nperturbation = constant",
         "perturbation"),
        ("type = single-run", "type = kappa-sweep\nkappa_list = 0.1", "kappa_list"),
        ("type = single-run", "type = unknown", "type"),
        ("kappa = 0.0", "kappa = -1", "kappa"),
        ("n_modes = 32", "n_modes = many", "n_modes"),
        ("method = mol", "method = picard", "kappa"),
    ],
)
def test_invalid_fields(tmp_path, capsys, old, new, field):
    assert main(["run", _write(tmp_path, AFFINE.replace(old, new))]) == 2
    assert f"config-invalid: {field}:" in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.ini")]) == 2


def test_threads_flag(tmp_path):
    assert main(["run", _write(tmp_path, AFFINE), "--threads", "0"]) == 2


def test_solver_failure_exit_code(tmp_path, capsys):
    text = AFFINE.replace("beta = 0.1", "beta = 8.0").replace("t_final = 0.02", "t_final = 0.2")
    assert main(["run", _write(tmp_path, text), "--output-dir", str(tmp_path / "o")]) == 3
    assert "EtaRangeViolation" in capsys.readouterr().err


def test_kappa_sweep(tmp_path):
    text = AFFINE.replace("velocity = affine", "velocity = sine").replace(
        "type = single-run", "type = kappa-sweep\nkappa_list = 1e-1, 5e-2, 2.5e-2, 1.25e-2")
    out = tmp_path / "sweep"
    assert main(["run", _write(tmp_path, text), "--output-dir", str(out), "--threads", "2"]) == 0
    rows = _rows(out / "sweep.csv")
    header, body = rows[0], rows[1:]
    assert header[:3] == ["kappa", "sup_E", "L2_diff_to_smallest_kappa"]
    assert len(body) == 4
    kappas = [float(r[0]) for r in body]
    assert kappas == sorted(kappas, reverse=True)
    p = float(body[0][header.index("fitted_p")])
    assert p > 0


def test_stability_zero_perturbation(tmp_path):
    text = AFFINE.replace("velocity = affine", "velocity = sine").replace(
        "type = single-run", "type = stability-probe\nperturbation_eps = 0, 1e-4")
    sc = load_scenario(_write(tmp_path, text))
    _, rows = stability_probe(sc)
    assert rows[0][1:4] == (0.0, 0.0, 0.0)
    assert rows[1][1] > 0


def test_seed_recorded(tmp_path):
    out = tmp_path / "s"
    main(["run", _write(tmp_path, AFFINE), "--output-dir", str(out), "--seed", "7"])
    assert _report(out)["seed"] == "7"


def test_hardy_suite_outputs(tmp_path):
    text = """
    [data]
    profile = quadratic

    [experiment]
    type = hardy-suite
    """
    out = tmp_path / "h"
    assert main(["run", _write(tmp_path, text), "--output-dir", str(out)]) == 0
    rows = _rows(out / "hardy.csv")
    assert len(rows) - 1 == 12 * 3
    assert np.all(np.isfinite([float(r[2]) for r in rows[1:]]))
