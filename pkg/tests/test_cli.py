import csv
import json

import numpy as np
import pytest

from relaxflow.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_PROPERTY, main,
                           parse_config)
from relaxflow.cli import runners
from relaxflow.cli.config import ConfigError
from relaxflow.cli.diagnostics import harten_coefficients
from relaxflow.cli.output import OUTPUT_ENV
from relaxflow.cli.properties import SuiteReport, Check, run_suite
from relaxflow.core import BoundarySpec, Grid1D, StateField1D
from relaxflow.problems import burgers_problem
from relaxflow.schemes1d import CFLViolation, select_speeds_symmetric


def write_config(tmp_path, doc, name="cfg.json"):
    doc = {"output_dir": str(tmp_path / "out")} | doc
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


# ---------------------------------------------------------------- configuration

@pytest.mark.parametrize("doc, field", [
    ({"problem": "heat"}, "problem"),
    ({"problem": "burgers", "cfl": 1.5}, "cfl"),
    ({"problem": "burgers", "cfl": "half"}, "cfl"),
    ({"problem": "burgers", "scheme": "LLF"}, "scheme"),
    ({"problem": "burgers", "order": 3}, "order"),
    ({"problem": "burgers", "grid": {"n": 0}}, "grid.n"),
    ({"problem": "burgers", "grid": {"nx": 4, "ny": 4}}, "grid"),
    ({"problem": "burgers", "colour": "red"}, "colour"),
    ({"problem": "burgers", "params": {"K": [1, 2, 3]}}, "params.K"),
    ({"problem": "er", "order": {"x": 1, "y": 2}}, "order"),
    ({"problem": "burgers", "scheme": {"x": "VRS", "y": "VRO"}}, "scheme.y"),
    ({"problem": "burgers", "t_final": -1}, "t_final"),
    ({"problem": "burgers", "jx_policy": "vrs_sqrt2"}, "jx_policy"),
    ({"problem": "burgers", "name": "a/b"}, "name"),
    ({"problem": "burgers", "seed": -2}, "seed"),
    ([1, 2], "<root>"),
])
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.field == field


def test_config_defaults_and_per_dimension_schemes():
    cfg = parse_config({"problem": "er", "scheme": {"x": "vro", "y": "VRS"}})
    assert (cfg.nx, cfg.ny, cfg.t_final) == (40, 80, 0.85)
    assert (cfg.scheme_x, cfg.scheme_y) == ("VRO", "VRS")
    assert parse_config(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_config_fluid_parameters_validated(tmp_path):
    path = write_config(tmp_path, {"problem": "ternary_default", "params": {"M": -1}})
    assert main(["run", "--config", path]) == EXIT_CONFIG


def test_missing_and_malformed_config_files(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert "--config" in capsys.readouterr().err


# ---------------------------------------------------------------- run

def test_run_burgers_writes_outputs(tmp_path):
    path = write_config(tmp_path, {"problem": "burgers", "grid": {"n": 40}, "t_final": 2.5,
                                   "name": "shock"})
    assert main(["run", "--config", path]) == EXIT_OK
    out = tmp_path / "out"
    header, data = read_csv(out / "shock_solution.csv")
    assert header == ["x", "C1"] and data.shape == (40, 2)
    meta = json.loads((out / "shock_metadata.json").read_text())
    assert meta["steps"] == len(meta["dt"]) > 0
    assert sum(meta["dt"]) == pytest.approx(2.5)
    assert meta["flux_evaluations"] == 2 * meta["steps"] * 44
    assert "error" not in meta
    rows = list(csv.reader(open(out / "shock_flux_counts.csv")))
    assert rows[0] == ["method", "per_stage", "per_run", "formula"]
    assert float(rows[1][1]) == 44


def test_run_ternary_emits_path_and_three_components(tmp_path):
    path = write_config(tmp_path, {"problem": "ternary_default", "grid": {"n": 50},
                                   "t_final": 0.2, "name": "tern"})
    assert main(["run", "--config", path]) == EXIT_OK
    header, data = read_csv(tmp_path / "out" / "tern_solution.csv")
    assert header == ["x", "C1", "C2", "C3"]
    assert np.allclose(data[:, 1:].sum(axis=1), 1.0)
    assert (tmp_path / "out" / "tern_path.csv").exists()


def test_run_ternary_2d_emits_pressure_and_velocities(tmp_path):
    path = write_config(tmp_path, {"problem": "ternary_2d", "grid": {"nx": 10, "ny": 8},
                                   "t_final": 0.02, "seed": 3, "name": "g"})
    assert main(["run", "--config", path]) == EXIT_OK
    out = tmp_path / "out"
    header, data = read_csv(out / "g_solution.csv")
    assert header == ["x", "y", "C1", "C2", "C3"] and data.shape == (80, 5)
    assert read_csv(out / "g_ux.csv")[1].shape == (8 * 11, 3)
    assert read_csv(out / "g_uy.csv")[1].shape == (9 * 10, 3)
    meta = json.loads((out / "g_metadata.json").read_text())
    assert meta["max_relative_mass_defect"] <= 1e-10


@pytest.mark.parametrize("problem", ["burgers", "linear_advection", "ternary_default", "er"])
def test_zero_final_time_returns_initial_condition(tmp_path, problem):
    cfg = parse_config({"problem": problem, "t_final": 0.0, "output_dir": str(tmp_path)})
    res = runners.simulate(cfg)
    assert res.steps == 0
    assert np.array_equal(res.state.interior, res.setup.state.interior)


def test_run_is_deterministic(tmp_path):
    doc = {"problem": "ternary_2d", "grid": {"nx": 8, "ny": 8}, "t_final": 0.02, "seed": 11}
    a = write_config(tmp_path, doc | {"output_dir": str(tmp_path / "a")}, "a.json")
    b = write_config(tmp_path, doc | {"output_dir": str(tmp_path / "b")}, "b.json")
    assert main(["run", "--config", a]) == main(["run", "--config", b]) == EXIT_OK
    for f in ("run_solution.csv", "run_pressure.csv", "run_ux.csv", "run_uy.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    path = write_config(tmp_path, {"problem": "burgers", "t_final": 0.1})
    assert main(["run", "--config", path]) == EXIT_OK
    assert (tmp_path / "env" / "run_solution.csv").exists()
    assert not (tmp_path / "out").exists()


def test_csv_full_precision(tmp_path):
    path = write_config(tmp_path, {"problem": "burgers", "t_final": 0.0})
    main(["run", "--config", path])
    _, data = read_csv(tmp_path / "out" / "run_solution.csv")
    g = Grid1D(40, -np.pi, np.pi)
    assert np.array_equal(data[:, 0], g.centers)


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(cfg):
        raise CFLViolation("dt too large", 9.0)
    monkeypatch.setattr(runners, "run", boom)
    path = write_config(tmp_path, {"problem": "burgers"})
    assert main(["run", "--config", path]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_flux_count_table_ratio():
    per_stage, rows = runners.flux_count_rows(40, 2, 2, 10, 2 * 10 * 44)
    table = {r[0]: r for r in rows}
    assert per_stage == 44
    assert table["relaxed_measured"][1] == 44
    assert table["central_over_relaxed"][1] == pytest.approx(80 / 41)
    assert table["central_minus_relaxed"][1] == 39


# ---------------------------------------------------------------- convergence

def test_convergence_linear_advection_second_order(tmp_path):
    path = write_config(tmp_path, {"problem": "linear_advection", "grids": [40, 80, 160],
                                   "schemes": ["JX", "VRS", "VRO"], "name": "adv"})
    assert main(["convergence", "--config", path]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "out" / "adv_convergence.csv")))
    assert rows.pop(0) == ["scheme", "N", "l1", "l1_order", "linf", "linf_order"]
    finest = [float(r[3]) for r in rows if r[1] == "160"]
    assert len(finest) == 3 and min(finest) >= 1.9


def test_convergence_self_reference_for_ternary(tmp_path):
    cfg = parse_config({"problem": "ternary_default", "grids": [25, 50], "t_final": 0.3,
                        "output_dir": str(tmp_path)})
    rows = runners.convergence_table(cfg)
    assert rows[1][2] < rows[0][2]


@pytest.mark.parametrize("doc", [
    {"problem": "burgers", "grids": [40, 40]},
    {"problem": "burgers", "grids": [40]},
    {"problem": "ternary_2d", "grids": [[10, 10], [20, 20]]},
    {"problem": "ternary_default", "grids": [30, 40]},
])
def test_convergence_rejections(tmp_path, doc):
    path = write_config(tmp_path, doc)
    assert main(["convergence", "--config", path]) == EXIT_CONFIG


# ---------------------------------------------------------------- properties

@pytest.mark.parametrize("suite, trials", [("monotonicity", 5), ("tvd", 10), ("conservation", 3),
                                           ("reduction", 5), ("flash", 500), ("harten", 10)])
def test_property_suites_pass(suite, trials):
    report = run_suite(suite, seed=7, trials=trials)
    assert report.passed, report.lines()


def test_properties_command_exit_codes(monkeypatch, capsys):
    assert main(["properties", "--suite", "reduction", "--seed", "7", "--trials", "3"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    failing = SuiteReport("tvd", [Check("forced", False, "x")])
    monkeypatch.setattr("relaxflow.cli.run_suite", lambda *a: failing)
    assert main(["properties", "--suite", "tvd"]) == EXIT_PROPERTY
    assert main(["properties", "--suite", "tvd", "--trials", "0"]) == EXIT_CONFIG


def test_unknown_suite_rejected():
    with pytest.raises(SystemExit):
        main(["properties", "--suite", "bogus"])


def test_harten_constant_state_is_zero():
    p = burgers_problem()
    g = Grid1D(20, 0.0, 1.0)
    s = StateField1D.from_interior(g, np.full((1, 20), 0.6), BoundarySpec.periodic())
    h = harten_coefficients(s, select_speeds_symmetric(p, s), p, 0.01, g.dx)
    assert np.all(h.kappa1 == 0.0) and np.all(h.kappa2 == 0.0)
    assert h.ok()
