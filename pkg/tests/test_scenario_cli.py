import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from hydrate_transport.cli import main
from hydrate_transport.oracle import OutsideValidity
from hydrate_transport.output import read_report, read_trajectory_csv, report_scalars
from hydrate_transport.runner import EXIT_BLOWUP, EXIT_CLEAN, EXIT_CLOGGED, compare, run, simulate
from hydrate_transport.scenario import (
    ParseError,
    ValidationError,
    bundled_names,
    bundled_scenario,
    dump_scenario,
    load_scenario,
    parse_scenario,
)

SMALL = """
name: small
domain: {x_left: 0.0, x_right: 1.0, cells: 20}
time: {t_end: 0.5, steps: 10}
phase_law:
  chi_star: {intercept: 0.04, slope: -0.03}
  R: 0.1
transport: {diffusion: 1.0e-2, velocity: 0.5}
boundary: {left: 0.03, right: 0.0}
initial: {kind: constant, value: 0.01}
output: {every: 3}
"""


def write(tmp_path, text, name="sc.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoading:
    def test_bundled(self):
        assert bundled_names() == ["scenario_A", "scenario_B", "scenario_C", "scenario_D"]
        for name in bundled_names():
            sc = bundled_scenario(name)
            assert sc.name == name and sc.problems() == []

    def test_pulse_padding(self):
        a = bundled_scenario("scenario_A")
        assert a.cells == 800 and a.upstream_cells == 400
        assert a.grid.n_cells == 1200 and a.grid.x_left == pytest.approx(-0.5)
        u0 = a.initial_field()
        np.testing.assert_allclose(u0[:400], 0.02)
        np.testing.assert_array_equal(u0[400:], 0.0)

    def test_exact_floats(self):
        sc = parse_scenario(SMALL.replace("R: 0.1", "R: 0.1\n  extension_slope: 1e-1"))
        assert sc.law.extension_slope == 0.1

    def test_round_trip(self):
        for name in bundled_names():
            sc = bundled_scenario(name)
            again = parse_scenario(dump_scenario(sc))
            assert again == sc
            assert dump_scenario(again) == dump_scenario(sc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_scenario(tmp_path / "nope.yaml")

    def test_not_a_mapping(self):
        with pytest.raises(ParseError):
            parse_scenario("- 1\n- 2\n")


class TestValidation:
    def test_ceiling_above_R(self):
        bad = SMALL.replace("intercept: 0.04", "intercept: 0.2")
        with pytest.raises(ValidationError) as info:
            parse_scenario(bad)
        assert any("chi <= chi*(x) < R" in p for p in info.value.problems)

    def test_all_problems_reported_together(self):
        bad = SMALL.replace("intercept: 0.04", "intercept: 0.2").replace("diffusion: 1.0e-2", "diffusion: -1.0")
        with pytest.raises(ValidationError) as info:
            parse_scenario(bad)
        assert len(info.value.problems) >= 2

    def test_missing_pressure_block(self):
        bad = SMALL.replace("velocity: 0.5", "velocity: pressure_driven")
        with pytest.raises(ValidationError) as info:
            parse_scenario(bad)
        assert any("pressure" in p for p in info.value.problems)

    def test_pure_advection_boundary_sides(self):
        bad = SMALL.replace("diffusion: 1.0e-2", "diffusion: 0.0")
        with pytest.raises(ValidationError) as info:
            parse_scenario(bad)
        assert any("outflow" in p for p in info.value.problems)

    def test_unknown_keys(self):
        with pytest.raises(ValidationError):
            parse_scenario(SMALL + "bogus: 1\n")
        with pytest.raises(ValidationError):
            parse_scenario(SMALL.replace("kind: constant", "kind: constant, colour: red"))

    def test_oracle_requirements(self):
        a = bundled_scenario("scenario_A")
        assert replace(a, diffusion=0.1, bc_right=0.0).problems()
        assert any("chi_L" in p for p in replace(a, initial=replace(a.initial, chi_L=0.05)).problems())


class TestRun:
    def test_deterministic_csv(self, tmp_path):
        sc = parse_scenario(SMALL)
        run(sc, tmp_path / "a")
        run(sc, tmp_path / "b")
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()

    def test_report_recomputable_from_csv(self, tmp_path):
        for sc in (parse_scenario(SMALL), bundled_scenario("scenario_C").with_overrides(cells=40, steps=60)):
            report, traj = run(sc, tmp_path / sc.name)
            _, series = read_trajectory_csv(tmp_path / sc.name / "trajectory.csv")
            again = report_scalars(series)
            for key in ("mass_defect", "max_S"):
                assert again[key] == pytest.approx(getattr(report, key), abs=1e-12)
            assert again["blowup_time"] == report.blowup_time
            stored = read_report(tmp_path / sc.name / "report.json")
            assert stored["status"] == report.status and stored["digest"] == sc.digest()

    def test_field_rows_follow_stride(self, tmp_path):
        sc = parse_scenario(SMALL)
        run(sc, tmp_path)
        hist, series = read_trajectory_csv(tmp_path / "trajectory.csv")
        np.testing.assert_allclose(hist.times, [0.0, 0.15, 0.3, 0.45, 0.5])
        assert series["t"].size == 11 and hist.u.shape == (5, 20)

    def test_exit_codes(self, tmp_path):
        report, _ = run(parse_scenario(SMALL), tmp_path / "clean")
        assert report.exit_code == EXIT_CLEAN and report.status == "clean"
        blow = parse_scenario(SMALL.replace("kind: constant, value: 0.01", "kind: constant, value: 0.12"))
        report, _ = run(blow, tmp_path / "blow")
        assert report.exit_code == EXIT_BLOWUP and report.blowup_time == 0.0
        sealed = """
name: sealed
domain: {x_left: 0.0, x_right: 1.0, cells: 10}
time: {t_end: 0.5, steps: 5}
phase_law: {chi_star: 0.04, R: 0.1}
transport: {diffusion: 0.0, velocity: pressure_driven}
pressure: {p_left: 1.0e+9, p_right: 0.0, kappa0: 1.0e-12, mu: 1.0e-3}
boundary: {left: 0.03, right: null}
initial: {kind: table, points: [[0.0, 0.0], [0.4, 0.0], [0.5, 0.3], [0.6, 0.0], [1.0, 0.0]]}
"""
        report, _ = run(parse_scenario(sealed), tmp_path / "sealed")
        assert report.exit_code == EXIT_CLOGGED and report.status == "clogged_halt"

    def test_mass_ledger_on_bundled_diffusive(self):
        sc = bundled_scenario("scenario_D")
        traj = simulate(sc)
        assert traj.mass_defect <= sc.steps * sc.solver.tol


class TestCompare:
    def test_coarse_run_is_close_to_oracle(self):
        sc = bundled_scenario("scenario_A").with_overrides(cells=50, steps=60)
        traj = simulate(sc)
        rows = compare(sc, traj, [0.6], variables=("u",))
        assert rows[0].L1 < 0.01 and rows[0].cells > 0

    def test_outside_validity(self):
        sc = bundled_scenario("scenario_A").with_overrides(cells=20, t_end=5.0, steps=50)
        traj = simulate(sc)
        with pytest.raises(OutsideValidity):
            compare(sc, traj, [5.0])
        with pytest.raises(OutsideValidity):
            compare(sc, traj, [1.0], x_range=(0.0, 1.0))

    def test_unknown_time(self):
        sc = bundled_scenario("scenario_A").with_overrides(cells=20, steps=24)
        traj = simulate(sc)
        with pytest.raises(ValueError):
            compare(sc, traj, [0.123])


class TestCLI:
    def test_validate(self, capsys):
        assert main(["validate", "scenario_B"]) == 0
        assert "scenario_B: ok" in capsys.readouterr().out

    def test_validate_bad_file(self, tmp_path, capsys):
        p = write(tmp_path, SMALL.replace("intercept: 0.04", "intercept: 0.2"))
        assert main(["validate", str(p)]) == 1
        assert "chi <= chi*(x) < R" in capsys.readouterr().err

    def test_run_and_compare(self, tmp_path, capsys):
        out = tmp_path / "A"
        code = main(["run", "scenario_A", "--out", str(out), "--nx", "40", "--dt", "0.0125",
                     "--every", "8"])
        assert code == EXIT_CLEAN
        summary = json.loads(capsys.readouterr().out)
        assert summary["status"] == "clean"
        code = main(["compare", "scenario_A", "--traj", str(out / "trajectory.csv"), "--nx", "40",
                     "--times", "0.6,1.2"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "t,variable,L1,Linf,cells" and len(lines) == 7

    def test_compare_outside_validity_exit(self, tmp_path, capsys):
        out = tmp_path / "A"
        main(["run", "scenario_A", "--out", str(out), "--nx", "20", "--t-end", "5.0", "--dt", "0.1"])
        capsys.readouterr()
        code = main(["compare", "scenario_A", "--traj", str(out / "trajectory.csv"), "--nx", "20",
                     "--times", "5.0"])
        assert code == 1
        assert "pulse tail" in capsys.readouterr().err

    def test_sweep(self, tmp_path, capsys):
        d = tmp_path / "scen"
        d.mkdir()
        write(d, SMALL, "one.yaml")
        write(d, SMALL.replace("name: small", "name: other").replace("value: 0.01", "value: 0.12"), "two.yaml")
        code = main(["sweep", str(d), "--out", str(tmp_path / "out"), "--jobs", "2"])
        assert code == EXIT_BLOWUP
        assert (tmp_path / "out" / "small" / "report.json").exists()
        assert (tmp_path / "out" / "other" / "trajectory.csv").exists()

    def test_console_script_module(self):
        res = subprocess.run([sys.executable, "-m", "hydrate_transport.cli", "validate", "scenario_D"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and "scenario_D: ok" in res.stdout

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["run"])
        assert info.value.code == 2
