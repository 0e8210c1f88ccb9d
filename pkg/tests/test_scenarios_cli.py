import json

import numpy as np
import pytest

from skorohod.cli import EXIT_CONFIG, EXIT_GEOMETRY, EXIT_OK, EXIT_SOLVER, EXIT_VIOLATIONS, main
from skorohod.errors import ConfigError
from skorohod.paths import SampledCadlagPath, TimeGrid
from skorohod.scenarios import load_scenario, parse_scenario, scenario_catalogue

REQUIRED = {"static-interval", "moving-floor", "breathing-ball", "annulus-normal",
            "half-plane-oblique", "half-plane-jumps", "sde-symmetry", "unit-ball"}


def interval_scenario(**over):
    spec = {"schema": 1, "name": "interval", "horizon": 1.0,
            "domain": {"family": "moving_box", "lower": [0.0], "upper": [1.0]},
            "cone": {"kind": "normal"}, "budget": {"measure": True, "rho0": 0.5, "eta0": 0.5},
            "driver": {"kind": "analytic", "components": [{"kind": "linear", "value": 0.5, "slope": -1.0}]},
            "task": "solve", "levels": [8, 8]}
    spec.update(over)
    return spec


def read_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def without_timing(obj):
    if isinstance(obj, dict):
        return {k: without_timing(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [without_timing(v) for v in obj]
    return obj


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


class TestCatalogue:
    def test_ships_the_named_scenarios(self):
        assert REQUIRED <= set(scenario_catalogue())

    def test_breathing_ball_radius(self):
        sc = load_scenario("breathing-ball")
        for t in (0.0, 0.3, 1.0):
            assert sc.domain.R(t) == pytest.approx(1 + 0.2 * np.sin(t))

    @pytest.mark.parametrize("name", sorted(REQUIRED))
    def test_round_trips_through_json(self, name):
        sc = load_scenario(name)
        again = parse_scenario(json.loads(json.dumps(sc.to_json())))
        assert again.to_json() == sc.to_json()

    def test_list_command(self, capsys):
        assert main(["list"]) == EXIT_OK
        assert "static-interval" in capsys.readouterr().out.split()


class TestParsing:
    def test_schema_version_required(self):
        with pytest.raises(ConfigError, match="schema"):
            parse_scenario(interval_scenario(schema=2))

    def test_unknown_task(self):
        with pytest.raises(ConfigError, match="task"):
            parse_scenario(interval_scenario(task="plot"))

    def test_budget_fields_required_without_measurement(self):
        with pytest.raises(ConfigError):
            parse_scenario(interval_scenario(budget={"a": 1.0})).budget()

    def test_missing_driver_file(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            parse_scenario(interval_scenario(driver={"kind": "csv", "path": "nope.csv"}), tmp_path)

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            load_scenario("no-such-scenario")

    def test_malformed_json_reports_byte_offset(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"schema": 1, "name": "x",, }')
        with pytest.raises(ConfigError, match="byte 26"):
            load_scenario(str(bad))


class TestExitCodes:
    def write(self, tmp_path, spec):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(spec))
        return str(path)

    def test_malformed_json_is_config_error(self, workdir, capsys):
        (workdir / "bad.json").write_text('{"schema": 1,\n "name": }')
        assert main(["solve", "--scenario", "bad.json"]) == EXIT_CONFIG
        assert "byte" in capsys.readouterr().err

    def test_geometry_error(self, workdir):
        spec = interval_scenario(domain={"family": "moving_ball", "center": [0, 0], "radius": -1.0},
                                 driver={"kind": "analytic", "components": [0.0, 0.0]})
        assert main(["solve", "--scenario", self.write(workdir, spec)]) == EXIT_GEOMETRY

    def test_solver_error_on_inadmissible_jump(self, workdir):
        spec = interval_scenario(
            domain={"family": "annulus", "center": [0, 0], "inner": 0.5, "outer": 1.5},
            budget={"a": 0.88, "e": 0.62, "r0": 0.5, "rho0": 0.25, "eta0": 0.25, "delta0": 0.125,
                    "h0": 1.001},
            driver={"kind": "analytic", "components": [1.0, 0.0],
                    "jumps": [{"t": 0.5, "size": [0.125, 0.0]}]})
        assert main(["solve", "--scenario", self.write(workdir, spec)]) == EXIT_SOLVER

    def test_violations_exit_one(self, workdir):
        # a negative tolerance cannot be met by any solution
        assert main(["solve", "--scenario", "static-interval", "--level", "6", "--tol", "-1"]) \
            == EXIT_VIOLATIONS

    def test_understated_constants_fail_the_estimate_check(self, workdir):
        spec = load_scenario("annulus-normal").to_json()
        spec["budget"] = {"a": 50.0, "e": 0.0, "r0": 0.5, "rho0": 0.25, "eta0": 0.25,
                          "delta0": 0.125, "h0": 1.001}
        path = self.write(workdir, spec)
        assert main(["check", "--scenario", path, "--levels", "8..8", "--out", "o"]) == EXIT_VIOLATIONS
        report = json.loads((workdir / "o" / "report.json").read_text())
        assert not report["passed"] and not report["levels"][0]["passed"]


class TestArtifacts:
    def test_solve_matches_explicit_map(self, workdir):
        assert main(["solve", "--scenario", "static-interval", "--levels", "10..10", "--out", "o"]) == 0
        x = read_csv(workdir / "o" / "x.csv")
        lam = read_csv(workdir / "o" / "lambda.csv")
        t = x[:, 0]
        assert np.abs(x[:, 1] - np.maximum(0.5 - t, 0.0)).max() <= 2.0**-10
        assert np.abs(lam[:, 1] - np.maximum(t - 0.5, 0.0)).max() <= 2.0**-10
        diag = json.loads((workdir / "o" / "diagnostics.json").read_text())
        assert diag["passed"] and diag["levels"][0]["diagnostics"]["violations"] == []
        assert diag["levels"][0]["epochs"]

    def test_identical_runs_are_byte_identical(self, workdir):
        for out in ("a", "b"):
            assert main(["solve", "--scenario", "breathing-ball", "--level", "8", "--out", out]) == 0
        for name in ("x.csv", "lambda.csv"):
            assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()
        diag = [without_timing(json.loads((workdir / d / "diagnostics.json").read_text())) for d in "ab"]
        assert diag[0] == diag[1]

    def test_seed_changes_brownian_driver(self, workdir):
        main(["solve", "--scenario", "breathing-ball", "--level", "6", "--out", "a"])
        main(["solve", "--scenario", "breathing-ball", "--level", "6", "--out", "b", "--seed", "12"])
        assert (workdir / "a" / "x.csv").read_bytes() != (workdir / "b" / "x.csv").read_bytes()

    def test_csv_driver_round_trip(self, workdir):
        grid = TimeGrid.dyadic(1.0, 8)
        SampledCadlagPath(grid, (0.5 - grid.times)[:, None]).to_csv(workdir / "w.csv")
        spec = interval_scenario(driver={"kind": "csv", "path": "w.csv"})
        (workdir / "s.json").write_text(json.dumps(spec))
        assert main(["solve", "--scenario", "s.json", "--out", "csv"]) == 0
        assert main(["solve", "--scenario", "static-interval", "--level", "8", "--out", "ref"]) == 0
        np.testing.assert_allclose(read_csv(workdir / "csv" / "x.csv"), read_csv(workdir / "ref" / "x.csv"),
                                   atol=1e-12)

    def test_jumps_in_driver(self):
        sc = load_scenario("half-plane-jumps")
        w = sc.driver()
        k = w.grid.index_at(0.125)
        np.testing.assert_allclose(w.values[k] - w.values[k - 1], [-0.01, -0.025], atol=1e-12)

    def test_measure_unit_ball(self, workdir):
        assert main(["measure", "--scenario", "unit-ball", "--out", "m"]) == 0
        b = json.loads((workdir / "m" / "budget.json").read_text())
        # a static disk with normal reflection: no motion, no skew, exact normal projection
        assert 0.9 <= b["a"] <= 1.0 and b["e"] == 0.0 and b["convex_slices"]
        assert set(b["l_table"]) == {"r", "l"} and max(b["l_table"]["l"]) == 0.0
        assert b["notes"]["h0_measured"] == pytest.approx(1.0)

    def test_check_and_refine_reports(self, workdir):
        assert main(["check", "--scenario", "annulus-normal", "--levels", "8..9", "--out", "c"]) == 0
        rep = json.loads((workdir / "c" / "report.json").read_text())
        assert [lv["level"] for lv in rep["levels"]] == [8, 9] and "stability" in rep
        assert main(["refine", "--scenario", "static-interval", "--levels", "6..9", "--out", "r"]) == 0
        ref = json.loads((workdir / "r" / "report.json").read_text())
        assert ref["passed"] and len(ref["refinement"]["x_gaps"]) == 3

    def test_sde_stats_and_paths(self, workdir):
        assert main(["sde", "--scenario", "sde-symmetry", "--paths", "400", "--level", "8",
                     "--write-paths", "2", "--out", "s"]) == 0
        stats = json.loads((workdir / "s" / "stats.json").read_text())
        assert stats["paths"] == 400 and abs(stats["mean"] - 0.5) <= 4 * stats["se"]
        assert (workdir / "s" / "path_1_x.csv").exists() and (workdir / "s" / "path_0_lambda.csv").exists()

    def test_run_uses_scenario_task(self, workdir):
        assert main(["run", "--scenario", "moving-floor", "--out", "f"]) == 0
        x = read_csv(workdir / "f" / "x.csv")
        np.testing.assert_allclose(x[:, 1], np.maximum(0.5, x[:, 0]), atol=1e-12)
