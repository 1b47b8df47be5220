import json

import pytest

from conftest import REFERENCE_PI, REFERENCE_Y0
from jumpfbsde import __version__, get_info, get_version
from jumpfbsde.cli import main
from jumpfbsde.core.data_structures import RunManifest
from jumpfbsde.core.pipeline import manifest_name, verify_manifest
from jumpfbsde.utils.io import read_csv

SMALL_MC = ["--set", "mc.n_paths=20000", "--set", "grid.M=20"]


def run(config_file, out_dir, command, *extra):
    return main([command, "--config", str(config_file), "--out", str(out_dir), *extra])


def load_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


class TestCommands:
    def test_info(self, capsys):
        assert main(["info"]) == 0
        out = capsys.readouterr().out
        assert f"jumpfbsde v{get_version()}" in out
        assert get_info()["version"] == __version__
        assert "solve-bsde" in out

    def test_no_command(self, capsys):
        assert main([]) == 1

    def test_config_create_show_validate(self, tmp_path, capsys):
        path = tmp_path / "created.json"
        assert main(["config", "create", "--config-file", str(path), "--output-dir", "runs"]) == 0
        assert load_json(path)["output_dir"] == "runs"
        assert main(["config", "validate", "--config-file", str(path)]) == 0
        assert "Configuration is valid!" in capsys.readouterr().out
        assert main(["config", "show", "--config-file", str(path)]) == 0
        assert json.loads(capsys.readouterr().out)["mc"]["seed"] == 7

    def test_config_validate_missing_file(self, tmp_path, capsys):
        assert main(["config", "validate", "--config-file", str(tmp_path / "none.json")]) == 2
        assert "not found" in capsys.readouterr().err


class TestErrors:
    def test_violated_invariant_exits_with_config_code(self, reference_config_file, tmp_path,
                                                       capsys):
        code = run(reference_config_file, tmp_path, "solve-bsde", "--set", "market.c2=1.0")
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("Error: ")
        assert "c2 < nu" in err
        assert not (tmp_path / manifest_name("solve-bsde")).exists()

    def test_unknown_key(self, reference_config_file, tmp_path, capsys):
        assert run(reference_config_file, tmp_path, "simulate", "--set", "market.foo=1") == 2
        assert "market.foo" in capsys.readouterr().err

    def test_bad_override_syntax(self, reference_config_file, tmp_path):
        assert run(reference_config_file, tmp_path, "simulate", "--set", "grid.M") == 2

    def test_report_without_manifests(self, tmp_path, capsys):
        assert main(["report", "--out", str(tmp_path)]) == 2
        assert "no manifests" in capsys.readouterr().err


class TestRunModes:
    def test_solve_bsde_reference(self, reference_config_file, tmp_path):
        assert run(reference_config_file, tmp_path, "solve-bsde") == 0
        summary = load_json(tmp_path / "bsde_solution.json")
        assert summary["Y_0"] == pytest.approx(REFERENCE_Y0, abs=1e-8)
        assert summary["terminal_condition_exact"] is True
        rows = read_csv(tmp_path / "bsde_solution.csv")
        assert len(rows) == 101
        assert rows[-1]["Y"] == "0"
        assert rows[-1]["pi"] == ""
        manifest = RunManifest.load_from_file(tmp_path / manifest_name("solve-bsde"))
        assert manifest.passed
        assert manifest.seed == 7
        assert verify_manifest(tmp_path, "solve-bsde") == []

    def test_lattice_tier(self, reference_config_file, tmp_path):
        code = run(reference_config_file, tmp_path, "solve-bsde", "--set", "solver.tier=lattice",
                   "--set", "liability.kind=table", "--set", "liability.table=[0, 0.1, 0.2]")
        assert code == 0
        summary = load_json(tmp_path / "bsde_solution.json")
        assert summary["representation"] == "lattice"
        assert summary["Y_0"] > REFERENCE_Y0

    def test_simulate_dump(self, reference_config_file, tmp_path):
        extra = [*SMALL_MC, "--set", "grid.M=10", "--set", "mc.n_paths=10000",
                 "--set", "mc.dump_paths=5"]
        assert run(reference_config_file, tmp_path / "one", "simulate", "--threads", "1",
                   *extra) == 0
        assert run(reference_config_file, tmp_path / "four", "simulate", "--threads", "4",
                   *extra) == 0
        rows = read_csv(tmp_path / "one" / "paths.csv")
        assert len(rows) == 5 * 11
        assert rows[0]["dW"] == "" and rows[0]["X"] == "0"
        assert all(row["X"] != "" for row in rows)
        one = (tmp_path / "one" / "paths.csv").read_bytes()
        four = (tmp_path / "four" / "paths.csv").read_bytes()
        assert one == four

    def test_simulate_leaves_wealth_blank_for_coupled_solver(self, reference_config_file,
                                                             tmp_path):
        code = run(reference_config_file, tmp_path, "simulate", "--set", "solver.tier=picard",
                   "--set", "mc.n_paths=100", "--set", "grid.M=5", "--set", "mc.dump_paths=2")
        assert code == 0
        rows = read_csv(tmp_path / "paths.csv")
        assert len(rows) == 12
        assert all(row["X"] == "" for row in rows)

    def test_optimal_strategy_certificates(self, reference_config_file, tmp_path):
        assert run(reference_config_file, tmp_path, "optimal-strategy") == 0
        rows = read_csv(tmp_path / "strategy.csv")
        assert len(rows) == 100
        for row in rows:
            assert float(row["pi"]) == pytest.approx(REFERENCE_PI, abs=1e-8)
            assert float(row["residual"]) <= 1e-12
        diagnostics = load_json(tmp_path / manifest_name("optimal-strategy"))["diagnostics"]
        assert diagnostics["rows"] == 100

    def test_coupled_solver_strategy(self, reference_config_file, tmp_path):
        code = run(reference_config_file, tmp_path, "optimal-strategy",
                   "--set", "solver.tier=picard", "--set", "mc.n_paths=2000",
                   "--set", "grid.M=5", "--set", "solver.n_iter=1")
        assert code == 0
        rows = read_csv(tmp_path / "strategy.csv")
        assert [row["state"] for row in rows] == ["mean"] * 5
        for row in rows:
            assert float(row["pi"]) == pytest.approx(REFERENCE_PI, rel=1e-6)

    def test_verify_passes(self, reference_config_file, tmp_path):
        code = run(reference_config_file, tmp_path, "verify",
                   "--checks", "gateaux,martingale,driver_bounds", *SMALL_MC,
                   "--set", "verify.band=4")
        assert code == 0
        report = load_json(tmp_path / "verification.json")
        assert report["passed"] is True
        assert [c["name"] for c in report["checks"]] == ["gateaux", "martingale",
                                                         "driver_bounds"]
        assert report["paths"]["n_paths"] == 20000

    def test_verify_fails_with_exit_code(self, reference_config_file, tmp_path, capsys):
        code = run(reference_config_file, tmp_path, "verify", "--checks", "gateaux", *SMALL_MC,
                   "--set", "verify.band=1e-6")
        assert code == 4
        assert "Verification FAILED" in capsys.readouterr().out
        assert load_json(tmp_path / "verification.json")["passed"] is False
        assert load_json(tmp_path / manifest_name("verify"))["passed"] is False


class TestManifests:
    def test_overrides_are_recorded(self, reference_config_file, tmp_path):
        assert run(reference_config_file, tmp_path, "solve-bsde", "--seed", "3",
                   "--set", "grid.M=10") == 0
        manifest = RunManifest.load_from_file(tmp_path / manifest_name("solve-bsde"))
        assert manifest.overrides == ["mc.seed=3", "grid.M=10"]
        assert manifest.seed == 3
        assert load_json(tmp_path / "config.json")["grid"]["M"] == 10

    def test_output_dir_from_environment(self, reference_config_file, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("JUMPFBSDE_OUTPUT_DIR", str(target))
        assert main(["solve-bsde", "--config", str(reference_config_file)]) == 0
        assert (target / manifest_name("solve-bsde")).exists()

    def test_report_and_tampering(self, reference_config_file, tmp_path, capsys):
        assert run(reference_config_file, tmp_path, "solve-bsde") == 0
        assert run(reference_config_file, tmp_path, "optimal-strategy") == 0
        capsys.readouterr()
        assert main(["report", "--out", str(tmp_path)]) == 0
        text = capsys.readouterr().out
        assert "[solve-bsde] PASSED" in text
        assert "[optimal-strategy] PASSED" in text
        assert (tmp_path / "report.txt").exists()

        stored = load_json(tmp_path / "config.json")
        stored["mc"]["seed"] = 8
        (tmp_path / "config.json").write_text(json.dumps(stored), encoding="utf-8")
        assert "config hash mismatch for config.json" in verify_manifest(tmp_path, "solve-bsde")
        assert main(["report", "--out", str(tmp_path)]) == 4
        assert "PROBLEM" in capsys.readouterr().out
