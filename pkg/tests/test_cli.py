"""Tests for the command-line interface: commands, formats, exit codes."""

import json

import numpy as np

from regret_ls.cli import main
from regret_ls.linalg import matrix_to_json

from test_formulations import random_instance


def write_problem(tmp_path, spec, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec.to_json()))
    return str(path)


class TestSolveCommand:
    def test_json_output_with_certificate(self, tmp_path, capsys):
        path = write_problem(tmp_path, random_instance(0))
        assert main(["solve", "--problem", path, "--estimator", "rgrt-ls"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["estimator"] == "rgrt-ls"
        assert len(out["x_hat"]) == 2 and len(out["x_hat"][0]) == 2
        assert out["gamma_star"] > 0
        assert out["solver"].startswith("sdp:Optimal")

    def test_csv_output_plain_estimator(self, tmp_path, capsys):
        path = write_problem(tmp_path, random_instance(1))
        code = main(["solve", "--problem", path, "--estimator", "ls", "--format", "csv"])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "index,re,im"
        assert len(lines) == 3  # header + one row per coefficient, no gamma row

    def test_missing_file_is_usage_error(self, capsys):
        assert main(["solve", "--problem", "/nonexistent.json", "--estimator", "ls"]) == 1
        assert "no such file" in capsys.readouterr().err

    def test_malformed_json_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["solve", "--problem", str(path), "--estimator", "ls"]) == 1
        assert "malformed JSON" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, tmp_path, capsys):
        path = write_problem(tmp_path, random_instance(2))
        assert main(["solve", "--problem", path, "--estimator", "ls", "--bogus"]) == 1

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        # nongeneric total least squares data
        obj = {
            "h": matrix_to_json(np.array([[1.0], [0.0]], dtype=complex)),
            "y": matrix_to_json(np.array([0.0, 1.0], dtype=complex)),
        }
        path = tmp_path / "tls.json"
        path.write_text(json.dumps(obj))
        assert main(["solve", "--problem", str(path), "--estimator", "tls"]) == 2
        assert "solver failure" in capsys.readouterr().err


class TestReproduceCommand:
    def test_writes_scenario_files(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            ["reproduce", "--fig", "1", "--seed", "4", "--trials", "3", "--outdir", str(out)]
        )
        assert code == 0
        for suffix in ("sorted.csv", "summary.csv", "sweep.csv", "metadata.json"):
            assert (out / f"fig1_{suffix}").exists()
        meta = json.loads((out / "fig1_metadata.json").read_text())
        assert meta["master_seed"] == 4
        assert meta["config"]["trials"] == 3

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        argv = ["reproduce", "--fig", "4", "--seed", "2", "--trials", "3"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(argv + ["--outdir", str(a)]) == 0
        assert main(argv + ["--outdir", str(b)]) == 0
        for name in ("fig4_sorted.csv", "fig4_summary.csv", "fig4_sweep.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_output(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["reproduce", "--fig", "1", "--seed", "0", "--trials", "3", "--outdir", str(a)])
        main(["reproduce", "--fig", "1", "--seed", "1", "--trials", "3", "--outdir", str(b)])
        assert (a / "fig1_sorted.csv").read_bytes() != (b / "fig1_sorted.csv").read_bytes()

    def test_env_var_sets_default_seed(self, tmp_path, capsys, monkeypatch):
        a, b = tmp_path / "a", tmp_path / "b"
        monkeypatch.setenv("REGRET_LS_SEED", "7")
        main(["reproduce", "--fig", "1", "--trials", "3", "--outdir", str(a)])
        monkeypatch.delenv("REGRET_LS_SEED")
        main(["reproduce", "--fig", "1", "--seed", "7", "--trials", "3", "--outdir", str(b)])
        assert (a / "fig1_sorted.csv").read_bytes() == (b / "fig1_sorted.csv").read_bytes()


class TestSweepCommand:
    def test_runs_config_file(self, tmp_path, capsys):
        config = {
            "scenario": "demo",
            "m": 4,
            "n": 2,
            "estimators": ["rgrt-ls", "ls"],
            "trials": 2,
            "sweep_grid": [0.2, 0.4],
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        out = tmp_path / "out"
        code = main(["sweep", "--config", str(path), "--seed", "1", "--outdir", str(out)])
        assert code == 0
        lines = (out / "demo_sweep.csv").read_text().splitlines()
        assert lines[0] == "delta,estimator,mean,stderr"
        assert len(lines) == 1 + 2 * 2
        meta = json.loads((out / "demo_metadata.json").read_text())
        assert meta["master_seed"] == 1

    def test_bad_config_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"scenario": "demo", "m": 2, "n": 4, "estimators": ["ls"]}))
        assert main(["sweep", "--config", str(path)]) == 1
        assert "bad config" in capsys.readouterr().err


class TestValidateCommand:
    def test_gradient_suite_passes(self, capsys):
        assert main(["validate", "--suite", "gradients", "--seed", "0"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_solver_suite_passes(self, capsys):
        assert main(["validate", "--suite", "solver", "--seed", "0"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_tightness_suite_passes(self, capsys):
        assert main(["validate", "--suite", "tightness", "--seed", "0"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_unknown_suite_is_usage_error(self, capsys):
        assert main(["validate", "--suite", "nope"]) == 1
