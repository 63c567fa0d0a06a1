"""Tests for the command-line scenarios: artifacts, determinism, exit codes."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from thinflow import cli
from thinflow.diagnostics import DiagnosticSeries

PLANAR_CFG = """\
# planar regime preset: vertical-average data and forcing only
l1=1.0
l2=1.0
eps=0.125
nu=1.0
n1=6
n2=6
n3=2
dt=0.002
t_end=0.2
scheme=etd-rk2
diag_stride=2
initial.kind=z-independent
initial.u=0.08
forcing.kind=steady
forcing.profile=z-independent
forcing.amplitude=0.02
seed=42
"""


def run_cli(args):
    return cli.main(args)


@pytest.fixture
def planar_cfg(tmp_path):
    path = tmp_path / "sim.cfg"
    path.write_text(PLANAR_CFG)
    return str(path)


class TestConfigParsing:
    def test_line_anchored_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("l1=1.0\nthis is not a pair\n")
        rc = run_cli(["simulate", "-c", str(bad)])
        assert rc == cli.EXIT_CONFIG
        err = capsys.readouterr().err
        assert "bad.cfg:2" in err

    def test_missing_required_key(self, tmp_path, capsys):
        cfg = tmp_path / "x.cfg"
        cfg.write_text("l1=1.0\n")
        rc = run_cli(["simulate", "-c", str(cfg), "--out", str(tmp_path / "o")])
        assert rc == cli.EXIT_CONFIG
        assert "l2" in capsys.readouterr().err

    def test_scenario_mismatch(self, tmp_path, capsys):
        cfg = tmp_path / "x.cfg"
        cfg.write_text("scenario=sweep\n")
        rc = run_cli(["simulate", "-c", str(cfg)])
        assert rc == cli.EXIT_CONFIG
        assert "scenario" in capsys.readouterr().err

    def test_set_overrides_file(self, planar_cfg, tmp_path):
        out = tmp_path / "out"
        rc = run_cli([
            "simulate", "-c", planar_cfg, "--out", str(out), "--set", "t_end=0.02",
        ])
        assert rc == cli.EXIT_OK
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["t_end"] == 0.02

    def test_no_subcommand_usage(self):
        with pytest.raises(SystemExit) as exc:
            cli.main([])
        assert exc.value.code == 2

    def test_unknown_kind_is_config_error(self, tmp_path, capsys):
        rc = run_cli([
            "simulate", "--out", str(tmp_path / "o"),
            "--set", "l1=1", "--set", "l2=1", "--set", "eps=0.1", "--set", "nu=1",
            "--set", "n1=4", "--set", "n2=4", "--set", "n3=1",
            "--set", "dt=0.001", "--set", "t_end=0.01",
            "--set", "initial.kind=spiral",
        ])
        assert rc == cli.EXIT_CONFIG


class TestSimulate:
    def test_artifacts_and_planar_closure(self, planar_cfg, tmp_path):
        out = tmp_path / "run"
        rc = run_cli(["simulate", "-c", planar_cfg, "--out", str(out)])
        assert rc == cli.EXIT_OK
        for name in ("diagnostics.csv", "run_meta.json", "manifest.json", "run_final.ckpt"):
            assert (out / name).exists()
        series = DiagnosticSeries.from_csv(out / "diagnostics.csv")
        # planar preset: the chi column is identically tiny
        assert np.all(series.chi <= 1e-10 * np.maximum(series.h1, 1e-300))
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["scenario"] == "simulate"
        assert "config_hash" in manifest
        assert manifest["config"]["seed"] == "42"

    def test_deterministic_artifacts(self, planar_cfg, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli(["simulate", "-c", planar_cfg, "--out", str(out1)]) == 0
        assert run_cli(["simulate", "-c", planar_cfg, "--out", str(out2)]) == 0
        assert (out1 / "diagnostics.csv").read_bytes() == (out2 / "diagnostics.csv").read_bytes()
        assert (out1 / "run_final.ckpt").read_bytes() == (out2 / "run_final.ckpt").read_bytes()

    def test_seed_changes_artifacts(self, planar_cfg, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_cli(["simulate", "-c", planar_cfg, "--out", str(out1)])
        run_cli(["simulate", "-c", planar_cfg, "--out", str(out2), "--seed", "7"])
        assert (out1 / "diagnostics.csv").read_bytes() != (out2 / "diagnostics.csv").read_bytes()

    def test_blowup_exit_code_and_dump(self, tmp_path):
        out = tmp_path / "boom"
        rc = run_cli([
            "simulate", "--out", str(out),
            "--set", "l1=1", "--set", "l2=1", "--set", "eps=0.2", "--set", "nu=1e-6",
            "--set", "n1=6", "--set", "n2=6", "--set", "n3=2",
            "--set", "dt=0.5", "--set", "t_end=50", "--set", "enforce_cfl=false",
            "--set", "initial.kind=random-divfree", "--set", "initial.u=50",
        ])
        assert rc == cli.EXIT_BLOWUP
        dump = json.loads((out / "blowup.json").read_text())
        assert dump["max_coeff"] > 1e12 or dump["n_nonfinite"] > 0
        # partial diagnostics are preserved
        assert (out / "diagnostics.csv").exists()

    def test_env_var_output_root(self, planar_cfg, tmp_path, monkeypatch):
        monkeypatch.setenv("THINFLOW_OUT_ROOT", str(tmp_path / "root"))
        monkeypatch.chdir(tmp_path)
        rc = run_cli(["simulate", "-c", planar_cfg])
        assert rc == cli.EXIT_OK
        assert (tmp_path / "root" / "simulate" / "diagnostics.csv").exists()


class TestVerifyInequalities:
    def test_reports_and_envelope(self, planar_cfg, tmp_path):
        run_dir = tmp_path / "run"
        assert run_cli(["simulate", "-c", planar_cfg, "--out", str(run_dir)]) == 0
        out = tmp_path / "verify"
        rc = run_cli([
            "verify-inequalities", "--out", str(out),
            "--set", f"in={run_dir}", "--set", "regime=planar",
        ])
        assert rc == cli.EXIT_OK
        reports = json.loads((out / "inequality_reports.json").read_text())
        assert {r["name"] for r in reports} == {"planar-phi", "planar-psi", "planar-energy"}
        assert all(r["verdict"] == "pass" for r in reports)
        assert (out / "residual_traces_planar.csv").exists()
        containment = json.loads((out / "containment.json").read_text())
        assert containment["containment"]["contained"]
        bounds = json.loads((out / "regularity_bounds.json").read_text())
        assert bounds["c_uniform"] is not None

    def test_all_regimes(self, planar_cfg, tmp_path):
        run_dir = tmp_path / "run"
        run_cli(["simulate", "-c", planar_cfg, "--out", str(run_dir)])
        out = tmp_path / "verify"
        rc = run_cli([
            "verify-inequalities", "--out", str(out),
            "--set", f"in={run_dir}", "--set", "regime=all",
        ])
        assert rc == cli.EXIT_OK
        reports = json.loads((out / "inequality_reports.json").read_text())
        assert len(reports) == 9

    def test_missing_input_dir(self, tmp_path, capsys):
        rc = run_cli(["verify-inequalities", "--out", str(tmp_path / "v")])
        assert rc == cli.EXIT_CONFIG
        assert "in" in capsys.readouterr().err

    def test_split_regime_skips_envelope(self, planar_cfg, tmp_path):
        run_dir = tmp_path / "run"
        run_cli(["simulate", "-c", planar_cfg, "--out", str(run_dir)])
        out = tmp_path / "verify"
        rc = run_cli([
            "verify-inequalities", "--out", str(out),
            "--set", f"in={run_dir}", "--set", "regime=full-split",
        ])
        assert rc == cli.EXIT_OK
        assert not (out / "envelope.csv").exists()
        assert (out / "inequality_reports.json").exists()


class TestEstimateAndSweep:
    def test_estimate_artifacts(self, tmp_path):
        out = tmp_path / "est"
        rc = run_cli([
            "estimate-constants", "--out", str(out),
            "--set", "inequality=planar-l4",
            "--set", "l1=1", "--set", "l2=1", "--set", "eps=0.2", "--set", "nu=1",
            "--set", "n1=8", "--set", "n2=8", "--set", "n3=1",
            "--set", "budget=40", "--seed", "3",
        ])
        assert rc == cli.EXIT_OK
        est = json.loads((out / "estimate.json").read_text())
        assert est["max_ratio"] >= 0.44
        assert est["maximizer_checkpoint"] == "maximizer.ckpt"
        assert (out / "maximizer.ckpt").exists()
        assert (out / "ratios.csv").read_text().splitlines()[0] == (
            "eps,n1,n2,n3,max_ratio,trials,best_kind"
        )

    def test_sweep_structure_and_fit(self, tmp_path):
        out = tmp_path / "sweep"
        rc = run_cli([
            "sweep", "--out", str(out),
            "--set", "inequality=thin-sup",
            "--set", "eps_list=0.25,0.125,0.0625,0.03125",
            "--set", "budget=8", "--set", "cap=32", "--set", "parallelism=2",
        ])
        assert rc == cli.EXIT_OK
        fit = json.loads((out / "scaling_fit.json").read_text())
        assert abs(fit["slope"] - 0.5) <= 0.12
        for eps in ("0.25", "0.125", "0.0625", "0.03125"):
            assert (out / f"eps_{eps}" / "estimate.json").exists()
            assert (out / f"eps_{eps}" / "maximizer.ckpt").exists()
        lines = (out / "sweep.csv").read_text().splitlines()
        assert len(lines) == 5

    def test_sweep_deterministic_under_parallelism(self, tmp_path):
        args = [
            "--set", "inequality=thin-l4",
            "--set", "eps_list=0.25,0.125,0.0625",
            "--set", "budget=6", "--set", "cap=16",
        ]
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        run_cli(["sweep", "--out", str(out1), "--set", "parallelism=1"] + args)
        run_cli(["sweep", "--out", str(out2), "--set", "parallelism=3"] + args)
        assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


class TestRescaleAndThresholds:
    def test_rescale_check(self, tmp_path):
        out = tmp_path / "rc"
        rc = run_cli([
            "rescale-check", "--out", str(out),
            "--set", "l1=2", "--set", "l2=1", "--set", "eps=0.125", "--set", "nu=0.5",
            "--set", "n1=5", "--set", "n2=5", "--set", "n3=2",
        ])
        assert rc == cli.EXIT_OK
        rep = json.loads((out / "rescale_report.json").read_text())
        assert rep["n"] == 2
        assert rep["residual_f_identity"] <= 1e-12
        assert rep["residual_u_identity"] <= 1e-12
        assert rep["roundtrip_residual"] <= 1e-12
        assert rep["rhs_residual"] <= 1e-10

    def test_thresholds(self, tmp_path):
        out = tmp_path / "th"
        rc = run_cli([
            "thresholds", "--out", str(out),
            "--set", "eps_list=0.1,0.01,0.001", "--set", "delta=0.01",
        ])
        assert rc == cli.EXIT_OK
        table = json.loads((out / "thresholds.json").read_text())
        assert len(table["rows"]) == 3
        assert all(r["uniform"] == 1.0 for r in table["rows"])
        lines = (out / "thresholds.csv").read_text().splitlines()
        assert len(lines) == 4

    def test_eps_validation_surfaces(self, tmp_path, capsys):
        rc = run_cli([
            "thresholds", "--out", str(tmp_path / "x"), "--set", "eps_list=1.5",
        ])
        assert rc == cli.EXIT_CONFIG


class TestRunScenarioApi:
    def test_load_and_run(self, planar_cfg, tmp_path):
        cfg = cli.ExperimentConfig.load(
            "simulate", path=planar_cfg, overrides={"out": str(tmp_path / "api"), "t_end": 0.02}
        )
        assert cli.run_scenario(cfg) == cli.EXIT_OK
        assert (tmp_path / "api" / "diagnostics.csv").exists()

    def test_unknown_scenario(self):
        with pytest.raises(cli.ConfigError, match="scenario"):
            cli.ExperimentConfig("render", {})

    def test_scenario_declaration_mismatch(self, tmp_path):
        path = tmp_path / "x.cfg"
        path.write_text("scenario=sweep\n")
        with pytest.raises(cli.ConfigError, match="scenario"):
            cli.ExperimentConfig.load("simulate", path=str(path))


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        """python -m thinflow.cli works as the installed entry point does."""
        proc = subprocess.run(
            [sys.executable, "-m", "thinflow.cli", "thresholds",
             "--out", str(tmp_path / "th"), "--set", "eps_list=0.1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert (tmp_path / "th" / "thresholds.csv").exists()
