import json
import os
import subprocess
import sys

import numpy as np
import pytest

from strato.cli import cli_main
from strato.core_types import read_checkpoint
from strato.errors import ConfigError, DegeneratePoints
from strato.experiment_harness import (
    ExperimentConfig,
    config_from_dict,
    fit_rate,
    load_config,
    run_paired,
    run_sweep,
)

SMALL = dict(
    nx=8,
    ny=8,
    nz=8,
    epsilon=0.1,
    nu=0.05,
    final_time=0.02,
    record_interval=5,
    amplitude=0.2,
    theta_amplitude=0.3,
    seed=1,
)


class TestConfig:
    def test_defaults_validate(self):
        ExperimentConfig().validate()

    def test_bad_preset(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(preset="warp_drive").validate()

    def test_sweep_must_decrease(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(sweep_epsilon=[0.1, 0.2], sweep_nu=[0.1, 0.2]).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(sweep_epsilon=[0.2, -0.1], sweep_nu=[0.2, 0.1]).validate()

    def test_rate_preset_needs_gamma(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(preset="well_prepared_rate", gamma=1.4).validate()

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"grid": {"nx": 8, "bogus": 1}})
        with pytest.raises(ConfigError):
            config_from_dict({"warp": {}})

    def test_toml_and_json_loading(self, tmp_path):
        toml = tmp_path / "a.toml"
        toml.write_text(
            "[grid]\nnx = 8\nny = 8\nnz = 8\n[params]\nepsilon = 0.25\n"
            "[output]\ndir = 'somewhere'\n"
        )
        cfg = load_config(toml)
        assert cfg.nx == 8 and cfg.epsilon == 0.25 and cfg.output_dir == "somewhere"
        js = tmp_path / "a.json"
        js.write_text(json.dumps({"grid": {"nx": 8, "ny": 8, "nz": 8}, "params": {"epsilon": 0.25}}))
        cfg2 = load_config(js)
        assert cfg2.epsilon == 0.25

    def test_hash_stable(self):
        a = ExperimentConfig(**SMALL).config_hash()
        b = ExperimentConfig(**SMALL).config_hash()
        assert a == b
        c = ExperimentConfig(**{**SMALL, "seed": 2}).config_hash()
        assert a != c


class TestFitRate:
    def test_exact_linear_power_law(self):
        xs = [0.4, 0.2, 0.1, 0.05]
        fit = fit_rate([(x, 0.7 * x) for x in xs])
        assert abs(fit.fitted_order - 1.0) < 1e-8
        assert fit.fit_residual < 1e-10

    def test_exact_quadratic(self):
        xs = [0.4, 0.2, 0.1]
        fit = fit_rate([(x, x**2) for x in xs])
        assert abs(fit.fitted_order - 2.0) < 1e-8

    def test_degenerate_points(self):
        with pytest.raises(DegeneratePoints):
            fit_rate([(0.4, 0.0), (0.2, 1.0), (0.1, 1.0)])
        with pytest.raises(DegeneratePoints):
            fit_rate([(0.4, 1.0), (0.2, 0.5)])


class TestRunPaired:
    def test_artifacts_and_manifest(self, tmp_path):
        cfg = ExperimentConfig(**SMALL, output_dir=str(tmp_path / "run"))
        result = run_paired(cfg)
        assert os.path.exists(result.csv_path)
        manifest = json.loads(open(result.manifest_path).read())
        assert manifest["complete"] is True
        assert manifest["config_hash"] == cfg.config_hash()
        import hashlib

        for name, digest in manifest["outputs"].items():
            blob = open(os.path.join(result.output_dir, name), "rb").read()
            assert hashlib.sha256(blob).hexdigest() == digest
        grid_ck, t_ck, arrays = read_checkpoint(
            os.path.join(result.output_dir, "primitive_final.strato")
        )
        assert grid_ck.nx == cfg.nx and len(arrays) == 6
        assert abs(t_ck - cfg.final_time) < 1e-12
        lines = open(result.csv_path).read().strip().splitlines()
        header = lines[0].split(",")
        assert "thm1_metric" in header and "acoustic_energy" in header
        assert len(lines) >= 3

    def test_equilibrium_preset_metric_zero(self, tmp_path):
        cfg = ExperimentConfig(
            **{**SMALL, "amplitude": 0.0, "theta_amplitude": 0.0},
            preset="equilibrium",
            output_dir=str(tmp_path / "eq"),
        )
        result = run_paired(cfg)
        for rec in result.records:
            assert rec.thm1_metric <= 1e-10
        assert result.sup_metric <= 1e-10

    def test_failed_run_flags_incomplete_manifest(self, tmp_path):
        # a wildly unstable explicit step blows up; the partial manifest
        # must be present and flagged incomplete
        from strato.errors import StratoError

        cfg = ExperimentConfig(
            **{**SMALL, "dt": 5.0, "final_time": 50.0, "amplitude": 0.4},
            output_dir=str(tmp_path / "boom"),
        )
        with pytest.raises(StratoError):
            run_paired(cfg)
        manifest = json.loads(open(tmp_path / "boom" / "manifest.json").read())
        assert manifest["complete"] is False

    def test_determinism(self, tmp_path):
        cfg1 = ExperimentConfig(**SMALL, output_dir=str(tmp_path / "r1"))
        cfg2 = ExperimentConfig(**SMALL, output_dir=str(tmp_path / "r2"))
        a = run_paired(cfg1)
        b = run_paired(cfg2)
        assert open(a.csv_path, "rb").read() == open(b.csv_path, "rb").read()

    def test_sweep_rate_csv_and_isolation(self, tmp_path):
        cfg = ExperimentConfig(
            **SMALL,
            sweep_epsilon=[0.4, 0.2, 0.1],
            sweep_nu=[0.4, 0.2, 0.1],
            output_dir=str(tmp_path / "sw"),
        )
        rows, fit = run_sweep(cfg, threads=1)
        assert len(rows) == 3
        rate = open(tmp_path / "sw" / "rate.csv").read().strip().splitlines()
        assert rate[0] == "epsilon,nu,eps_plus_nu,sup_metric"
        assert len(rate) == 4
        assert fit is not None
        # per-member runs match isolated single runs bit for bit
        solo = ExperimentConfig(
            **{**SMALL, "epsilon": 0.2, "nu": 0.2}, output_dir=str(tmp_path / "solo")
        )
        solo_result = run_paired(solo)
        member_csv = open(tmp_path / "sw" / "eps0.2_nu0.2" / "diagnostics.csv", "rb").read()
        assert member_csv == open(solo_result.csv_path, "rb").read()


class TestConvergencePreset:
    def test_orders_reported(self, tmp_path):
        cfg = ExperimentConfig(
            nx=8,
            ny=8,
            nz=8,
            epsilon=0.2,
            nu=0.0,
            final_time=0.02,
            amplitude=0.2,
            theta_amplitude=0.3,
            seed=1,
            preset="manufactured_convergence",
            output_dir=str(tmp_path / "conv"),
        )
        result = run_paired(cfg)
        rows = open(result.csv_path).read().strip().splitlines()
        assert rows[0].startswith("quantity")
        payload = json.loads(open(result.manifest_path).read())
        assert payload["temporal_order"] > 1.7
        assert payload["spatial_order"] > 1.9


class TestCli:
    def test_unknown_flag_exits_one(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert cli_main(["--definitely-not-a-flag"]) == 1
        assert list(tmp_path.iterdir()) == []  # nothing written

    def test_run_and_fit_roundtrip(self, tmp_path):
        cfgfile = tmp_path / "cfg.toml"
        cfgfile.write_text(
            "[grid]\nnx = 8\nny = 8\nnz = 8\n"
            "[params]\nepsilon = 0.1\nnu = 0.05\n"
            "[initial]\namplitude = 0.2\ntheta_amplitude = 0.3\nseed = 1\n"
            "[stepper]\nfinal_time = 0.02\n"
            f"[output]\ndir = '{tmp_path}/out'\nrecord_interval = 5\n"
            "[sweep]\nepsilon = [0.4, 0.2, 0.1]\nnu = [0.4, 0.2, 0.1]\n"
        )
        assert cli_main(["sweep", "--config", str(cfgfile)]) == 0
        assert cli_main(["fit", str(tmp_path / "out" / "rate.csv")]) == 0
        fitted = json.loads(open(tmp_path / "out" / "rate_fit.json").read())
        assert np.isfinite(fitted["fitted_order"])

    def test_info_exit_zero(self):
        assert cli_main(["info"]) == 0

    def test_missing_config_file_is_runtime_failure(self):
        assert cli_main(["info", "--config", "/nonexistent/thing.toml"]) == 2

    def test_threads_env_override(self, monkeypatch):
        from strato.cli import _resolve_threads

        class Args:
            threads = 7

        monkeypatch.setenv("STRATO_THREADS", "2")
        assert _resolve_threads(Args()) == 2
        monkeypatch.delenv("STRATO_THREADS")
        assert _resolve_threads(Args()) == 7

    def test_console_entry_point(self):
        out = subprocess.run(
            [sys.executable, "-m", "strato.cli", "--version"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        assert "strato" in out.stdout
