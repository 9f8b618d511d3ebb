"""Config parsing, validation gates, experiment runs, and determinism."""

import json

import numpy as np
import pytest

from slowfold.cli import build_system, main, parse_config, run_experiment, validate_config
from slowfold.errors import ConfigError

SCALAR_CFG = """\
# scalar linear benchmark
model.name = scalar_linear
model.a = 1.0
model.k = 0.4
model.c = 0.3
system.epsilon = 0.01
system.mu = 0.5
system.sigma = 0.0
experiment.kind = manifold
experiment.n_samples = 3
seeds.count = 2
seeds.base = 42
solver.tol = 1e-9
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestParseConfig:
    def test_values_and_comments(self, tmp_path):
        cfg = parse_config(_write(tmp_path, SCALAR_CFG))
        assert cfg["model.name"] == "scalar_linear"
        assert cfg["model.a"] == 1.0
        assert cfg["seeds.count"] == 2
        assert cfg["solver.tol"] == 1e-9

    def test_lists(self, tmp_path):
        cfg = parse_config(_write(tmp_path, "system.epsilon = 0.1, 0.05, 0.025\n"))
        assert cfg["system.epsilon"] == [0.1, 0.05, 0.025]

    def test_parse_error_names_line(self, tmp_path):
        with pytest.raises(ConfigError, match=":2:"):
            parse_config(_write(tmp_path, "a.b = 1\nnot a pair\n"))


class TestValidateConfig:
    def test_valid(self, tmp_path):
        assert validate_config(parse_config(_write(tmp_path, SCALAR_CFG))) == []

    def test_mu_gap_message(self):
        cfg = {
            "model.name": "scalar_linear", "model.a": 2.0, "model.k": 0.5,
            "model.c": 0.5, "system.epsilon": 0.01, "system.mu": 1.8,
        }
        out = validate_config(cfg)
        assert any("gamma1 - mu > K violated: 0.2 <= 0.5" in v for v in out)

    def test_lipschitz_gate_message(self):
        cfg = {
            "model.name": "scalar_linear", "model.a": 1.0, "model.k": 1.2,
            "model.c": 0.3, "system.epsilon": 0.01, "system.mu": 0.5,
        }
        out = validate_config(cfg)
        assert any("(A3)" in v for v in out)

    def test_coarse_grid_rejected(self):
        cfg = {
            "model.name": "scalar_linear", "model.a": 1.0, "model.k": 0.4,
            "model.c": 0.3, "system.epsilon": 0.01, "system.mu": 0.5,
            "grid.dt": 0.01,
        }
        assert any("grid.dt" in v for v in validate_config(cfg))

    def test_unknown_model(self):
        assert any("model.name" in v for v in validate_config({"model.name": "bogus"}))


class TestRunExperiment:
    def test_scalar_manifold_slope_and_status(self, tmp_path):
        cfg = parse_config(_write(tmp_path, SCALAR_CFG))
        out = tmp_path / "out"
        assert run_experiment(cfg, str(out)) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert abs(summary["mean_slope"] - 0.39952) < 1e-4
        assert all(summary["checks"].values())
        header = (out / "manifold.csv").read_text().splitlines()[0]
        assert header.startswith("seed,epsilon,sample_id,block,mode_index")

    def test_determinism_byte_identical(self, tmp_path):
        cfg = parse_config(_write(tmp_path, SCALAR_CFG))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_experiment(cfg, str(out1))
        run_experiment(cfg, str(out2))
        assert (out1 / "manifold.csv").read_bytes() == (out2 / "manifold.csv").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        cfg = parse_config(_write(tmp_path, SCALAR_CFG))
        out1, out2 = tmp_path / "t1", tmp_path / "t4"
        run_experiment(cfg, str(out1), threads=1)
        run_experiment(cfg, str(out2), threads=4)
        assert (out1 / "manifold.csv").read_bytes() == (out2 / "manifold.csv").read_bytes()

    def test_invalid_config_fail_closed(self, tmp_path, capsys):
        cfg = {
            "model.name": "scalar_linear", "model.a": 1.0, "model.k": 1.2,
            "model.c": 0.3, "system.epsilon": 0.01, "system.mu": 0.5,
        }
        out = tmp_path / "nothing"
        assert run_experiment(cfg, str(out)) == 2
        assert not out.exists()
        assert "(A3)" in capsys.readouterr().err


class TestMain:
    def test_main_runs(self, tmp_path, monkeypatch):
        cfgfile = _write(tmp_path, SCALAR_CFG)
        monkeypatch.delenv("SLOWFOLD_OUT", raising=False)
        assert main(["--config", cfgfile, "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "summary.json").exists()

    def test_env_overrides_out(self, tmp_path, monkeypatch):
        cfgfile = _write(tmp_path, SCALAR_CFG)
        envdir = tmp_path / "envout"
        monkeypatch.setenv("SLOWFOLD_OUT", str(envdir))
        assert main(["--config", cfgfile, "--out", str(tmp_path / "ignored")]) == 0
        assert envdir.exists() and not (tmp_path / "ignored").exists()

    def test_missing_config_is_status_2(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.cfg")]) == 2

    def test_seed_overrides(self, tmp_path, monkeypatch):
        cfgfile = _write(tmp_path, SCALAR_CFG)
        monkeypatch.delenv("SLOWFOLD_OUT", raising=False)
        out = tmp_path / "s"
        assert main(["--config", cfgfile, "--out", str(out), "--seeds", "1",
                     "--base-seed", "7"]) == 0
        first = (out / "manifold.csv").read_text().splitlines()[1]
        assert first.startswith("7,")


class TestBuildSystem:
    def test_cutoff_radius_applies(self):
        cfg = {
            "model.name": "parabolic_ode", "model.m_slow": 2, "model.cf": 0.12,
            "model.cg": 0.12, "model.cutoff_radius": 1.0, "system.n_modes": 4,
            "system.epsilon": 0.05, "system.mu": 0.3,
        }
        sys = build_system(cfg)
        assert sys.name.endswith("_cutoff")
        assert np.isclose(sys.K, 0.48)
