import json
import math
import os

import numpy as np
import pytest

from nufocus.cli import build_parser, main

FAST_CFG = """
[pulse]
detuning = 0.4meV

[bath]
N_nuclei = 2000
n_window = 0.004

[output]
directory = {out}
"""


@pytest.fixture
def fast_cfg(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "run.cfg"
    path.write_text(FAST_CFG.format(out=out))
    return str(path), str(out)


def read_csv(path):
    lines = open(path).read().strip().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


class TestPipelineCommand:
    def test_happy_path_writes_outputs(self, fast_cfg, capsys):
        cfg, out = fast_cfg
        assert main(["pipeline", "--config", cfg]) == 0
        for name in ("spin.csv", "rates.csv", "drift_fine.csv",
                     "distribution.csv", "observables.csv", "manifest.json"):
            assert os.path.exists(os.path.join(out, name)), name
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["T_R_s"] == pytest.approx(12.3e-9)
        assert len(manifest["config_sha256"]) == 64
        assert "observables.csv" in manifest["files"]
        header, rows = read_csv(os.path.join(out, "distribution.csv"))
        assert header == ["n", "P", "omega_over_2pi_GHz"]
        total = sum(float(r[1]) for r in rows)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_validation_error_exit_1(self, fast_cfg, capsys):
        cfg, _ = fast_cfg
        code = main(["pipeline", "--config", cfg, "--set", "dot.B_field=-1T"])
        assert code == 1
        err = capsys.readouterr().err
        assert "nufocus-error[config]" in err
        assert "dot.B_field" in err

    def test_numerical_error_exit_2(self, fast_cfg, capsys):
        cfg, _ = fast_cfg
        code = main([
            "pipeline", "--config", cfg,
            "--set", "numerics.initial_steps=64",
            "--set", "numerics.max_steps=64",
        ])
        assert code == 2
        assert "nufocus-error[non-unitary]" in capsys.readouterr().err


class TestScanCommand:
    def test_value_list(self, fast_cfg, capsys):
        cfg, out = fast_cfg
        code = main([
            "scan", "--config", cfg, "--axis", "detuning",
            "--values=-0.4meV,0meV,0.4meV", "--threads", "1",
        ])
        assert code == 0
        header, rows = read_csv(os.path.join(out, "observables.csv"))
        assert header[0] == "scan_value_eV"
        assert len(rows) == 3
        assert [float(r[0]) for r in rows] == pytest.approx(
            [-0.4e-3, 0.0, 0.4e-3]
        )
        assert all(r[5] == "ok" for r in rows)

    def test_range_row_arithmetic(self, fast_cfg):
        cfg, out = fast_cfg
        code = main([
            "scan", "--config", cfg, "--axis", "area",
            "--values", "0.2pi:0.6pi:0.2pi",
        ])
        assert code == 0
        _, rows = read_csv(os.path.join(out, "observables.csv"))
        assert len(rows) == 3

    def test_missing_axis_is_validation_error(self, fast_cfg, capsys):
        cfg, _ = fast_cfg
        assert main(["scan", "--config", cfg, "--values", "1,2"]) == 1


class TestOtherCommands:
    def test_propagator_json(self, fast_cfg):
        cfg, out = fast_cfg
        assert main(["propagator", "--config", cfg, "--n", "0.001"]) == 0
        payload = json.load(open(os.path.join(out, "propagator.json")))
        assert payload["basis"] == ["x+", "x-", "T+", "T-"]
        mat = np.array([[complex(a, b) for a, b in row]
                        for row in payload["matrix"]])
        assert np.abs(mat.conj().T @ mat - np.eye(4)).max() < 1e-9

    def test_spin_table(self, fast_cfg):
        cfg, out = fast_cfg
        assert main(["spin", "--config", cfg]) == 0
        header, rows = read_csv(os.path.join(out, "spin.csv"))
        assert header == ["omega_over_2pi_GHz", "Sx", "Sy", "Sz", "rho_TT"]
        assert len(rows) == 9   # n_window 0.004 at N=2000

    def test_rates_fine_flag(self, fast_cfg):
        cfg, out = fast_cfg
        assert main(["rates", "--config", cfg, "--fine"]) == 0
        header, rows = read_csv(os.path.join(out, "rates.csv"))
        assert header[0] == "n"
        assert len(rows) > 9    # oversampled against the master grid

    def test_evolve(self, fast_cfg):
        cfg, out = fast_cfg
        code = main([
            "evolve", "--config", cfg, "--duration", "2s",
            "--init", "delta:0.002",
        ])
        assert code == 0
        header, rows = read_csv(os.path.join(out, "evolve.csv"))
        assert header == ["t_s", "mean_n", "variance_n"]
        assert float(rows[0][1]) == pytest.approx(0.002)

    def test_distribution_command(self, fast_cfg):
        cfg, out = fast_cfg
        assert main(["distribution", "--config", cfg]) == 0
        header, rows = read_csv(os.path.join(out, "distribution.csv"))
        assert sum(float(r[1]) for r in rows) == pytest.approx(1.0, abs=1e-9)

    def test_scan_distribution_dumps(self, fast_cfg):
        cfg, out = fast_cfg
        code = main([
            "scan", "--config", cfg, "--axis", "area",
            "--values", "0.5pi,1pi",
            "--set", "output.dump_distributions=true",
        ])
        assert code == 0
        _, rows = read_csv(os.path.join(out, "observables.csv"))
        refs = [r[4] for r in rows]
        assert refs == ["distribution_000.csv", "distribution_001.csv"]
        for ref in refs:
            assert os.path.exists(os.path.join(out, ref))

    def test_default_config_without_file(self, tmp_path):
        # no --config: built-in defaults with overrides applied
        out = tmp_path / "o"
        code = main([
            "propagator", "--out", str(out),
            "--set", "bath.n_window=0.004",
        ])
        assert code == 0


class TestHelp:
    def test_help_lists_all_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        text = capsys.readouterr().out
        for cmd in ("propagator", "spin", "rates", "distribution", "evolve",
                    "pipeline", "scan"):
            assert cmd in text

    def test_subcommand_flags_snapshot(self, capsys):
        for cmd, extras in {
            "pipeline": [],
            "scan": ["--axis", "--values"],
            "rates": ["--fine"],
            "evolve": ["--duration", "--dt", "--init"],
            "propagator": ["--n"],
        }.items():
            with pytest.raises(SystemExit):
                main([cmd, "--help"])
            text = capsys.readouterr().out
            for flag in ["--config", "--set", "--out", "--threads", *extras]:
                assert flag in text, (cmd, flag)

    def test_env_threads(self, fast_cfg, monkeypatch):
        cfg, out = fast_cfg
        monkeypatch.setenv("NUFOCUS_THREADS", "1")
        assert main(["scan", "--config", cfg, "--axis", "detuning",
                     "--values", "0.4meV"]) == 0
