import os
import subprocess
import sys

import pytest

from fessi import io
from fessi.cli import main
from fessi.scenario import PRESETS


def _cfg(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESETS:
        assert name in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fessi", "presets"], capture_output=True, text=True)
    assert res.returncode == 0 and "fig3" in res.stdout


def test_synth_writes_pulse(tmp_path, capsys):
    assert main(["synth", "--preset", "fig3-pulse", "--out", str(tmp_path)]) == 0
    psi = io.read_spectral(tmp_path / "pulse_spectral.txt")
    assert psi.grid.count == 4096
    assert (tmp_path / "pulse_temporal.txt").exists()


def test_run_fig3(tmp_path, capsys):
    assert main(["run", "--preset", "fig3", "--out", str(tmp_path)]) == 0
    s = io.read_summary(tmp_path / "summary.txt")
    assert float(s["fidelity"]) >= 0.999
    assert s["status"] == "ok" and s["reference_plane"] == "LEM"
    assert "total_s" in io.read_summary(tmp_path / "timing.txt")
    assert "fidelity=" in capsys.readouterr().out


def test_run_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["run", "--preset", "fig-s2", "--seed", "5", "--out", str(d)]) == 0
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    for n in names:
        if n != "timing.txt":
            assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_seed_changes_jittered_output(tmp_path):
    for seed in ("1", "2"):
        assert main(["run", "--preset", "fig-s2", "--seed", seed, "--out", str(tmp_path / seed)]) == 0
    one = (tmp_path / "1" / "interferogram_signal.txt").read_bytes()
    two = (tmp_path / "2" / "interferogram_signal.txt").read_bytes()
    assert one != two


class TestExitCodes:
    def test_missing_inputs(self, capsys):
        assert main(["run"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_schema_violation(self, tmp_path, capsys):
        path = _cfg(tmp_path, "preset: fig3\nmeasurement:\n  tau: 30\n  delay: 4\n")
        assert main(["run", "--config", path]) == 2
        assert "cfg.yaml:4:3: unknown key 'measurement.delay'" in capsys.readouterr().err

    def test_strict_constraint_failure(self, tmp_path, capsys):
        path = _cfg(tmp_path, "preset: fig3\nmeasurement:\n  tau: 3\n")
        assert main(["run", "--config", path, "--strict", "--out", str(tmp_path / "o")]) == 3
        err = capsys.readouterr().err
        assert "warning" in err and "--strict" in err

    def test_constraint_failure_is_a_warning(self, tmp_path, capsys):
        path = _cfg(tmp_path, "preset: fig3\nlem:\n  delta_E: 0.9\n")
        assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 0
        assert "warning" in capsys.readouterr().err

    def test_reconstruction_failure(self, tmp_path, capsys):
        path = _cfg(tmp_path, "preset: fig3\nmeasurement:\n  tau: 450\n")
        assert main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 4
        assert "reconstruction failed" in capsys.readouterr().err
        assert io.read_summary(tmp_path / "o" / "summary.txt")["status"] == "reconstruction_failed"

    def test_bad_thread_limit(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("FESSI_THREADS", "many")
        args = ["sweep", "--preset", "fig3", "--axis", "tau", "--values", "30",
                "--out", str(tmp_path)]
        assert main(args) == 2
        assert "FESSI_THREADS" in capsys.readouterr().err


class TestSweep:
    def test_axis_from_command_line(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FESSI_THREADS", "2")
        args = ["sweep", "--preset", "fig3", "--axis", "tau", "--values", "20", "30", "500",
                "--out", str(tmp_path)]
        assert main(args) == 0
        h, rows = io.read_table(tmp_path / "sweep_tau.txt")
        assert h["axis"] == "tau" and rows.shape == (3, 7)
        assert list(rows[:, 0]) == [20, 30, 500]
        assert rows[1, 2] > 0.999 and rows[2, 6] == 1

    def test_axis_from_config(self, tmp_path):
        path = _cfg(tmp_path, "preset: fig3\nsweep:\n  axis: delta_E\n  values: [0.05, 0.1]\n"
                              "  seeds: 2\n")
        assert main(["sweep", "--config", path, "--out", str(tmp_path)]) == 0
        _, rows = io.read_table(tmp_path / "sweep_delta_E.txt")
        assert rows.shape[0] == 4 and list(rows[:, 1]) == [0, 1, 0, 1]

    def test_empty_axis_rejected(self, tmp_path, capsys):
        path = _cfg(tmp_path, "preset: fig3\nsweep:\n  axis: tau\n  values: []\n")
        assert main(["sweep", "--config", path, "--out", str(tmp_path)]) == 2
        assert "empty" in capsys.readouterr().err

    def test_axis_without_values(self, tmp_path):
        assert main(["sweep", "--preset", "fig3", "--axis", "tau", "--out", str(tmp_path)]) == 2


class TestDiagram:
    def test_preset(self, tmp_path, capsys):
        assert main(["diagram", "--preset", "fig-s5a", "--out", str(tmp_path)]) == 0
        h, grid = io.read_table(tmp_path / "diagram_phi2_grid.txt")
        assert grid.shape == (400 * 200, 3) and float(h["level_fs"]) == pytest.approx(8.6143, abs=1e-4)
        _, contour = io.read_table(tmp_path / "diagram_phi2_contour.txt")
        assert contour.shape[1] == 3 and contour.shape[0] > 10

    def test_single_point(self, tmp_path, capsys):
        path = _cfg(tmp_path, "diagram:\n  sigma_E_range: [0.425, 0.425]\n"
                              "  phase_range: [0, 0]\n  resolution: [1, 1]\n")
        assert main(["diagram", "--config", path, "--out", str(tmp_path)]) == 0
        assert "sigma_t_fs=0.774367" in capsys.readouterr().out

    def test_needs_diagram_section(self, tmp_path):
        assert main(["diagram", "--preset", "fig3", "--out", str(tmp_path)]) == 2
