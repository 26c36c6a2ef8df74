import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from homtomo import tables
from homtomo.cli import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

GRID = """
[grid]
n_points = 256
dt = 1.0
omega0 = 10.0
"""


def write(tmp_path, body, name="run.toml"):
    path = tmp_path / name
    path.write_text(GRID + body)
    return path


def read_rows(path):
    return tables.read_table(path.read_text())


def footer(path):
    out = {}
    for line in path.read_text().splitlines():
        if line.startswith("# ") and ": " in line:
            key, value = line[2:].split(": ", 1)
            out[key] = value
    return out


class TestHomScan:
    BODY = """
[reference]
shape = "gaussian"
tau = 2.0
[signal]
kind = "gaussian"
tau = 2.0
center = 3.0
[schedule]
delays = [5.0, -1.0, 3.0]
"""

    def test_exact_rows(self, tmp_path):
        cfg = write(tmp_path, self.BODY)
        assert run(["hom-scan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rows = read_rows(tmp_path / "o" / "hom_scan.csv")
        assert [float(r["delay_s"]) for r in rows] == [-1.0, 3.0, 5.0]
        assert float(rows[1]["probability"]) == pytest.approx(0.0, abs=1e-12)
        assert all(float(r["stderr"]) == 0.0 for r in rows)

    def test_off_band_signal_is_flat(self, tmp_path):
        body = self.BODY.replace('kind = "gaussian"\ntau = 2.0\ncenter = 3.0', 'kind = "gaussian"\ntau = 2.0\ncenter = 80.0')
        cfg = write(tmp_path, body)
        assert run(["hom-scan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        probs = [float(r["probability"]) for r in read_rows(tmp_path / "o" / "hom_scan.csv")]
        np.testing.assert_allclose(probs, 0.5, atol=1e-12)

    def test_trials_and_seed_override(self, tmp_path):
        cfg = write(tmp_path, self.BODY + "[trials]\ntrials_per_setting = 500\nseed = 3\n")
        run(["hom-scan", "--config", str(cfg), "--out", str(tmp_path / "a")])
        run(["hom-scan", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "4"])
        run(["hom-scan", "--config", str(cfg), "--out", str(tmp_path / "c"), "--exact"])
        a = (tmp_path / "a" / "hom_scan.csv").read_text()
        b = (tmp_path / "b" / "hom_scan.csv").read_text()
        assert "# seed: 3" in a and "# seed: 4" in b
        assert a != b
        assert "# trials_per_setting: exact" in (tmp_path / "c" / "hom_scan.csv").read_text()

    def test_rect_law(self, tmp_path):
        out = tmp_path / "o"
        cfg = CONFIGS / "hom_scan.toml"
        assert run(["hom-scan", "--config", str(cfg), "--out", str(out), "--exact"]) == 0
        rows = read_rows(out / "hom_scan.csv")
        t = np.array([float(r["delay_s"]) for r in rows])
        p = np.array([float(r["probability"]) for r in rows])
        B = 255 * 2 * np.pi / (512 * 0.5)
        intensity = np.exp(-((t - 1.0) ** 2) / 8.0) / np.sqrt(8 * np.pi)
        np.testing.assert_allclose(p, 0.5 - np.pi / B * intensity, atol=1e-3 * (0.5 - p.min()))


class TestSigmaCheck:
    def test_zero_row_and_symmetry(self, tmp_path):
        cfg = write(tmp_path, '[reference]\nshape = "gaussian"\ntau = 2.0\n[schedule]\nphis = [0.5, -0.5, 3.0]\n')
        assert run(["sigma-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rows = {float(r["phi_rad"]): float(r["sigma"]) for r in read_rows(tmp_path / "o" / "sigma.csv")}
        assert rows[0.0] == 1.0
        assert rows[0.5] == rows[-0.5]
        assert min(rows.values()) >= 0.99


class TestTomography:
    BODY = """
[reference]
shape = "gaussian"
tau = 2.0
[signal]
kind = "two_time"
t1 = -20.0
t2 = 20.0
mixed = true
[schedule]
times = [-20.0, 20.0]
deconvolve = false
"""

    def test_mixed_two_time_block(self, tmp_path):
        cfg = write(tmp_path, self.BODY)
        assert run(["tomography", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rho = tables.read_matrix((tmp_path / "o" / "rho_filtered.txt").read_text())
        np.testing.assert_allclose(rho, 0.5 * np.eye(2), atol=1e-9)
        assert not (tmp_path / "o" / "rho.txt").exists()
        summary = {r["quantity"]: float(r["value"]) for r in read_rows(tmp_path / "o" / "tomography_summary.csv")}
        assert summary["fidelity_filtered_vs_truth"] == pytest.approx(1.0, abs=1e-9)

    def test_rates_file_import(self, tmp_path):
        cfg = write(tmp_path, self.BODY.replace("mixed = true", "phase = 0.8") + "[trials]\ntrials_per_setting = 10000\nseed = 5\n")
        run(["tomography", "--config", str(cfg), "--out", str(tmp_path / "sim")])
        shutil.copy(tmp_path / "sim" / "records.csv", tmp_path / "rates.csv")
        body = self.BODY.replace('[signal]\nkind = "two_time"\nt1 = -20.0\nt2 = 20.0\nmixed = true\n', "")
        cfg2 = write(tmp_path, body + 'rates_file = "rates.csv"\n', "import.toml")
        assert run(["tomography", "--config", str(cfg2), "--out", str(tmp_path / "imp")]) == 0
        a = tables.read_matrix((tmp_path / "sim" / "rho_filtered.txt").read_text())
        b = tables.read_matrix((tmp_path / "imp" / "rho_filtered.txt").read_text())
        np.testing.assert_array_equal(a, b)

    def test_deconvolved_output(self, tmp_path):
        body = """
[reference]
shape = "gaussian"
tau = 20.0
[signal]
kind = "gaussian"
tau = 20.0
center = 4.0
[schedule]
times = [-56.0, -40.0, -24.0, -8.0, 8.0, 24.0, 40.0, 56.0]
"""
        cfg = write(tmp_path, body)
        assert run(["tomography", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rho = tables.read_matrix((tmp_path / "o" / "rho.txt").read_text())
        assert rho.shape == (256, 256)
        summary = {r["quantity"]: float(r["value"]) for r in read_rows(tmp_path / "o" / "tomography_summary.csv")}
        assert summary["fidelity_density_vs_truth"] >= 0.999

    def test_support_outside_grid(self, tmp_path, capsys):
        cfg = write(tmp_path, self.BODY.replace("times = [-20.0, 20.0]", "times = [-20.0, 500.0]"))
        assert run(["tomography", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert json.loads(capsys.readouterr().err)["error"] == "config"


class TestEntangleScan:
    BODY = """
[grid]
n_points = 256
dt = 0.25
omega0 = 20.0
[reference]
shape = "gaussian"
tau = 0.3
[signal]
kind = "pdc"
pump_duration = {tp}
correlation_time = 1.0
[schedule]
delta_t = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0]
"""

    def run_scan(self, tmp_path, tp):
        cfg = tmp_path / "pair.toml"
        cfg.write_text(self.BODY.format(tp=tp))
        assert run(["entangle-scan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        path = tmp_path / "o" / "entangle_scan.csv"
        return read_rows(path), footer(path)

    def test_entangled(self, tmp_path):
        rows, foot = self.run_scan(tmp_path, 8.0)
        assert float(rows[0]["delta_t_s"]) == 0.0
        assert rows[1]["witness"] == "1"
        assert foot["crossing_3_8_s"] != "none"
        assert foot["crossing_direction"] == "rising"

    def test_separable(self, tmp_path):
        rows, foot = self.run_scan(tmp_path, 1.0)
        assert all(r["witness"] == "0" for r in rows)
        assert foot["crossing_3_8_s"] == "none"

    def test_wrong_signal_kind(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text(self.BODY.format(tp=8.0).replace('kind = "pdc"', 'kind = "gaussian"'))
        assert run(["entangle-scan", "--config", str(cfg)]) == 2


class TestErrors:
    def test_missing_config(self, tmp_path, capsys):
        assert run(["hom-scan", "--config", str(tmp_path / "nope.toml")]) == 4
        assert json.loads(capsys.readouterr().err)["error"] == "io"

    def test_bad_toml(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("[grid\n")
        assert run(["hom-scan", "--config", str(cfg)]) == 2

    def test_missing_section(self, tmp_path):
        cfg = write(tmp_path, "")
        assert run(["sigma-check", "--config", str(cfg)]) == 2

    def test_validation_failure(self, tmp_path, capsys):
        cfg = write(tmp_path, '[reference]\nshape = "gaussian"\ntau = 200.0\n')
        assert run(["sigma-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
        assert json.loads(capsys.readouterr().err)["error"] == "validation"

    def test_bad_grid(self, tmp_path):
        cfg = tmp_path / "g.toml"
        cfg.write_text('[grid]\nn_points = 8\ndt = 1.0\nomega0 = 1.0\n[reference]\nshape = "gaussian"\ntau = 1.0\n')
        assert run(["sigma-check", "--config", str(cfg)]) == 2

    def test_output_dir_from_config(self, tmp_path):
        cfg = write(tmp_path, '[reference]\nshape = "gaussian"\ntau = 2.0\n[output]\ndir = "results"\n')
        assert run(["sigma-check", "--config", str(cfg)]) == 0
        assert (tmp_path / "results" / "sigma.csv").exists()


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, '[reference]\nshape = "gaussian"\ntau = 2.0\n')
    proc = subprocess.run(
        [sys.executable, "-m", "homtomo", "sigma-check", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "sigma.csv").exists()


def test_matrix_round_trip():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_array_equal(tables.read_matrix(tables.render_matrix(m, {"command": "x"})), m)
