import csv
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from fiolab import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def outputs(tmp_path, stem):
    return f"output: {{csv: {tmp_path / (stem + '.csv')}, report: {tmp_path / (stem + '.yaml')}, svg: {tmp_path / (stem + '.svg')}}}\n"


def test_identity_check(tmp_path, capsys):
    cfg = write(tmp_path, "d: 1\ngrid: {n: 2048, L: 8.0}\nphase: {kind: linear}\n" + outputs(tmp_path, "id"))
    assert cli.main(["apply", "--config", cfg, "--check"]) == 0
    assert "PASS" in capsys.readouterr().out
    rep = yaml.safe_load((tmp_path / "id.yaml").read_text())
    assert rep["check_error"] < 1e-10 and rep["verdict"] is True
    rows = list(csv.reader(open(tmp_path / "id.csv", newline="")))
    assert rows[0] == ["x", "re", "im"] and len(rows) == 2049
    x = np.array([float(r[0]) for r in rows[1:]])
    re = np.array([float(r[1]) for r in rows[1:]])
    assert np.abs(re - np.exp(-(x**2) / (2 * 0.25**2))).max() < 1e-10


def test_shifted_check_and_values(tmp_path):
    cfg = write(tmp_path, "phase: {kind: shifted, a: [0.75]}\n" + outputs(tmp_path, "sh"))
    assert cli.main(["apply", "--config", cfg, "--check"]) == 0
    rows = list(csv.reader(open(tmp_path / "sh.csv", newline="")))[1:]
    x = np.array([float(r[0]) for r in rows])
    re = np.array([float(r[1]) for r in rows])
    assert np.abs(re - np.exp(-((x + 0.75) ** 2) / (2 * 0.25**2))).max() < 1e-10


def test_check_needs_exact_oracle(tmp_path):
    cfg = write(tmp_path, "phase: {kind: phi_product}\nsymbol: {support: 2.0}\n")
    assert cli.main(["apply", "--config", cfg, "--check"]) == 2


@pytest.mark.parametrize(
    "text,needle",
    [
        ("grid: {n: 2048\n", "malformed"),
        ("grdi: {n: 2048}\n", "unknown config key"),
        ("grid: {n: 2048, L: 8.0, extra: 1}\n", "grid.extra"),
        ("grid: {n: 1000}\n", "power of two"),
        ("grid: {n: 2048.5}\n", "integer"),
        ("d: 3\n", "d must be"),
        ("experiment: {p: 0.5}\n", "p must be"),
        ("phase: {kind: spiral}\n", "unknown phase kind"),
        ("reduction: fast\n", "reduction"),
        ("- a\n- b\n", "mapping"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    assert cli.main(["apply", "--config", cfg]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert cli.main(["norm", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_large_bump_rejected(tmp_path, capsys):
    cfg = write(tmp_path, "phase: {kind: phi_product, c_bump: 0.9}\n")
    assert cli.main(["check-phase", "--config", cfg]) == 2
    assert "min phi'" in capsys.readouterr().err


def test_check_phase_linear(tmp_path, capsys):
    cfg = write(tmp_path, f"d: 2\nphase: {{kind: linear}}\noutput: {{report: {tmp_path / 'cp.yaml'}}}\n")
    assert cli.main(["check-phase", "--config", cfg, "--strict"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "rank 0" in out
    rep = yaml.safe_load((tmp_path / "cp.yaml").read_text())
    assert rep["verdict"] and rep["hessian_x_rank"] == 0 and all(rep["checks"].values())


def test_check_phase_product(tmp_path):
    cfg = write(tmp_path, f"d: 2\nphase: {{kind: phi_product, r: 1}}\noutput: {{report: {tmp_path / 'cp.yaml'}}}\n")
    assert cli.main(["check-phase", "--config", cfg, "--strict"]) == 0
    assert yaml.safe_load((tmp_path / "cp.yaml").read_text())["declared_rank"] == 1


def test_norm_command(tmp_path):
    cfg = write(tmp_path, "experiment: {p: 2}\n" + outputs(tmp_path, "nm"))
    assert cli.main(["norm", "--config", cfg]) == 0
    rep = yaml.safe_load((tmp_path / "nm.yaml").read_text())
    # ||gaussian||_2 = (pi w^2)^(1/4) for w = 1/4 (Parseval)
    assert rep["norm"] == pytest.approx((math.pi * 0.0625) ** 0.25, rel=1e-12)


def test_numeric_failure_exit_3(tmp_path, monkeypatch):
    cfg = write(tmp_path, "experiment: {p: 2}\n")
    monkeypatch.setattr(cli, "flp_norm", lambda *a, **k: float("nan"))
    assert cli.main(["norm", "--config", cfg]) == 3


def test_nan_output_exit_3(tmp_path, monkeypatch):
    cfg = write(tmp_path, "phase: {kind: linear}\n")

    def broken(self, f):
        return cli.SampledFunction(self.grid, np.full(self.grid.size, np.nan))

    monkeypatch.setattr(cli.FourierIntegralOperator, "apply", broken)
    assert cli.main(["apply", "--config", cfg]) == 3


SHARP = "d: 1\ngrid: {n: 4096, L: 4.0}\nphase: {kind: phi_product}\nsymbol: {order: %s, support: 2.0, frequency_floor: true}\nexperiment: {p: %s, j_min: 3, j_max: 6}\n"


def test_sharpness_outputs_round_trip(tmp_path):
    cfg = write(tmp_path, SHARP % (0.0, 1) + outputs(tmp_path, "sp") + "seed: 11\n")
    assert cli.main(["sharpness", "--config", cfg, "--strict"]) == 0
    rep = cli.read_report(tmp_path / "sp.yaml")
    assert rep.verdict and rep.seed == 11 and abs(rep.slope - 0.5) < 0.15
    again = yaml.safe_load(yaml.safe_dump(rep.to_dict()))
    assert cli.ExperimentReport.from_dict(again) == rep
    lines = (tmp_path / "sp.csv").read_bytes().split(b"\r\n")
    assert lines[0] == b"j,ratio,log2_ratio"
    ratio = lines[1].split(b",")[1].decode()
    assert float(ratio) == rep.ratios[0]
    assert len(ratio.replace(".", "").lstrip("0")) >= 16
    svg = (tmp_path / "sp.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


def test_seed_flag_overrides(tmp_path):
    cfg = write(tmp_path, SHARP % (0.0, 2) + outputs(tmp_path, "sp2"))
    assert cli.main(["sharpness", "--config", cfg, "--seed", "5", "--deterministic"]) == 0
    assert cli.read_report(tmp_path / "sp2.yaml").seed == 5


def test_strict_verdict_failure_exit_4(tmp_path):
    # m = 0.5 at p = 1: predicted slope 1, tolerance tightened so the run fails on purpose
    text = SHARP % (0.0, 1) + "experiment: {p: 1, j_min: 3, j_max: 6, tolerance: 0.001}\n"
    text = text.replace("experiment: {p: 1, j_min: 3, j_max: 6}\n", "")
    cfg = write(tmp_path, text)
    assert cli.main(["sharpness", "--config", cfg]) == 0
    assert cli.main(["sharpness", "--config", cfg, "--strict"]) == 4


def test_sharpness_beyond_grid_exit_2(tmp_path):
    cfg = write(tmp_path, "grid: {n: 2048, L: 8.0}\nphase: {kind: phi_product}\nsymbol: {support: 2.0}\nexperiment: {j_min: 4, j_max: 9}\n")
    assert cli.main(["sharpness", "--config", cfg]) == 2


def test_rank0_control_via_cli(tmp_path):
    cfg = write(tmp_path, "grid: {n: 4096, L: 4.0}\nphase: {kind: shifted, a: [0.5]}\nsymbol: {support: 2.0}\nexperiment: {j_min: 3, j_max: 6}\n" + outputs(tmp_path, "r0"))
    assert cli.main(["sharpness", "--config", cfg, "--strict"]) == 0
    assert cli.read_report(tmp_path / "r0.yaml").kind == "r0_control"


def test_decompose_command(tmp_path):
    cfg = write(tmp_path, "grid: {n: 4096, L: 2.0}\nphase: {kind: phi_product}\nsymbol: {support: 1.0}\n" + outputs(tmp_path, "dc"))
    assert cli.main(["decompose", "--config", cfg, "--strict"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "dc.csv", newline="")))
    assert [int(r["j"]) for r in rows] == [4, 5, 6, 7, 8]
    assert yaml.safe_load((tmp_path / "dc.yaml").read_text())["partition_error"] < 1e-12


def test_schur_command(tmp_path):
    cfg = write(
        tmp_path,
        "grid: {n: 4096, L: 4.0}\nphase: {kind: phi_product}\nsymbol: {order: -0.5, support: 2.0, frequency_floor: true}\n"
        "experiment: {j_min: 3, j_max: 6, tolerance: 0.2}\n" + outputs(tmp_path, "sc"),
    )
    assert cli.main(["schur", "--config", cfg, "--strict"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sc.csv", newline="")))
    assert list(rows[0]) == ["j", "nu", "row", "col"] and len(rows) == 4
    assert abs(yaml.safe_load((tmp_path / "sc.yaml").read_text())["slope"] + 0.5) < 0.2


def test_commutation_command(tmp_path):
    cfg = write(
        tmp_path,
        "grid: {n: 4096, L: 4.0}\nphase: {kind: phi_product}\nsymbol: {support: 2.0, frequency_floor: true}\n"
        "experiment: {j_min: 2, j_max: 6, probes: 2}\nseed: 3\n" + outputs(tmp_path, "cm"),
    )
    assert cli.main(["commutation", "--config", cfg, "--strict"]) == 0
    rep = yaml.safe_load((tmp_path / "cm.yaml").read_text())
    assert rep["N0"] <= 3 and rep["seed"] == 3
    assert len(list(csv.reader(open(tmp_path / "cm.csv", newline="")))) == 26


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.yaml")):
        cfg = cli.load_config(path)
        cli.build_grid(cfg)
        cli.build_phase(cfg)


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, "phase: {kind: linear}\n")
    done = subprocess.run([sys.executable, "-m", "fiolab.cli", "apply", "--config", cfg, "--check"], capture_output=True, text=True)
    assert done.returncode == 0 and "PASS" in done.stdout
