import csv
import json

import pytest
from click.testing import CliRunner

from openbook_spectra.cli import main
from openbook_spectra.config import ExperimentConfig

SMALL = """[run]
r_values = 40.0
grid_N = 400
[eta]
eta_r_values = 40.0
eta_N = 400
[flow]
flow_R_values = 30.0
flow_N = 400
[perturb]
perturb_modes = 2
"""


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return str(p)


def run(*args):
    res = CliRunner().invoke(main, list(args))
    return res


def test_print_defaults_round_trips():
    res = run("profiles", "--print-defaults")
    assert res.exit_code == 0
    assert ExperimentConfig.loads(res.output) == ExperimentConfig()


def test_hat_ledger_r100(tmp_path):
    out = tmp_path / "new" / "dir"          # missing output directory is created
    res = run("hat", "--r", "100", "--out", str(out))
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(open(out / "hat_ledger_r100.csv")))
    assert len(rows) == 23
    assert {r["multiplicity"] for r in rows} == {"201"}
    man = json.loads((out / "manifest_hat.json").read_text())
    assert man["status"] == "ok" and "hat_ledger_r100.csv" in man["outputs"]
    assert man["config_sha256"] == ExperimentConfig().replace(output_dir=str(out)).digest()


def test_ck_deterministic(tmp_path, small_config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("ck", "--config", small_config, "--out", str(a)).exit_code == 0
    assert run("ck", "--config", small_config, "--out", str(b)).exit_code == 0
    ca, cb = (a / "ck_ledger_r40.csv").read_bytes(), (b / "ck_ledger_r40.csv").read_bytes()
    assert ca == cb
    header = ca.decode().splitlines()[0]
    assert header == "model,k,m,rho_turn,gamma,lambda,residual,beta_l2,flag"
    row = ca.decode().splitlines()[1].split(",")
    # 17 significant digits
    assert len(row[5].lstrip("-").replace(".", "").lstrip("0").split("e")[0]) >= 15
    ma = json.loads((a / "manifest_ck.json").read_text())["outputs"]
    mb = json.loads((b / "manifest_ck.json").read_text())["outputs"]
    assert ma == mb


def test_profiles_eta_sflow_perturb(tmp_path, small_config):
    out = tmp_path / "o"
    for cmd in ("profiles", "eta", "sflow"):
        res = run(cmd, "--config", small_config, "--out", str(out))
        assert res.exit_code == 0, (cmd, res.output)
    rep = json.loads((out / "eta_report_r40.json").read_text())
    assert rep["vw_step"] == 81 and rep["ladder_matches"]
    summary = list(csv.DictReader(open(out / "sflow_summary.csv")))
    assert summary[0]["lattice_agrees"] == "True"
    res = run("perturb", "--config", small_config, "--out", str(out), "--r", "100", "--r", "200")
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(open(out / "perturb_table.csv")))
    assert len(rows) == 4 and "mu_6" in rows[0]


def test_report_subset(tmp_path):
    res = run("report", "--criteria", "8", "--out", str(tmp_path))
    assert res.exit_code == 0, res.output
    assert "[PASS] criterion 8" in (tmp_path / "report.txt").read_text()
    assert json.loads((tmp_path / "report.json").read_text())["criteria"][0]["passed"] is True


def test_validation_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\ngrid_N = 10\n")
    res = run("ck", "--config", str(bad), "--out", str(tmp_path))
    assert res.exit_code == 2
    assert "run.grid_N" in res.output
    res = run("report", "--criteria", "42", "--out", str(tmp_path))
    assert res.exit_code == 2
    man = json.loads((tmp_path / "manifest_report.json").read_text())
    assert man["status"] == "failed"


def test_numeric_failure_leaves_manifest(tmp_path, small_config, monkeypatch):
    from openbook_spectra import cli
    from openbook_spectra.errors import TrackingLoss

    def boom(*a, **k):
        raise TrackingLoss("lost")

    monkeypatch.setattr(cli, "track_spectral_flow", boom)
    res = run("sflow", "--config", small_config, "--out", str(tmp_path))
    assert res.exit_code == 3
    man = json.loads((tmp_path / "manifest_sflow.json").read_text())
    assert man["status"] == "failed" and man["failed_stage"] == "track R=30"
