import json
import subprocess
import sys

import numpy as np
import pytest

from phasedesign.cli import main
from phasedesign.design import MeasurementMatrix

CONFIG = {"soi": "proper_gaussian", "n": 4, "snr_db": [0.0, 10.0], "matrices": ["UC", "RG"],
          "trials": 3, "recovery_options": {"max_iters": 50}}


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CONFIG))
    return str(p)


def test_design_subcommand(config, tmp_path):
    out = tmp_path / "a.json"
    assert main(["design", "--config", config, "--label", "MF", "--m", "8", "--out", str(out)]) == 0
    mm = MeasurementMatrix.from_json(out.read_text())
    assert mm.entries.shape == (8, 4) and mm.label == "MF"
    assert np.linalg.norm(mm.entries) ** 2 == pytest.approx(8.0)


def test_sweeps_are_byte_identical(config, tmp_path):
    for sub, fmt in [("snr-sweep", "csv"), ("snr-sweep", "json"), ("complexity-sweep", "csv"),
                     ("frobenius-table", "csv")]:
        outs = []
        for k in range(2):
            out = tmp_path / f"{sub}-{fmt}-{k}"
            assert main([sub, "--config", config, "--format", fmt, "--out", str(out), "--seed", "3"]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] and outs[0]


def test_flag_overrides(config, tmp_path):
    out = tmp_path / "r.json"
    assert main(["snr-sweep", "--config", config, "--format", "json", "--trials", "2",
                 "--recovery", "altmin", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["trials"] == 2 and doc["config"]["recovery"] == "altmin"
    assert all(s["trials"] == 2 for s in doc["summary"])


def test_exit_codes(config, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(CONFIG | {"trials": 0}))
    assert main(["snr-sweep", "--config", str(bad)]) == 2
    assert main(["snr-sweep", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["design", "--config", config, "--label", "RG"]) == 2
    assert main(["design", "--config", config, "--label", "MF", "--m", "6"]) == 2
    failed = tmp_path / "failed.json"
    failed.write_text(json.dumps(CONFIG | {"m": 6, "matrices": ["UC", "CD"]}))
    out = tmp_path / "r.csv"
    assert main(["snr-sweep", "--config", str(failed), "--out", str(out)]) == 3
    rows = {line.split(",")[0]: line.split(",") for line in out.read_text().splitlines()[1:]}
    assert rows["UC"][4] == "3" and rows["CD"][4] == "0"
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["snr-sweep", "--config", config, "--out", str(blocker / "x.csv")]) == 2
    assert "blocker" in capsys.readouterr().err


def test_verify_subcommand(tmp_path):
    out = tmp_path / "v.txt"
    assert main(["verify", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "phasedesign", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "snr-sweep" in res.stdout
