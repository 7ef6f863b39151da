"""Golden inputs are produced by the simulator CLI, exercising only its
documented external interfaces (CSV/JSON schema and eye matrix files)."""
import subprocess
import sys

import pytest
import yaml

_BASE = {
    "baud_gbd": 64.0,
    "symbols": 10000,
    "bandwidths": {"interconnect_3db_hz": float("inf")},
    "vcsel": {"rin_db_per_hz": -float("inf")},
    "adc": {"snr_db": 30.0},
    "dsp": {"train_symbols": 4000, "guard_symbols": 512},
}


def _cli(*args):
    res = subprocess.run([sys.executable, "-m", "vcsellink.cli", *args],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res.stdout


@pytest.fixture(scope="session")
def golden_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("golden")
    spec = d / "sweep.yaml"
    spec.write_text(yaml.safe_dump({
        "base": _BASE,
        "axes": [{"path": "baud_gbd", "values": [64.0, 72.0]},
                 {"path": "oma_dbm", "values": [0.0, 1.0]}],
        "base_seed": 11,
    }))
    _cli("sweep", str(spec), "--out", str(d / "sweep.csv"))
    _cli("sweep", str(spec), "--format", "json", "--out", str(d / "sweep.json"))

    cfg = d / "cfg.yaml"
    cfg.write_text(yaml.safe_dump(_BASE))
    _cli("eye", "--config", str(cfg), "--out", str(d / "eye.csv"))
    return d


@pytest.fixture(scope="session")
def golden_csv(golden_dir):
    return str(golden_dir / "sweep.csv")


@pytest.fixture(scope="session")
def golden_json(golden_dir):
    return str(golden_dir / "sweep.json")


@pytest.fixture(scope="session")
def golden_eye(golden_dir):
    return str(golden_dir / "eye.csv")
