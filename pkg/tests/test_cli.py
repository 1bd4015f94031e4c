from __future__ import annotations

import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from nvaxy.cli import COMMANDS, main
from nvaxy.config import ConfigError, config_hash, load_config, validate

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
REGISTER = {
    "field_gauss": 600,
    "nuclei": [{"a_perp_khz": 45.8, "a_par_khz": 93.5}, {"a_perp_khz": 35.3, "a_par_khz": 49.5}],
}


def write(tmp_path: Path, config: dict, name: str = "cfg.yaml") -> Path:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(config))
    return path


def run(command: str, config: Path, out: Path, *extra: str) -> int:
    return main([command, "--config", str(config), "--out", str(out), *extra])


def digest(directory: Path) -> dict[str, str]:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_shipped_configs_validate():
    for path in CONFIGS.glob("*.yaml"):
        assert "register" in load_config(path)


def test_unknown_key_names_path():
    with pytest.raises(ConfigError, match="register/nuclei/0"):
        validate({"register": {"field_gauss": 600, "nuclei": [{"a_perp_khz": 1, "a_par_khz": 2, "bogus": 1}]}})


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_missing_register_is_config_error(tmp_path, capsys):
    assert run("solve-pulses", write(tmp_path, {"sequence": {"f_target": 0.5}}), tmp_path / "o") == 2
    assert "register" in capsys.readouterr().err


def test_wrong_type_is_config_error(tmp_path, capsys):
    cfg = {"register": {**REGISTER, "field_gauss": "strong"}}
    assert run("gate-scan", write(tmp_path, cfg), tmp_path / "o") == 2
    assert "register/field_gauss" in capsys.readouterr().err


def test_empty_scan_is_config_error(tmp_path):
    cfg = {"register": REGISTER, "sequence": {"n_min": 30, "n_max": 10}}
    assert run("gate-scan", write(tmp_path, cfg), tmp_path / "o") == 2


def test_missing_file_is_config_error(tmp_path):
    assert run("abundance", tmp_path / "nope.yaml", tmp_path / "o") == 2


def test_unreachable_coefficient_is_solver_error(tmp_path, capsys):
    cfg = {"register": REGISTER, "sequence": {"f_target": 1.2}}
    assert run("solve-pulses", write(tmp_path, cfg), tmp_path / "o") == 3
    assert "unreachable coefficient" in capsys.readouterr().err


def test_infeasible_target_is_solver_error(tmp_path):
    cfg = {"register": REGISTER, "sequence": {"target_fidelity": 0.9999999, "n_max": 10}}
    assert run("optimize-time", write(tmp_path, cfg), tmp_path / "o") == 3


def test_negative_seed_is_config_error(tmp_path):
    assert run("abundance", write(tmp_path, {"register": REGISTER}), tmp_path / "o", "--seed", "-1") == 2


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def test_solve_pulses_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("solve-pulses", CONFIGS / "solve_pulses.yaml", out) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "solve-pulses"
    assert manifest["config_sha256"] == config_hash(load_config(CONFIGS / "solve_pulses.yaml"))
    assert set(manifest["outputs"]) == {"schedule.csv", "schedule.json"}
    assert "timestamp" not in json.dumps(manifest)
    rows = list(csv.reader(open(out / "schedule.csv")))
    assert len(rows) > 1


def test_outputs_are_byte_identical(tmp_path):
    cfg = write(tmp_path, {"register": REGISTER, "sequence": {"n_min": 20, "n_max": 24}})
    assert run("gate-scan", cfg, tmp_path / "a") == 0
    assert run("gate-scan", cfg, tmp_path / "b", "--threads", "3") == 0
    a, b = digest(tmp_path / "a"), digest(tmp_path / "b")
    # the manifest records the thread count, everything else must match
    a.pop("manifest.json"), b.pop("manifest.json")
    assert a == b


def test_qec_ideal_without_errors(tmp_path):
    cfg = write(tmp_path, {"register": REGISTER, "qec": {"p": 0.0, "gates": "ideal"}})
    out = tmp_path / "o"
    assert run("qec", cfg, out) == 0
    report = json.loads((out / "qec_report.json").read_text())
    assert report["runs"][0]["average_fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_json_only_output(tmp_path):
    cfg = write(tmp_path, {"register": REGISTER, "abundance": {"thresholds_khz": [10, 20]},
                           "output": {"formats": ["json"]}})
    out = tmp_path / "o"
    assert run("abundance", cfg, out) == 0
    assert sorted(p.name for p in out.iterdir()) == ["abundance.json", "manifest.json"]


@pytest.mark.slow
@pytest.mark.parametrize("command,config", [
    ("filter", "analysis.yaml"), ("soft-control", "analysis.yaml"), ("abundance", "analysis.yaml"),
    ("optimize-time", "gate_scan.yaml"),
])
def test_shipped_commands_run(tmp_path, command, config):
    assert run(command, CONFIGS / config, tmp_path / "o") == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nvaxy", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in COMMANDS:
        assert name in proc.stdout


def test_internuclear_pairs_reach_register():
    from nvaxy.config import build_register

    cfg = validate({"register": {**REGISTER, "internuclear": [{"pair": [1, 0], "b_khz": 0.2}]}})
    reg = build_register(cfg)
    assert reg.internuclear_couplings == {(0, 1): pytest.approx(2e3 * 3.141592653589793 * 0.2)}
    with pytest.raises(ConfigError, match="register/internuclear/0"):
        validate({"register": {**REGISTER, "internuclear": [{"pair": [0, 1]}]}})
