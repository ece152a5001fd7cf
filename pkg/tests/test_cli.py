import csv
import json

import pytest
import yaml

from factorbt.cli import main
from factorbt.config import ConfigError, load_config, parse_config, validate

SMALL = {
    "synth": {"n_stocks": 60, "n_months": 100, "missing_rate": 0.02},
    "seed": 5,
    "apt_models": {
        "CAPM": {"factors": ["mkt_excess"], "window": 36},
        "FF3": {"factors": ["mkt_excess", "smb", "hml"], "window": 36},
    },
}


def write_config(path, cfg):
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    cfg = write_config(root / "cfg.yaml", SMALL)
    assert main(["run", str(cfg), "--out", str(root / "out")]) == 0
    return root / "out"


def test_bundle_contents(bundle):
    names = {p.name for p in bundle.iterdir()}
    assert {"factors.csv", "table1.csv", "quintiles.csv", "quintiles_fit.json", "run_manifest.json"} <= names
    assert "payoffs_CBM1.csv" in names and "payoffs_CBM14.csv" in names
    manifest = json.loads((bundle / "run_manifest.json").read_text())
    assert manifest["seed"] == 5 and set(manifest["files"]) == names
    assert "CAPM" in manifest["models"]


def test_table1_signs(bundle):
    with (bundle / "table1.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 14
    for row in rows:
        assert float(row["delta_BVTP"]) > 0 and float(row["delta_MV"]) < 0


def test_rerun_overwrites_previous_report(bundle, tmp_path):
    cfg = write_config(tmp_path / "cfg.yaml", SMALL)
    assert main(["run", str(cfg), "--out", str(bundle)]) == 0


def test_refuses_foreign_directory(tmp_path, capsys):
    out = tmp_path / "out"
    out.mkdir()
    (out / "notes.txt").write_text("keep me")
    cfg = write_config(tmp_path / "cfg.yaml", SMALL)
    assert main(["run", str(cfg), "--out", str(out)]) == 1
    assert (out / "notes.txt").read_text() == "keep me"
    assert "not empty" in capsys.readouterr().err
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".out-")] == []


def test_no_models_is_a_validation_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.yaml", {"synth": {}, "apt_models": {}, "cbm_models": {}})
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 1
    assert "no models configured" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_validate_warns_on_short_history(tmp_path, capsys):
    cfg = write_config(tmp_path / "cfg.yaml", {"synth": {"n_months": 50}})
    assert main(["validate", str(cfg)]) == 0
    err = capsys.readouterr().err
    assert "warning" in err and "insufficient history" in err


def test_validate_errors(tmp_path):
    cfg = parse_config(
        {"data": "nowhere", "apt_models": {"X": {"factors": ["beta"]}}, "cbm_models": {"Y": {"characteristics": ["PE"]}}},
        tmp_path,
    )
    msgs = " | ".join(d.message for d in validate(cfg) if d.level == "error")
    assert "data directory not found" in msgs
    assert "unknown factor 'beta'" in msgs and "unknown characteristic 'PE'" in msgs


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown configuration keys"):
        parse_config({"synth": {}, "modles": {}})


def test_bad_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("a: [1,", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(p)
    assert main(["validate", str(p)]) == 2


def test_stage_error_reported(tmp_path, capsys):
    cfg = write_config(
        tmp_path / "cfg.yaml",
        {"synth": {"n_stocks": 30, "n_months": 12}, "apt_models": {"FF3": {"factors": ["mkt_excess"], "window": 12}}, "cbm_models": {}},
    )
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 1
    assert "stage 'backtest' failed" in capsys.readouterr().err


def test_synth_then_run_from_csv(tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(yaml.safe_dump({"n_stocks": 40, "n_months": 90, "seed": 2}), encoding="utf-8")
    assert main(["synth", str(spec), "--out", str(tmp_path / "data")]) == 0
    assert (tmp_path / "data" / "ground_truth.json").exists()
    cfg = write_config(
        tmp_path / "cfg.yaml",
        {"data": "data", "cbm_models": {"CBM1": {"characteristics": ["BTP", "MV"]}}, "apt_models": {}, "table1": False},
    )
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "payoffs_CBM1.csv").exists()


def test_valid_config_has_no_diagnostics():
    assert validate(parse_config({"synth": {}})) == []


def test_manifest_reproduces_run(bundle, tmp_path):
    manifest = json.loads((bundle / "run_manifest.json").read_text())
    cfg = write_config(tmp_path / "again.yaml", manifest["config"])
    assert main(["run", str(cfg), "--out", str(tmp_path / "again")]) == 0
    for p in bundle.iterdir():
        assert (tmp_path / "again" / p.name).read_bytes() == p.read_bytes()
