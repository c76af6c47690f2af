"""Command-line interface: exit codes, outputs, overrides."""

import json

import numpy as np
import pytest

from conftest import tiny_snapshot_doc, tiny_trajectory_doc
from fluidsr.cli import main
from fluidsr.fldio import read_manifest, write_field


def _write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_verify_props(tmp_path, capsys):
    assert main(["verify-props", "--grid", "3",
                 "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "max kl discrepancy" in out
    assert "max transport-bound ratio" in out
    lines = (tmp_path / "propositions.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 3
    assert main(["verify-props", "--grid", "0"]) == 2


def test_evaluate_command(tmp_path, capsys):
    rng = np.random.default_rng(0)
    pred = tmp_path / "pred.fld"
    ref = tmp_path / "ref.fld"
    write_field(pred, rng.standard_normal((4, 8, 8)))
    write_field(ref, rng.standard_normal((4, 8, 8)))
    out = tmp_path / "report"
    assert main(["evaluate", "--pred", str(pred), "--ref", str(ref),
                 "--label", "model", "--out", str(out)]) == 0
    tables = json.loads(capsys.readouterr().out)
    assert set(tables) == {"model"}
    assert (out / "report.json").exists()

    assert main(["evaluate", "--pred", str(tmp_path / "nope.fld"),
                 "--ref", str(ref)]) == 2
    assert "config error" in capsys.readouterr().err
    bad = tmp_path / "bad.fld"
    write_field(bad, rng.standard_normal((3, 8, 8)))
    assert main(["evaluate", "--pred", str(bad), "--ref", str(ref)]) == 2


def test_config_errors(tmp_path, capsys):
    assert main(["run-snapshot", "--config",
                 str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["run-snapshot", "--config", str(bad)]) == 2
    unknown = _write_config(tmp_path, {"out_dir": "x", "turbo": 1},
                            "unknown.json")
    assert main(["run-snapshot", "--config", unknown]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "turbo" in err


def test_stage_commands_and_overrides(tmp_path, capsys):
    doc = tiny_snapshot_doc(tmp_path / "ignored")
    cfg_path = _write_config(tmp_path, doc)
    out = tmp_path / "run"
    assert main(["gen-data", "--config", cfg_path,
                 "--out", str(out), "--seed", "5"]) == 0
    assert (out / "markers" / "data.json").exists()
    written = read_manifest(out / "config.json")
    assert written["seed"] == 5 and written["out_dir"] == str(out)
    import time
    start = time.perf_counter()
    assert main(["gen-data", "--config", cfg_path,
                 "--out", str(out), "--seed", "5"]) == 0
    assert time.perf_counter() - start < 1.0
    capsys.readouterr()
    assert main(["train-fno", "--config", cfg_path,
                 "--out", str(out), "--seed", "5"]) == 2
    assert "not part of this pipeline" in capsys.readouterr().err


def test_run_snapshot(tmp_path, capsys):
    doc = tiny_snapshot_doc(tmp_path / "run")
    del doc["baselines"]
    cfg_path = _write_config(tmp_path, doc)
    assert main(["run-snapshot", "--config", cfg_path, "--dry-run"]) == 0
    out_text = capsys.readouterr().out
    assert "stage data" in out_text and "pending" in out_text
    assert not (tmp_path / "run").exists()

    assert main(["run-snapshot", "--config", cfg_path, "--baselines"]) == 0
    out_text = capsys.readouterr().out
    assert "report written to" in out_text
    for method in ("lflr", "eddib", "ot", "sdedit", "sr", "bicubic"):
        assert f"\n  {method}" in out_text
    assert (tmp_path / "run" / "report" / "metrics.csv").exists()


def test_run_trajectory(tmp_path, capsys):
    doc = tiny_trajectory_doc(tmp_path / "run")
    cfg_path = _write_config(tmp_path, doc)
    assert main(["run-trajectory", "--config", cfg_path]) == 0
    out_text = capsys.readouterr().out
    assert "predicted" in out_text and "bicubic" in out_text
    assert (tmp_path / "run" / "report" / "per_snapshot.csv").exists()
    assert main(["run-snapshot", "--config", cfg_path, "--resume"]) == 2


def test_stage_failure_exit_code(tmp_path, capsys):
    doc = tiny_snapshot_doc(tmp_path / "run")
    doc["cascade_train"] = dict(doc["cascade_train"], batch_size=64)
    cfg_path = _write_config(tmp_path, doc)
    assert main(["run-snapshot", "--config", cfg_path]) == 3
    assert "stage failure: stage cascade" in capsys.readouterr().err
    assert (tmp_path / "run" / "failure.json").exists()
