import json

import pytest

from nssinet.cli import COMMANDS, main


def _run(*argv):
    return main([str(a) for a in argv])


def test_cv_run_writes_outputs_and_manifest(tiny_config, tmp_path, capsys):
    out = tmp_path / "run"
    assert _run("cv", "--config", tiny_config, "--out", out) == 0
    for name in ("cv_report.json", "cv_folds.csv", "confusion.csv", "losses.csv"):
        assert (out / name).is_file()
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "ok" and m["command"] == "cv" and m["config"]["cv"]["k"] == 4
    assert m["artifacts"] == ["cv_report.json", "cv_folds.csv", "confusion.csv", "losses.csv"]
    assert str(out) in capsys.readouterr().out


def test_run_directory_is_immutable(tiny_config, tmp_path):
    out = tmp_path / "run"
    assert _run("synth", "--config", tiny_config, "--out", out) == 0
    assert _run("synth", "--config", tiny_config, "--out", out) == 2


def test_default_run_directory_from_env(tiny_config, tmp_path, monkeypatch):
    monkeypatch.setenv("NSSINET_OUT_ROOT", str(tmp_path / "root"))
    assert _run("synth", "--config", tiny_config) == 0
    (run,) = (tmp_path / "root").iterdir()
    assert run.name.startswith("synth-") and len(run.name) == len("synth-") + 12


def test_config_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train": {"epoch": 3}}))
    assert _run("cv", "--config", bad, "--out", tmp_path / "r") == 1
    assert "unknown key(s) in train: epoch" in capsys.readouterr().err
    bad.write_text(json.dumps({"cv": {"k": "ten"}}))
    assert _run("cv", "--config", bad, "--out", tmp_path / "r2") == 1
    assert "cv.k" in capsys.readouterr().err
    assert _run("cv", "--config", tmp_path / "missing.json") == 1
    bad.write_text("{not json")
    assert _run("cv", "--config", bad) == 1


def test_runtime_failure_exit_two_and_failed_manifest(tmp_path):
    cfg = tmp_path / "c.json"
    # 3 subjects per cell cannot fill k=20 folds
    cfg.write_text(json.dumps({"synth": {"n_per_cell": 3, "channels": 2, "rate": 64,
                                         "trials_per_subject": 1, "trial_seconds": 2.0,
                                         "class_effect": {"channels": [0]},
                                         "gender_effect": {"channels": [1]}},
                               "cv": {"k": 20}}))
    out = tmp_path / "r"
    assert _run("cv", "--config", cfg, "--out", out) == 2
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "failed" and "CohortError" in m["error"]


def test_report_without_manifest(tmp_path, capsys):
    assert _run("report", tmp_path) == 1
    assert "no manifest found" in capsys.readouterr().err


def test_report_bundle(tiny_config, tmp_path):
    out = tmp_path / "run"
    assert _run("channels", "--config", tiny_config, "--out", out) == 0
    assert _run("report", out) == 0
    summary = json.loads((out / "report" / "summary.json").read_text())
    assert summary["command"] == "channels" and len(summary["channels"]["ranking"]) == 2
    assert (out / "report" / "topo_all.svg").read_text().startswith("<svg")


def test_manifest_replays_run(tiny_config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("train", "--config", tiny_config, "--seed", 3, "--out", a) == 0
    assert _run("train", "--config", a / "manifest.json", "--out", b) == 0
    assert json.loads((b / "manifest.json").read_text())["seed"] == 3
    assert (a / "checkpoint.nssi").read_bytes() == (b / "checkpoint.nssi").read_bytes()
    assert (a / "losses.csv").read_text() == (b / "losses.csv").read_text()


def test_seed_changes_outputs(tiny_config, tmp_path):
    assert _run("train", "--config", tiny_config, "--seed", 1, "--out", tmp_path / "a") == 0
    assert _run("train", "--config", tiny_config, "--seed", 2, "--out", tmp_path / "b") == 0
    assert ((tmp_path / "a" / "checkpoint.nssi").read_bytes()
            != (tmp_path / "b" / "checkpoint.nssi").read_bytes())


def test_every_command_has_help():
    for name in COMMANDS:
        with pytest.raises(SystemExit) as e:
            main([name, "--help"])
        assert e.value.code == 0
