import csv
import json
import shutil

import numpy as np
import pytest

from phasefilter.cli import EXIT_CONFIG, EXIT_HEALTH, EXIT_OK, main, reference_config_path
from phasefilter.config import ConfigError, apply_override, build, load, resolve


@pytest.fixture
def ref(tmp_path):
    path = tmp_path / "ref.json"
    shutil.copy(reference_config_path(), path)
    return path


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_verify_reference_passes(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "[FAIL]" not in out and out.count("[PASS]") >= 5
    summary = json.loads((tmp_path / "verify_summary.json").read_text())
    assert summary["all_passed"] is True


def test_simulate_is_byte_identical(ref, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", str(ref), "--out", str(a)]) == EXIT_OK
    assert main(["simulate", str(ref), "--out", str(b)]) == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    header, data = _read_csv(a / "trajectory.csv")
    assert header[:3] == ["t", "Y", "I"]
    assert data.shape[0] == 101  # stride 10 over 1000 steps
    summary = json.loads((a / "trajectory_summary.json").read_text())
    assert summary["seed"] == 20240601 and summary["command"] == "simulate"


def test_override_changes_the_run(ref, tmp_path):
    assert main(["simulate", str(ref), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["simulate", str(ref), "--set", "seed=5", "--out", str(tmp_path / "b")]) == EXIT_OK
    a = json.loads((tmp_path / "a" / "trajectory_summary.json").read_text())
    b = json.loads((tmp_path / "b" / "trajectory_summary.json").read_text())
    assert b["seed"] == 5 and a["final"]["I"] != b["final"]["I"]


def test_environment_output_directory(ref, tmp_path, monkeypatch):
    monkeypatch.setenv("PHASEFILTER_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["simulate", str(ref), "--set", "T=0.1"]) == EXIT_OK
    assert (tmp_path / "env" / "trajectory.csv").exists()


@pytest.mark.parametrize(
    "override",
    ["dt=-1", "scheme=heterodyne", "model.phase.type=unknown", "drive.5.re=1", "seed=\"abc\""],
)
def test_invalid_configs_exit_1(ref, tmp_path, override):
    assert main(["simulate", str(ref), "--set", override, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_config_exits_1(tmp_path):
    assert main(["simulate", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["simulate"]) == EXIT_CONFIG


def test_estimate_without_prior_exits_1(ref, tmp_path):
    doc = json.loads(ref.read_text())
    del doc["filter_initial_state"]
    ref.write_text(json.dumps(doc))
    assert main(["estimate", str(ref), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_health_failure_exits_2(ref, tmp_path):
    code = main(["simulate", str(ref), "--set", "integrator=euler", "--set", "dt=0.05", "--out", str(tmp_path)])
    assert code == EXIT_HEALTH
    assert "error" in json.loads((tmp_path / "health_report.json").read_text())


def test_gaussian_closed_form(ref, tmp_path):
    code = main([
        "gaussian", str(ref),
        "--set", 'gaussian={"V": 1.0, "k": 1.0}',
        "--set", "dt=0.0001",
        "--set", "output.stride=1000",
        "--out", str(tmp_path),
    ])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "gaussian_summary.json").read_text())
    assert abs(summary["final"]["V"] - 0.2) <= 1e-4


def test_estimate_and_ensemble(ref, tmp_path):
    assert main(["estimate", str(ref), "--out", str(tmp_path)]) == EXIT_OK
    header, _ = _read_csv(tmp_path / "estimate.csv")
    assert "truth_I" in header and "filter_I" in header
    assert main(["ensemble", str(ref), "--set", "ensemble_size=50", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "ensemble_summary.json").read_text())
    assert summary["M"] == 50 and summary["max_trace_distance"] < 0.2


def test_collapse_command(ref, tmp_path):
    code = main([
        "collapse", str(ref),
        "--set", "initial_state={\"type\": \"diagonal\", \"weights\": [0.3, 0.7]}",
        "--set", "T=8", "--set", "drive.0.t1=8", "--set", "ensemble_size=40",
        "--set", "output.stride=1000",
        "--out", str(tmp_path),
    ])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "collapse_summary.json").read_text())
    assert sum(summary["frequencies"]) + summary["unclassified"] / 40 == pytest.approx(1.0)


def test_override_helper():
    doc = {"a": [{"b": 1}]}
    apply_override(doc, "a.0.b=2.5")
    apply_override(doc, "c.d=text")
    assert doc == {"a": [{"b": 2.5}], "c": {"d": "text"}}
    with pytest.raises(ConfigError):
        apply_override(doc, "a.0.b.c=1")
    with pytest.raises(ConfigError):
        apply_override(doc, "novalue")


def test_defaults_and_build(ref):
    doc = load(ref)
    assert doc["integrator"] == "kraus" and doc["workers"] == 1
    built = build(doc)
    assert built.model.dim == 2
    assert np.allclose(built.filter_initial_state, np.eye(2) / 2)
    with pytest.raises(ConfigError):  # trace 2
        build(resolve(doc, ['initial_state={"re": [[1, 0], [0, 1]]}']))
