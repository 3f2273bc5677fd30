import json

import pytest

from valuespace import cli

SCN = """\
version: "1"
name: cli
agents:
  - {id: L, dim: 2}
  - {id: A, dim: 2}
  - {id: B, dim: 2}
beings:
  - id: x
    representations: {L: [1.0, 0.0]}
maps:
  - {from: L, to: A, matrix: [[1, 0], [0, 1]]}
  - {from: A, to: L, matrix: [[1, 0], [0, 1]]}
  - {from: L, to: B, matrix: [[0, 0], [0, 1]]}
graph:
  edges:
    - {from: L, to: A, p: 0.9}
    - {from: L, to: B, p: 0.9}
simulation: {being: x, origin: L, max_steps: 5, replicates: 4}
analyses:
  - name: val
    kind: valuation
    params: {being: x, source: L, target: A}
    expect: {val_target: 1.0, val_source: 2.0}
"""


@pytest.fixture
def scn(tmp_path):
    p = tmp_path / "s.scn"
    p.write_text(SCN)
    return p


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_validate_ok(scn, tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["validate", str(scn), "--out", str(out)]) == 0
    m = manifest(out)
    assert m["exit_status"] == 0 and m["scenario_hash"] and "manifest.json" in m["outputs"]


def test_invalid_scenario_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text(SCN.replace("p: 0.9}\n    - {from: L, to: B", "p: 0}\n    - {from: L, to: B"))
    out = tmp_path / "o"
    assert cli.main(["validate", str(bad), "--out", str(out)]) == 1
    assert "bad.scn:" in capsys.readouterr().err
    assert manifest(out)["exit_status"] == 1
    bad.write_text("agents: [\n")
    assert cli.main(["validate", str(bad), "--out", str(out)]) == 1


def test_runtime_failures_exit_2(scn, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["validate", str(tmp_path / "missing.scn"), "--out", str(out)]) == 2
    assert manifest(out)["scenario_hash"] is None
    assert cli.main(["leadership", str(scn), "--leader", "L", "--being", "nope", "--out", str(out)]) == 2
    assert cli.main(["report", str(scn), "--analysis", "nope", "--out", str(out)]) == 2
    assert cli.main(["frobnicate", str(scn)]) == 2


def test_out_env_var(scn, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["validate", str(scn)]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()
    assert cli.main(["validate", str(scn), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "manifest.json").exists()


def test_simulate_outputs(scn, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["simulate", str(scn), "--out", str(out), "--format", "csv", "--replicates", "2"]) == 0
    assert (out / "trace.csv").exists() and not (out / "trace.json").exists()
    m = manifest(out)
    assert m["seed"] == 0 and m["outputs"] == ["manifest.json", "trace.csv"]
    assert cli.main(["simulate", str(scn), "--seed", "-1", "--out", str(out)]) == 2


def test_leadership_output(scn, tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["leadership", str(scn), "--leader", "L", "--being", "x", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "A: in component" in text and "B: not in component" in text and "consistent" in text
    data = json.loads((out / "leadership.json").read_text())
    assert data["component"] == ["A", "L"] and data["adoption_counts"]["B"] == 0


def test_coherence_and_counterfactual(scn, tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["coherence", str(scn), "--pair", "L,A", "--eps", "0.01", "--k", "2", "--out", str(out)]) == 0
    assert json.loads((out / "coherence.json").read_text())["results"]["x"]["status"] == "HOLDS"
    assert cli.main(["coherence", str(scn), "--pair", "L,B", "--eps", "0.01", "--out", str(out)]) == 2
    assert cli.main(["counterfactual", str(scn), "--agents", "L,A", "--hypothetical", "1,2",
                     "--out", str(out)]) == 0
    assert json.loads((out / "counterfactual.json").read_text())["verdict"] == "PROPORTIONAL"


def test_report(scn, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["report", str(scn), "--analysis", "all", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    checks = {c["path"]: c["pass"] for c in rep["analyses"]["val"]["checks"]}
    assert checks == {"val_target": True, "val_source": False}
