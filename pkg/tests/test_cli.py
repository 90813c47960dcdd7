import json
import shutil

import pytest
from click.testing import CliRunner

from qnizk.cli import RunConfig, cli, make_config, trial_seeds, wilson
from qnizk.protocol import FIXTURE_DIR


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args, **kw):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False, **kw)


def last_json(output):
    return json.loads(output.strip().splitlines()[-1])


def test_reduce_reports(runner, tmp_path):
    out = tmp_path / "h.json"
    res = invoke(runner, "reduce", "--circuit", "toy", "--out", out)
    assert res.exit_code == 0
    rep = last_json(res.stdout)
    assert rep["schema_version"] == 1 and rep["min_eigenvalue"] <= 1e-9 and rep["verdict"] == "ok"
    assert json.loads(out.read_text())["terms"]
    rej = last_json(invoke(runner, "reduce", "--circuit", "reject").stdout)
    assert rej["min_eigenvalue"] > 1e-3 and rej["verdict"] == "ok"
    skipped = last_json(invoke(runner, "reduce", "--circuit", "xor", "--max-qubits", 3).stdout)
    assert skipped["verdict"] == "skipped" and skipped["min_eigenvalue"] is None


def test_reduce_input_errors(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_instance": 0, "c_witness": 1, "m_ancilla": 1,
                               "gates": [{"kind": "T", "targets": [0, 1]}]}))
    res = invoke(runner, "reduce", "--circuit", bad)
    assert res.exit_code == 2 and "gates[0].kind" in res.stderr
    assert invoke(runner, "reduce", "--circuit", tmp_path / "missing.json").exit_code == 2
    (tmp_path / "junk.json").write_text("{not json")
    assert invoke(runner, "reduce", "--circuit", tmp_path / "junk.json").exit_code == 2
    assert invoke(runner, "reduce", "--circuit", "xor", "--instance", "01").exit_code == 2


def test_run_and_replay(runner, tmp_path):
    out = tmp_path / "t.json"
    res = invoke(runner, "run", "--mode", "honest", "--circuit", "xor", "--seed", 42, "--out", out)
    assert res.exit_code == 0 and last_json(res.stdout)["decision"] == 1
    again = invoke(runner, "run", "--replay", out)
    assert again.exit_code == 0 and last_json(again.stdout)["identical"] is True
    tampered = tmp_path / "t2.json"
    tampered.write_text(out.read_text().replace('"decision":1', '"decision":0', 1))
    assert invoke(runner, "run", "--replay", tampered).exit_code == 3
    assert invoke(runner, "run", "--replay", tmp_path / "nope.json").exit_code == 2


def test_run_modes(runner, tmp_path):
    assert invoke(runner, "run", "--mode", "adversary:A1", "--circuit", "toy", "--parallel-k", 8,
                  "--seed", 1).exit_code in (0, 1)
    sim = invoke(runner, "run", "--mode", "zk-sim", "--circuit", "xor", "--seed", 5, "--out", tmp_path / "s.json")
    assert sim.exit_code == 0
    assert invoke(runner, "run", "--replay", tmp_path / "s.json").exit_code == 0
    ext = invoke(runner, "run", "--mode", "extract-aoqk", "--circuit", "xor", "--seed", 3)
    assert ext.exit_code == 0 and "witness extracted" in ext.stderr
    assert invoke(runner, "run", "--mode", "extract-poqk", "--circuit", "toy", "--seed", 3).exit_code == 0


def test_run_input_errors(runner):
    assert invoke(runner, "run", "--mode", "honest").exit_code == 2  # no seed
    assert invoke(runner, "run", "--mode", "bogus", "--seed", 1).exit_code == 2
    assert invoke(runner, "run", "--mode", "adversary:A9", "--seed", 1).exit_code == 2
    assert invoke(runner, "run", "--steane-level", 3, "--seed", 1).exit_code == 2
    assert invoke(runner, "run", "--witness", "2", "--seed", 1).exit_code == 2
    assert invoke(runner, "run", "--parallel-k", 0, "--seed", 1).exit_code == 2


def test_stats_is_deterministic_across_jobs(runner, tmp_path):
    args = ["stats", "--mode", "honest", "--circuit", "xor", "--seed", 7, "--trials", 40]
    one = invoke(runner, *args, "--jobs", 1)
    two = invoke(runner, *args, "--jobs", 2)
    assert one.exit_code == two.exit_code == 0
    assert one.stdout == two.stdout
    rep = last_json(one.stdout)
    assert rep["acceptance_rate"] == 1.0 and rep["trials"] == 40
    assert sum(row["count"] for row in rep["per_challenge"]) == 40
    out = tmp_path / "s.jsonl"
    invoke(runner, *args, "--out", out)
    invoke(runner, *args, "--out", out)
    assert len(out.read_text().splitlines()) == 2
    assert invoke(runner, "stats", "--seed", 1, "--trials", 0).exit_code == 2


def test_stats_extraction_report(runner):
    res = invoke(runner, "stats", "--mode", "extract-aoqk", "--circuit", "toy", "--seed", 2, "--trials", 10)
    ext = last_json(res.stdout)["extraction"]
    assert ext["bot"] == 0 and ext["mean_energy"] <= 0.01 and ext["energy_histogram"]


def test_fixture_directory_override(runner, tmp_path, monkeypatch):
    shutil.copy(FIXTURE_DIR / "toy.json", tmp_path / "mine.json")
    monkeypatch.setenv("QNIZK_FIXTURES", str(tmp_path))
    assert invoke(runner, "reduce", "--circuit", "mine").exit_code == 0
    assert invoke(runner, "reduce", "--circuit", "xor").exit_code == 2


def test_config_round_trip():
    cfg = make_config("honest", "xor", None, None, 1, 2, 1, 9, "honest")
    assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_helpers():
    assert trial_seeds(5, 3) == trial_seeds(5, 3) and len(set(trial_seeds(5, 100))) == 100
    lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi
    assert wilson(100, 100)[1] == pytest.approx(1)
