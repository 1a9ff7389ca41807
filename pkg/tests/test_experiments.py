import json

import pytest
import yaml

from pulsesync import cli
from pulsesync import experiments as E


def test_catalog_covers_every_criterion():
    cat = E.list_scenarios()
    assert len(cat) >= 10
    assert sorted(s["criterion"] for s in cat if s["criterion"] is not None) == list(range(1, 14))


def test_spec_hash_and_yaml_round_trip(tmp_path):
    spec = E.ExperimentSpec("theorem-tree-51d", seeds=3, params={"x": 1})
    p = tmp_path / "s.yaml"
    p.write_text(spec.dump())
    again = E.ExperimentSpec.load(p)
    assert again.hash() == spec.hash()
    assert E.ExperimentSpec("theorem-tree-51d", seeds=4, params={"x": 1}).hash() != spec.hash()


def test_bad_specs_rejected(tmp_path):
    with pytest.raises(ValueError):
        E.ExperimentSpec.from_dict({"seeds": 3})
    with pytest.raises(ValueError):
        E.ExperimentSpec.from_dict({"scenario": "x", "colour": 1})
    with pytest.raises(E.UnknownScenario):
        E.run_scenario("no-such-scenario")


def test_reports_are_reproducible(tmp_path):
    a = E.run_scenario("theorem-tree-51d", seeds=5, out_dir=tmp_path / "a")
    E.case_tree_4c.cache_clear()
    b = E.run_scenario("theorem-tree-51d", seeds=5, out_dir=tmp_path / "b")
    assert a == b and a["passed"]
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        E.run_scenario("kn-periodic-companion", out_dir=blocker / "sub")


def test_zero_budget_gives_partial_report():
    rep = E.verify_all(budget=0)
    assert rep["results"] == [] and not rep["complete"] and not rep["passed"]
    assert len(rep["skipped"]) == 13


def test_worker_env(monkeypatch):
    monkeypatch.setenv(E.WORKERS_ENV, "3")
    assert E.worker_count() == 3
    assert E.fan_out(lambda x: x * x, range(5)) == [0, 1, 4, 9, 16]


def test_frames_written(tmp_path):
    spec = {"scenario": "figure1-torus", "seeds": 3, "params": {"side": 6, "sizes": [4, 5, 6]},
            "out": str(tmp_path / "fig")}
    (tmp_path / "f.yaml").write_text(yaml.safe_dump(spec))
    code = cli.main(["run", str(tmp_path / "f.yaml")])
    rep = json.loads((tmp_path / "fig" / "report.json").read_text())
    assert rep["result"]["frames"]["synchronized"]
    pgm = sorted((tmp_path / "fig" / "frames").glob("*.pgm"))
    assert len(pgm) == rep["result"]["frames"]["frames"]
    assert pgm[0].read_text().startswith("P2\n6 6\n63\n")
    assert code == (0 if rep["passed"] else 1)


def test_cli_verbs(tmp_path, capsys):
    assert cli.main(["list"]) == 0
    assert "theorem-tree-51d" in capsys.readouterr().out
    assert cli.main(["scenario", "kn-periodic-companion", "--out", str(tmp_path)]) == 0
    assert cli.main(["scenario", "kn-periodic"]) == 1
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["frames", "--side", "5", "--out", str(tmp_path / "fr"), "--format", "csv"]) == 0
    assert any((tmp_path / "fr").glob("*.csv"))
    assert cli.main(["verify", "--budget", "0"]) == 1
    assert "SKIP" in capsys.readouterr().out
