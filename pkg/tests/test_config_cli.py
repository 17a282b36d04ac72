import json

import pytest

from hyperwalk.cli import main
from hyperwalk.config import ExperimentConfig, _data_file
from hyperwalk.errors import ConfigError
from hyperwalk.pipeline import run_pipeline

SMALL = {"walk_steps": 300, "replicas": 40, "hitting_walks": 2000, "confine_walks": 300,
         "validate_depth": 6, "localdim_walks": 40, "localdim_steps": 100}


def small_config(**kw):
    base = dict(model="F2", steps="biased_m2.steps", seed=7, budgets=dict(SMALL),
                theta_grid={"lo": -1.0, "hi": 1.0, "step": 0.25},
                gibbs={"apexes": 30, "max_length": 5, "bound": 0.6},
                hitting={"n": [4, 5], "a": [0.5]}, confinement={"a": 0.2, "n_max": 7})
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_round_trip(tmp_path):
    cfg = small_config()
    cfg.save(tmp_path / "c.json")
    again = ExperimentConfig.load(tmp_path / "c.json")
    assert again == cfg and again.digest() == cfg.digest()


def test_invalid_configs(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig(budgets={"replicas": 0})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"modle": "F2"})
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "bad.json")


def test_missing_model_file_reports_path(tmp_path):
    cfg = small_config(model="no_such.model")
    with pytest.raises(ConfigError, match="no_such.model"):
        cfg.resolve_model()
    bundle = run_pipeline(cfg, tmp_path / "out", stages=("validate",))
    assert "no_such.model" in bundle.status["validate"]
    assert (tmp_path / "out" / "manifest.txt").exists()


def test_resolution(tmp_path):
    (tmp_path / "m.model").write_text(_data_file("F2.model").read_text())
    cfg = ExperimentConfig.from_dict({"model": "m.model", "steps": {"a": "1/4", "A": "1/4",
                                                                    "b": "1/4", "B": "1/4"}},
                                     base_dir=tmp_path)
    model = cfg.resolve_model()
    assert cfg.resolve_steps(model).prob("a") == 0.25


def test_packaged_configs_load():
    for name in ("uniform_f2.json", "biased_m2.json", "z2z3.json"):
        cfg = ExperimentConfig.load(_data_file(name))
        model = cfg.resolve_model()
        cfg.resolve_steps(model)
        cfg.resolve_automaton(model)


def test_pipeline_rerun_identical(tmp_path):
    cfg = small_config()
    a = run_pipeline(cfg, tmp_path / "a")
    b = run_pipeline(cfg, tmp_path / "b")
    assert a.ok, a.status
    csvs = [f for f in a.files if f.endswith(".csv")]
    assert {"beta.csv", "gibbs.csv", "hitting.csv", "confinement.csv"} <= set(csvs)
    for f in a.files:
        assert (a.out / f).read_bytes() == (b.out / f).read_bytes(), f
    manifest = (a.out / "manifest.txt").read_text()
    assert cfg.digest() in manifest and "seed 7" in manifest


def test_pipeline_generic_model(tmp_path):
    cfg = small_config(model="Z2xZ3_rewriting.model", steps="uniform",
                       budgets=dict(SMALL, horizon=10), confinement={"a": 0.2, "n_max": 5})
    bundle = run_pipeline(cfg, tmp_path, stages=("validate", "green", "thermo", "boundary"))
    assert bundle.ok, bundle.status
    assert "skipped" in json.loads((tmp_path / "boundary.json").read_text())


def test_cli_validate(capsys):
    assert main(["automaton", "validate", "--model", "Z2*Z3", "--depth", "6", "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] and out["path_counts"] == out["sphere_sizes"]


def test_cli_validate_defective(tmp_path, capsys):
    (tmp_path / "bad.aut").write_text("states * a A b B\ninitial *\n"
                                      "* a a\n* A A\n* b b\n* B B\n"
                                      "a a a\na B B\nA A A\nA b b\nA B B\n"
                                      "b a a\nb A A\nb b b\nB a a\nB A A\nB B B\n")
    assert main(["automaton", "validate", "--model", "F2", "--automaton",
                 str(tmp_path / "bad.aut"), "--depth", "4"]) == 1
    assert "missing" in capsys.readouterr().out


def test_cli_thermo(tmp_path, capsys):
    rc = main(["thermo", "spectrum", "--model", "F2", "--mu", "biased_m2.steps",
               "--grid", "0:1:0.25", "--out", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert rows[0] == "theta,beta,dbeta,alpha,f" and len(rows) == 6


def test_cli_walk_stats(capsys):
    rc = main(["walk", "stats", "--config", str(_data_file("biased_m2.json")), "--steps", "400",
               "--replicas", "50", "--json"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["verdict"] in ("strict", "equality-consistent")


def test_cli_confine_calibration_error(capsys, tmp_path):
    cfg = small_config()
    cfg.save(tmp_path / "c.json")
    rc = main(["experiment", "confine", "--config", str(tmp_path / "c.json"), "--slack", "-10"])
    assert rc == 2
    assert "slack" in capsys.readouterr().err


def test_cli_errors(capsys):
    assert main(["automaton", "validate", "--model", "missing.model"]) == 2
    assert "missing.model" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["thermo", "beta", "--grid", "1:2"])
