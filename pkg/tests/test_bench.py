"""Experiment config validation, artifact writing, and reproducibility."""

import os
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from hierbandit.bench import (ExperimentConfig, resolve_output_dir,
                              run_experiment, simulate_ledger,
                              write_ledger_csv)
from hierbandit.errors import ConfigError
from hierbandit.metrics import RegretLedger

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _minimal_raw(**overrides):
    raw = {
        "population": {"n_tasks": 4, "horizon": 8, "n_arms": 2, "dim": 3},
        "schedule": "concurrent",
        "algorithms": ["hier-ts"],
        "seeds": 2,
    }
    raw.update(overrides)
    return raw


def test_minimal_run_writes_all_artifacts(tmp_path):
    config = ExperimentConfig.from_dict(_minimal_raw(plots=True))
    paths = run_experiment(config, str(tmp_path))
    for key in ("ledger", "curves", "summary", "manifest"):
        assert os.path.exists(paths[key])
    svgs = sorted(tmp_path.glob("*.svg"))
    assert svgs
    for svg in svgs:
        root = ET.fromstring(svg.read_text())
        assert root.tag.endswith("svg")
    ledger_lines = Path(paths["ledger"]).read_text().splitlines()
    assert ledger_lines[0] == \
        "algorithm,seed,task_id,round,arm,reward,inst_regret"
    # 2 algorithms (hier-ts + auto oracle) x 2 seeds x 4 tasks x 8 rounds
    assert len(ledger_lines) == 1 + 2 * 2 * 4 * 8
    curve_lines = Path(paths["curves"]).read_text().splitlines()
    assert curve_lines[0] == "algorithm,view,index,mean,se"
    views = {line.split(",")[1] for line in curve_lines[1:]}
    assert views == {"per_round_concurrent", "per_task_sequential",
                     "mtr_per_round_concurrent", "mtr_per_task_sequential"}
    summary_lines = Path(paths["summary"]).read_text().splitlines()
    assert summary_lines[0].startswith("algorithm,cum_regret_mean")
    assert {line.split(",")[0] for line in summary_lines[1:]} == \
        {"hier-ts", "oracle-ts"}


def test_rerun_is_byte_identical(tmp_path):
    config = ExperimentConfig.from_dict(_minimal_raw())
    p1 = run_experiment(config, str(tmp_path / "a"))
    p2 = run_experiment(config, str(tmp_path / "b"))
    assert Path(p1["ledger"]).read_bytes() == Path(p2["ledger"]).read_bytes()
    assert Path(p1["curves"]).read_bytes() == Path(p2["curves"]).read_bytes()


def test_manifest_reproduces_run(tmp_path):
    config = ExperimentConfig.from_dict(_minimal_raw(seeds=[3, 9]))
    paths = run_experiment(config, str(tmp_path / "first"))
    reloaded = ExperimentConfig.from_file(paths["manifest"])
    assert reloaded.population == config.population
    assert reloaded.seeds == (3, 9)
    assert [a.name for a in reloaded.algorithms] == ["hier-ts"]
    again = run_experiment(reloaded, str(tmp_path / "second"))
    assert Path(paths["ledger"]).read_bytes() == \
        Path(again["ledger"]).read_bytes()


def test_unknown_keys_fatal(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(horizon=8))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(
            population={"n_tasks": 4, "horizon": 8, "n_arms": 2, "dim": 3,
                        "sigma2": 1.0}))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(
            algorithms=[{"name": "hier-ts", "extra": 1}]))
    manifest = tmp_path / "manifest.json"
    manifest.write_text('{"schema_version": 1, "package_version": "0",'
                        ' "config": {}, "seeds": [0, 1], "surprise": true}')
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(manifest))


def test_missing_required_keys():
    for key in ("population", "schedule", "algorithms", "seeds"):
        raw = _minimal_raw()
        del raw[key]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)


def test_seed_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(seeds=1))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(seeds=[5]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(seeds=[2, 2]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(seeds=True))
    assert ExperimentConfig.from_dict(_minimal_raw(seeds=3)).seeds == (0, 1, 2)
    assert ExperimentConfig.from_dict(
        _minimal_raw(seeds=[7, 2])).seeds == (7, 2)


def test_algorithm_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(algorithms=[]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(
            _minimal_raw(algorithms=["hier-ts", "hier-ts"]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(
            _minimal_raw(algorithms=[{"options": {}}]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(
            _minimal_raw(algorithms=[{"name": "hier-ts", "label": 3}]))
    config = ExperimentConfig.from_dict(_minimal_raw(algorithms=[
        {"name": "hier-ts-batch", "options": {"refresh_every": 2},
         "label": "batched"}]))
    assert config.algorithms[0].options_dict() == {"refresh_every": 2}
    assert config.algorithms[0].display == "batched"


def test_schedule_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(schedule="interleaved"))


def test_run_specs_appends_oracle():
    config = ExperimentConfig.from_dict(_minimal_raw())
    assert [a.name for a in config.run_specs()] == ["hier-ts", "oracle-ts"]
    config = ExperimentConfig.from_dict(
        _minimal_raw(algorithms=["oracle-ts", "hier-ts"]))
    assert [a.name for a in config.run_specs()] == ["oracle-ts", "hier-ts"]
    config = ExperimentConfig.from_dict(_minimal_raw(emit_mtr=False))
    assert [a.name for a in config.run_specs()] == ["hier-ts"]


def test_output_dir_precedence(monkeypatch):
    config = ExperimentConfig.from_dict(_minimal_raw(output_dir="cfg_dir"))
    monkeypatch.delenv("HIERBANDIT_OUT", raising=False)
    assert resolve_output_dir("explicit", config) == "explicit"
    assert resolve_output_dir(None, config) == "cfg_dir"
    monkeypatch.setenv("HIERBANDIT_OUT", "env_dir")
    assert resolve_output_dir(None, config) == "env_dir"
    assert resolve_output_dir("explicit", config) == "explicit"
    bare = ExperimentConfig.from_dict(_minimal_raw())
    monkeypatch.delenv("HIERBANDIT_OUT", raising=False)
    assert resolve_output_dir(None, bare) == "out"


def test_parallel_ledger_matches_serial():
    serial = ExperimentConfig.from_dict(_minimal_raw())
    parallel = ExperimentConfig.from_dict(_minimal_raw(parallelism=2))
    rows_a = list(simulate_ledger(serial).rows())
    rows_b = list(simulate_ledger(parallel).rows())
    assert rows_a == rows_b
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(_minimal_raw(parallelism=0))


def test_shipped_configs_parse():
    quick = ExperimentConfig.from_file(str(CONFIG_DIR / "quick_gaussian.yaml"))
    assert quick.seeds
    full = ExperimentConfig.from_file(
        str(CONFIG_DIR / "full_scale_gaussian.yaml"))
    pop = full.population_dict()
    assert (pop["n_tasks"], pop["horizon"], pop["n_arms"], pop["dim"]) == \
        (200, 200, 8, 15)
    assert len(full.seeds) >= 20


def test_ledger_csv_float_format(tmp_path):
    ledger = RegretLedger()
    ledger.add("alg", 0, 1, 2, 0, 0.1, 1.0 / 3.0)
    path = tmp_path / "ledger.csv"
    write_ledger_csv(ledger, str(path))
    line = path.read_text().splitlines()[1]
    assert line == "alg,0,1,2,0,0.10000000000000001,0.33333333333333331"
