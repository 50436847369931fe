"""Experiment config validation and report serialization."""

import json

import pytest

from axmae.config import (
    ConfigError,
    ExperimentConfig,
    RunReport,
    environment_fingerprint,
    experiment_config_from_dict,
    load_experiment_config,
)


def valid_config(**overrides):
    base = dict(synth={"n_nodes": 4, "n_steps": 480})
    base.update(overrides)
    return ExperimentConfig(**base)


def test_valid_config_passes():
    valid_config().validate()


def test_validation_collects_every_violation():
    cfg = valid_config(dataset_path="x.bin", t_long=50, t_short=10,
                       mask_ratio=0.0, ablation="both", heads=5,
                       pretrain_epochs=0, zero_threshold=-1.0)
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    problems = err.value.problems
    assert len(problems) >= 8
    text = "; ".join(problems)
    for fragment in ("exactly one", "divisible", "t_short", "mask_ratio",
                     "ablation", "heads", "pretrain_epochs", "zero_threshold"):
        assert fragment in text, fragment


def test_dilations_must_sum_with_t_short():
    with pytest.raises(ConfigError, match="dilations"):
        valid_config(dilations=(1, 2, 4)).validate()


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="bogus"):
        experiment_config_from_dict({"synth": {"n_nodes": 4}, "bogus": 1})


def test_to_dict_round_trips():
    cfg = valid_config(embed_dim=8, heads=2, seed=7)
    again = experiment_config_from_dict(cfg.to_dict())
    assert again == cfg


def test_load_rejects_missing_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_experiment_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_experiment_config(arr)


def test_load_validates_content(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"synth": {"n_nodes": 4}, "mask_ratio": 1.0}))
    with pytest.raises(ConfigError, match="mask_ratio"):
        load_experiment_config(path)


def test_run_report_save_is_sorted_json(tmp_path):
    report = RunReport(phase="train", config={"seed": 0})
    report.artifacts["b"] = "2"
    report.artifacts["a"] = "1"
    path = tmp_path / "report.json"
    report.save(path)
    text = path.read_text()
    assert text.endswith("\n")
    doc = json.loads(text)
    assert doc["phase"] == "train"
    assert text.index('"a"') < text.index('"b"')
    assert set(doc["environment"]) == {"python", "numpy", "platform"}


def test_environment_fingerprint_fields():
    env = environment_fingerprint()
    assert env["numpy"][0].isdigit() and env["python"][0].isdigit()
