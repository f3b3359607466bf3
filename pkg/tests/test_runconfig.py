import logging
import os

import pytest
import yaml

from vlfas.runconfig import DATA_ROOT_ENV, ConfigError, RunConfig, apply_override


def minimal_config(synth_root=None, **data_extra):
    cfg = {
        "run": {"name": "t", "output_dir": "/tmp/out"},
        "data": {"protocol": 3, "source": "M", "target": "C"} | data_extra,
        "train": {"strategy": "IT"},
    }
    if synth_root:
        cfg["data"]["root"] = synth_root
    return cfg


def test_minimal_config_fills_defaults():
    cfg = RunConfig.from_dict(minimal_config())
    assert cfg.seeds == [0, 1, 2, 3, 4]
    assert cfg.data["train"]["iterations"] == 4000
    assert cfg.data["train"]["lr"] == 1e-6
    assert cfg.data["train"]["weight_decay"] == 1e-6
    assert cfg.data["train"]["loss_weights"] == {"alpha": 1.0, "beta": 1.0, "gamma": 1.0}
    assert cfg.data["eval"]["threshold_policy"] == "fixed"
    assert cfg.strategy == "IT"


def test_unknown_keys_rejected_with_paths():
    raw = minimal_config()
    raw["train"]["momentum"] = 0.9
    raw["bogus_section"] = {}
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(raw)
    message = str(err.value)
    assert "train.momentum: unknown field" in message
    assert "bogus_section: unknown field" in message


def test_missing_required_fields_reported():
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict({"run": {"name": "x"}})
    message = str(err.value)
    assert "run.output_dir: required" in message
    assert "data.protocol: required" in message
    assert "train.strategy: required" in message


def test_type_errors_reported():
    raw = minimal_config()
    raw["train"]["iterations"] = "many"
    raw["run"]["seeds"] = [1, "two"]
    with pytest.raises(ConfigError) as err:
        RunConfig.from_dict(raw)
    assert "train.iterations" in str(err.value)
    assert "run.seeds" in str(err.value)


def test_cross_checks():
    with pytest.raises(ConfigError, match="data.target"):
        RunConfig.from_dict({
            "run": {"name": "t", "output_dir": "/tmp"},
            "data": {"protocol": 1},
            "train": {"strategy": "V"},
        })
    with pytest.raises(ConfigError, match="unseen_attack"):
        RunConfig.from_dict({
            "run": {"name": "t", "output_dir": "/tmp"},
            "data": {"protocol": "unseen-spoof"},
            "train": {"strategy": "V"},
        })


def test_hash_stable_and_sensitive():
    a = RunConfig.from_dict(minimal_config())
    b = RunConfig.from_dict(minimal_config())
    assert a.hash() == b.hash()
    c = RunConfig.from_dict(minimal_config(), overrides=("train.lr=0.5",))
    assert c.hash() != a.hash()
    assert c.data["train"]["lr"] == 0.5
    assert c.overrides == ("train.lr=0.5",)


def test_override_parsing():
    raw = {"train": {}}
    dotted, value = apply_override(raw, "train.lr=1e-3")
    assert dotted == "train.lr" and value == 1e-3
    assert raw["train"]["lr"] == 1e-3
    with pytest.raises(ConfigError, match="form"):
        apply_override(raw, "train.lr")
    with pytest.raises(ConfigError, match="section and a field"):
        apply_override(raw, "lr=3")


def test_override_logged(caplog):
    with caplog.at_level(logging.INFO, logger="vlfas.runconfig"):
        RunConfig.from_dict(minimal_config(), overrides=("train.iterations=7",))
    assert any("config override" in rec.message for rec in caplog.records)


def test_load_from_yaml_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(minimal_config()))
    cfg = RunConfig.load(str(path))
    assert cfg.name == "t"
    with pytest.raises(ConfigError, match="not found"):
        RunConfig.load(str(tmp_path / "absent.yaml"))


def test_model_config_presets_and_overrides():
    cfg = RunConfig.from_dict(minimal_config())
    assert cfg.model_config().image_size == 224
    raw = minimal_config()
    raw["model"] = {"preset": "toy", "overrides": {"embed_dim": 24}}
    toy = RunConfig.from_dict(raw).model_config()
    assert toy.image_size == 32 and toy.embed_dim == 24
    raw["model"]["overrides"] = {"nonexistent_field": 3}
    with pytest.raises(ConfigError, match="model.overrides"):
        RunConfig.from_dict(raw).model_config()


def test_plan_mapping():
    raw = minimal_config()
    raw["data"]["shots"] = 5
    raw["train"] |= {
        "strategy": "mcl", "iterations": 12, "lr": 1e-4,
        "loss_weights": {"alpha": 1.0, "beta": 2.0, "gamma": 0.5},
        "augment": {"crop_scale": [0.8, 1.0]},
    }
    plan = RunConfig.from_dict(raw).plan(seed=3)
    assert plan.strategy == "MCL"
    assert plan.seed == 3
    assert plan.shots == 5
    assert plan.weights.beta == 2.0
    assert plan.augment.crop_scale == (0.8, 1.0)
    assert plan.augment.hflip_prob == 0.5  # untouched default


def test_protocol2_batch_default():
    raw = {
        "run": {"name": "t", "output_dir": "/tmp/out"},
        "data": {"protocol": 2, "target": "W"},
        "train": {"strategy": "MCL"},
    }
    assert RunConfig.from_dict(raw).data["train"]["per_domain_batch"] == 8
    raw["train"]["per_domain_batch"] = 4
    assert RunConfig.from_dict(raw).data["train"]["per_domain_batch"] == 4
    assert RunConfig.from_dict(minimal_config()).data["train"]["per_domain_batch"] == 3


def test_data_root_env_fallback(monkeypatch, synth_root):
    cfg = RunConfig.from_dict(minimal_config())
    monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
    with pytest.raises(ConfigError, match=DATA_ROOT_ENV):
        cfg.data_root()
    monkeypatch.setenv(DATA_ROOT_ENV, synth_root)
    assert cfg.data_root() == synth_root
    explicit = RunConfig.from_dict(minimal_config(synth_root="/explicit"))
    assert explicit.data_root() == "/explicit"


def test_build_split_integration(synth_root, synth_registry):
    cfg = RunConfig.from_dict(minimal_config(synth_root))
    split = cfg.build_split(synth_registry, seed=0)
    assert split.name == "M -> C"
    raw = minimal_config(synth_root)
    raw["data"] = {
        "root": synth_root, "protocol": 1, "target": "M",
        "supplementary": "CelebA-Spoof", "shots": 5,
    }
    split = RunConfig.from_dict(raw).build_split(synth_registry, seed=1)
    assert split.supplementary.name == "CelebA-Spoof"
    assert split.shots == 5


def test_snapshot_contains_hash_and_overrides(tmp_path):
    cfg = RunConfig.from_dict(minimal_config(), overrides=("train.lr=1e-3",))
    path = tmp_path / "snapshot.yaml"
    cfg.snapshot(str(path))
    text = path.read_text()
    assert f"# config_hash={cfg.hash()}" in text
    assert "# override train.lr=" in text
    reparsed = yaml.safe_load(text)
    assert reparsed["train"]["lr"] == 1e-3
