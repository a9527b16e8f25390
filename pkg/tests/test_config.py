import json

import pytest

from pairgen.config import DEFAULTS, RunConfig, load_config, parse_override
from pairgen.exceptions import ConfigError


def test_defaults():
    cfg = RunConfig()
    assert cfg["train.alpha"] == 0.2
    assert cfg["train.d_steps_per_g_step"] == 2
    assert cfg["train.lr_generator"] == 5e-5
    assert cfg["train.lr_discriminators"] == 2e-4
    assert len(cfg["run.id"]) == 12


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        RunConfig({"train.alpah": 0.3})


@pytest.mark.parametrize(
    "key,value",
    [
        ("train.total_g_steps", 1.5),
        ("train.total_g_steps", "ten"),
        ("train.alpha", "high"),
        ("train.rotation_on_real", "maybe"),
        ("experiment.seeds", 3),
        ("train.variant", "text_only"),
        ("eval.cider_variant", "x"),
    ],
)
def test_bad_values_are_rejected(key, value):
    with pytest.raises(ConfigError):
        RunConfig({key: value})


def test_values_are_coerced():
    cfg = RunConfig(
        {"train.alpha": 1, "train.total_g_steps": 4.0, "train.rotation_on_real": "false"}
    )
    assert isinstance(cfg["train.alpha"], float)
    assert cfg["train.total_g_steps"] == 4
    assert cfg["train.rotation_on_real"] is False


def test_parse_override():
    assert parse_override("train.alpha=0.5") == ("train.alpha", 0.5)
    assert parse_override("paths.data_dir=some/dir") == ("paths.data_dir", "some/dir")
    assert parse_override("experiment.seeds=[1, 2]") == ("experiment.seeds", [1, 2])
    with pytest.raises(ConfigError):
        parse_override("train.alpha")


def test_section_and_replace():
    cfg = RunConfig({"pretrain.steps": 7})
    assert cfg.section("pretrain")["steps"] == 7
    assert set(cfg.section("pretrain")) == {"steps", "lr", "batch_size", "log_every"}
    updated = cfg.replace(pretrain__steps=9)
    assert updated["pretrain.steps"] == 9
    assert cfg["pretrain.steps"] == 7


def test_fingerprint_ignores_run_id():
    a = RunConfig({"run.id": "a"})
    b = RunConfig({"run.id": "b"})
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != RunConfig({"run.seed": 1}).fingerprint()


def test_load_config_precedence(tmpdir):
    path = str(tmpdir.join("cfg.json"))
    with open(path, "w") as fout:
        json.dump({"train.alpha": 0.4, "run.seed": 3}, fout)
    cfg = load_config(path, ["train.alpha=0.6"], seed=5, out_dir="elsewhere")
    assert cfg["train.alpha"] == 0.6
    assert cfg["run.seed"] == 5
    assert cfg["paths.out_dir"] == "elsewhere"


def test_echo_replays_config(tmpdir):
    cfg = load_config(None, ["train.alpha=0.3", "experiment.seeds=[4]"])
    path = str(tmpdir.join("echo.json"))
    with open(path, "w") as fout:
        json.dump(cfg.to_dict(), fout)
    assert load_config(path).to_dict() == cfg.to_dict()


def test_load_config_errors(tmpdir):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmpdir.join("missing.json")))
    path = str(tmpdir.join("list.json"))
    with open(path, "w") as fout:
        fout.write("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(path)
    path = str(tmpdir.join("broken.json"))
    with open(path, "w") as fout:
        fout.write("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(path)


def test_every_default_round_trips():
    assert RunConfig(DEFAULTS).fingerprint() == RunConfig().fingerprint()
