import os

import pytest
import torch
from mock import Mock

from pairgen import constants
from pairgen.data.manifest import collate
from pairgen.exceptions import ConfigError, DataError, NumericalError
from pairgen.models.bundle import build_models
from pairgen.training.checkpoint import load_checkpoint
from pairgen.training.trainer import (
    TrainConfig,
    discriminator_step,
    generator_step,
    init_state,
    max_critic_singular_value,
    train,
)
from pairgen.utils import parameter_checksum, read_json, read_jsonl, state_checksum


@pytest.fixture
def config(tiny_cfg):
    return TrainConfig.from_config(tiny_cfg)


@pytest.fixture
def state(models, config):
    return init_state(models, config)


def fresh_state(tiny_cfg, vocab, config):
    torch.manual_seed(0)
    return init_state(build_models(tiny_cfg, 4, vocab.size), config)


@pytest.mark.parametrize(
    "key,value",
    [
        ("train.d_steps_per_g_step", 0),
        ("train.label_fraction", 0.0),
        ("train.alpha", -0.1),
        ("train.lr_generator", -1e-4),
        ("train.log_every", 0),
    ],
)
def test_invalid_train_config(tiny_cfg, key, value):
    with pytest.raises(ConfigError):
        TrainConfig.from_config(tiny_cfg.replace(**{key.replace(".", "__"): value}))


def test_zero_learning_rate_is_allowed(tiny_cfg):
    assert TrainConfig.from_config(tiny_cfg.replace(train__lr_generator=0.0)).lr_generator == 0.0


def test_discriminator_step_leaves_generator_side_alone(state, batch, config):
    generator_side = state_checksum(state.models.generator_side())
    critics = parameter_checksum(state.models.critics())
    discriminator_step(state, batch, config)
    assert state_checksum(state.models.generator_side()) == generator_side
    assert parameter_checksum(state.models.critics()) != critics
    assert state.d_step == 1 and state.g_step == 0


def test_generator_step_leaves_critics_alone(state, batch, config):
    generator = parameter_checksum([state.models.generator])
    decoder = parameter_checksum([state.models.decoder])
    encoder = parameter_checksum([state.models.decoder.encoder])
    critics = parameter_checksum(state.models.critics())
    generator_step(state, batch, config)
    assert parameter_checksum(state.models.critics()) == critics
    assert parameter_checksum([state.models.generator]) != generator
    assert parameter_checksum([state.models.decoder]) != decoder
    assert parameter_checksum([state.models.decoder.encoder]) == encoder
    assert state.g_step == 1
    assert all(p.requires_grad for p in state.models.critic_parameters())
    assert all(critic.training for critic in state.models.critics())


def test_train_runs_two_critic_steps_per_generator_step(tmpdir, state, samples, config):
    out_dir = str(tmpdir.join("run"))
    train(state, samples, config, out_dir)
    assert state.g_step == 2
    assert state.d_step == 4

    records = read_jsonl(os.path.join(out_dir, constants.METRICS_LOG_FILE_NAME))
    terms = {r["term"] for r in records if r["step"] == 2}
    assert {"d_image_real", "d_joint_fake", "rotation_ss", "g_image", "g_report"} <= terms
    assert "max_singular_value" in terms
    assert os.path.exists(os.path.join(out_dir, "checkpoints", "step-000002.pt"))
    archive = load_checkpoint(os.path.join(out_dir, "checkpoint.pt"), "train")
    assert archive["counters"] == {"g_step": 2, "d_step": 4}


def test_spectral_norms_stay_near_one(state, samples, config):
    train(state, samples, config)
    assert abs(max_critic_singular_value(state.models) - 1.0) < 0.05


def test_fid_monitor_is_called_at_snapshots(state, samples, config):
    monitor = Mock(return_value=12.5)
    train(state, samples, config, fid_monitor=monitor)
    assert monitor.call_count == 1
    monitor.assert_called_with(state.models.generator)
    assert state.history[-1]["fid"] == 12.5


def test_training_is_deterministic(tiny_cfg, vocab, samples, config):
    first = train(fresh_state(tiny_cfg, vocab, config), samples, config)
    second = train(fresh_state(tiny_cfg, vocab, config), samples, config)
    assert first.fingerprint() == second.fingerprint()


def test_resume_matches_uninterrupted_run(tmpdir, tiny_cfg, vocab, samples, config):
    straight = train(fresh_state(tiny_cfg, vocab, config), samples, config)

    out_dir = str(tmpdir.join("run"))
    half = TrainConfig.from_config(tiny_cfg.replace(train__total_g_steps=1,
                                                    train__checkpoint_every=1))
    train(fresh_state(tiny_cfg, vocab, half), samples, half, out_dir)
    resumed = init_state(build_models(tiny_cfg, 4, vocab.size), config)
    resumed.restore(load_checkpoint(os.path.join(out_dir, "checkpoint.pt"), "train"))
    assert (resumed.g_step, resumed.d_step) == (1, 2)
    train(resumed, samples, config)
    assert resumed.fingerprint() == straight.fingerprint()


def test_image_only_variant_leaves_report_critics_untouched(tiny_cfg, state, samples):
    config = TrainConfig.from_config(tiny_cfg.replace(train__variant="image_only"))
    report_side = parameter_checksum([state.models.d_report, state.models.d_joint,
                                      state.models.decoder])
    train(state, samples, config)
    assert parameter_checksum([state.models.d_report, state.models.d_joint,
                               state.models.decoder]) == report_side


def test_partial_labels(tiny_cfg, state, samples):
    config = TrainConfig.from_config(tiny_cfg.replace(train__label_fraction=0.25))
    assert train(state, samples, config).g_step == 2


def test_dataset_smaller_than_batch(state, samples, config):
    with pytest.raises(DataError, match="smaller than batch"):
        train(state, samples[:4], config)


def test_nan_halts_with_a_dump(tmpdir, state, samples, config):
    with torch.no_grad():
        state.models.generator.initial.module.bias.fill_(float("nan"))
    out_dir = str(tmpdir.join("run"))
    with pytest.raises(NumericalError):
        train(state, samples, config, out_dir)
    assert state.d_step == 0
    diagnostics = read_json(os.path.join(out_dir, "nan_diagnostics.json"))
    assert diagnostics["g_step"] == 0
    dump = load_checkpoint(os.path.join(out_dir, "nan_dump.pt"), "train")
    assert "d_image_fake" in dump["diagnostics"]


def test_float64_batch(models64, batch64, tiny_cfg):
    config = TrainConfig.from_config(tiny_cfg)
    state = init_state(models64, config)
    discriminator_step(state, batch64, config)
    generator_step(state, batch64, config)
    assert state.last_g_losses.g_image.dtype == torch.float64


def test_collated_batches_feed_the_critics(models, samples):
    batch = collate(samples[:4], 3, 6)
    assert models.d_report(batch.tokens, batch.token_lengths).shape == (4,)
