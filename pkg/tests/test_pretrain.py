import os

import pytest
import torch

from pairgen import constants
from pairgen.exceptions import ConfigError, DataError
from pairgen.models.bundle import build_encoder
from pairgen.models.decoder import DecoderConfig, ReportDecoder
from pairgen.training.checkpoint import load_checkpoint, save_checkpoint, state_fingerprint
from pairgen.training.pretrain import DecoderPretrainer, PretrainConfig
from pairgen.utils import read_jsonl


def make_decoder(tiny_cfg, vocab):
    torch.manual_seed(0)
    encoder = build_encoder(tiny_cfg, 4)
    return ReportDecoder(DecoderConfig.from_config(tiny_cfg, vocab.size, 16), encoder)


@pytest.fixture
def config(tiny_cfg):
    return PretrainConfig.from_config(tiny_cfg)


def test_config(tiny_cfg, config):
    assert config == PretrainConfig(steps=2, lr=1e-3, batch_size=8, log_every=1, seed=0)
    with pytest.raises(ConfigError):
        PretrainConfig.from_config(tiny_cfg.replace(pretrain__lr=0.0))
    with pytest.raises(ConfigError):
        PretrainConfig(steps=-1)


def test_run_logs_teacher_forcing_terms(tmpdir, tiny_cfg, vocab, samples, config):
    out_dir = str(tmpdir)
    pretrainer = DecoderPretrainer(make_decoder(tiny_cfg, vocab), config).run(samples, out_dir)
    assert pretrainer.step == 2
    assert [r["step"] for r in pretrainer.history] == [1, 2]
    records = read_jsonl(os.path.join(out_dir, constants.METRICS_LOG_FILE_NAME))
    assert {r["term"] for r in records} == {
        "teacher_forcing_total", "teacher_forcing_word", "teacher_forcing_stop",
    }


def test_loss_goes_down(tiny_cfg, vocab, samples):
    config = PretrainConfig(steps=40, lr=3e-3, batch_size=8, log_every=1)
    history = DecoderPretrainer(make_decoder(tiny_cfg, vocab), config).run(samples).history
    first = sum(r["total"] for r in history[:5]) / 5
    last = sum(r["total"] for r in history[-5:]) / 5
    assert last < first


def test_resume_matches_uninterrupted_run(tmpdir, tiny_cfg, vocab, samples, config):
    straight = DecoderPretrainer(make_decoder(tiny_cfg, vocab), config).run(samples)

    path = str(tmpdir.join("decoder.pt"))
    half = PretrainConfig(steps=1, lr=config.lr, batch_size=config.batch_size, log_every=1)
    first = DecoderPretrainer(make_decoder(tiny_cfg, vocab), half).run(samples)
    save_checkpoint(first.archive(tiny_cfg), path, "decoder")

    resumed = DecoderPretrainer(make_decoder(tiny_cfg, vocab), config)
    resumed.restore(load_checkpoint(path, "decoder")).run(samples)
    assert resumed.step == 2
    assert state_fingerprint(resumed.decoder.state_dict()) == \
        state_fingerprint(straight.decoder.state_dict())


def test_dataset_smaller_than_batch(tiny_cfg, vocab, samples, config):
    with pytest.raises(DataError):
        DecoderPretrainer(make_decoder(tiny_cfg, vocab), config).run(samples[:3])


def test_zero_steps_accepts_any_dataset(tiny_cfg, vocab, samples):
    config = PretrainConfig(steps=0)
    assert DecoderPretrainer(make_decoder(tiny_cfg, vocab), config).run(samples[:3]).step == 0
