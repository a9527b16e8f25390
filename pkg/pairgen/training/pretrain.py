"""Teacher-forced warm start of the report decoder on real pairs."""

import logging
import os
from dataclasses import dataclass

import click
import torch

from .. import constants
from ..artifacts import load_corpus, load_encoder
from ..command import echo_config, job, run_options
from ..data.manifest import iterate_batches
from ..exceptions import ConfigError, DataError
from ..models.decoder import DecoderConfig, ReportDecoder
from ..utils import append_jsonl, seed_everything
from .checkpoint import load_checkpoint, save_checkpoint

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

DECODER_FILE_NAME = "decoder.pt"


@dataclass(frozen=True)
class PretrainConfig:
    steps: int = 200
    lr: float = 1e-3
    batch_size: int = 32
    log_every: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("pretrain.steps must be non-negative")
        if self.lr <= 0:
            raise ConfigError("pretrain.lr must be positive")
        if self.batch_size < 1 or self.log_every < 1:
            raise ConfigError("pretrain.batch_size and pretrain.log_every must be at least 1")

    @classmethod
    def from_config(cls, cfg):
        values = cfg.section("pretrain")
        values["seed"] = cfg["run.seed"]
        return cls(**values)


class DecoderPretrainer(object):
    """Adam on ``ReportDecoder.teacher_forced_loss`` with a resumable step counter."""

    def __init__(self, decoder, config):
        self.decoder = decoder
        self.config = config
        self.optimizer = torch.optim.Adam(
            [p for p in decoder.parameters() if p.requires_grad], lr=config.lr
        )
        self.step = 0
        self.history = []

    def restore(self, archive):
        self.decoder.load_state_dict(archive["decoder"])
        if "optimizer" in archive:
            self.optimizer.load_state_dict(archive["optimizer"])
        self.step = int(archive["step"])
        self.history = list(archive.get("history", []))
        return self

    def archive(self, cfg=None):
        return {
            "decoder": self.decoder.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "step": self.step,
            "history": list(self.history),
            "config": cfg.to_dict() if cfg is not None else {},
        }

    def train_step(self, batch):
        self.decoder.train()
        loss = self.decoder.teacher_forced_loss(
            batch.images, batch.sentences, batch.sentence_counts, batch.word_counts
        )
        self.optimizer.zero_grad()
        loss.total.backward()
        self.optimizer.step()
        self.step += 1
        return loss

    def batches(self, samples):
        """Endless epochs in seeded order, skipping the batches a resumed run already used."""
        dc = self.decoder.config
        dtype = next(self.decoder.parameters()).dtype
        seen, epoch = 0, 0
        while True:
            for batch in iterate_batches(samples, self.config.batch_size,
                                         self.config.seed + epoch, dc.t_max, dc.l_max):
                if seen >= self.step:
                    yield batch.to(dtype)
                seen += 1
            epoch += 1

    def run(self, samples, out_dir=None):
        if self.config.steps and len(samples) < self.config.batch_size:
            raise DataError("dataset smaller than batch ({} < {})".format(
                len(samples), self.config.batch_size))
        batches = self.batches(samples)
        while self.step < self.config.steps:
            loss = self.train_step(next(batches))
            if self.step % self.config.log_every == 0:
                record = {
                    "step": self.step,
                    "total": float(loss.total.detach()),
                    "word": float(loss.word.detach()),
                    "stop": float(loss.stop.detach()),
                }
                self.history.append(record)
                logger.info(
                    "pretrain step {step} loss {total:.4f} (word {word:.4f} stop {stop:.4f})"
                    .format(**record)
                )
                if out_dir:
                    append_jsonl(
                        [{"step": self.step, "term": "teacher_forcing_" + k, "value": record[k]}
                         for k in ("total", "word", "stop")],
                        os.path.join(out_dir, constants.METRICS_LOG_FILE_NAME),
                    )
        return self


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    config = PretrainConfig.from_config(cfg)
    corpus = load_corpus(cfg)
    seed_everything(config.seed)

    encoder = load_encoder(cfg, corpus.class_count)
    decoder = ReportDecoder(
        DecoderConfig.from_config(cfg, corpus.vocab.size, encoder.config.feature_dim), encoder
    )
    pretrainer = DecoderPretrainer(decoder, config)
    if checkpoint:
        pretrainer.restore(load_checkpoint(checkpoint, "decoder"))
        logger.info("Resuming decoder pretraining at step {}".format(pretrainer.step))
    out_dir = echo_config(cfg)

    pretrainer.run(corpus.samples, out_dir)
    save_checkpoint(pretrainer.archive(cfg), os.path.join(out_dir, DECODER_FILE_NAME), "decoder")
