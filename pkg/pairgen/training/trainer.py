"""Adversarial training of the generator and report decoder against three critics.

Each generator step is preceded by ``d_steps_per_g_step`` critic steps, every
step on a fresh real batch. Critic steps never touch generator-side
parameters and generator steps never touch critic parameters.
"""

import itertools
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import click
import torch

from .. import constants
from ..artifacts import (
    encoder_config_dict,
    load_classifier,
    load_corpus,
    load_decoder_weights,
    load_encoder,
)
from ..command import echo_config, job, run_options
from ..config import CHOICES
from ..data.manifest import iterate_batches, stack_images, stratified_label_mask
from ..evaluation.fid import FidMonitor
from ..exceptions import ConfigError, DataError, NumericalError
from ..models.bundle import build_models, preserved_buffers, set_requires_grad
from ..models.spectral import spectral_modules
from ..utils import append_jsonl, ensure_dir, seed_everything, torch_generator, write_json
from .checkpoint import load_checkpoint, save_checkpoint, state_fingerprint
from .losses import discriminator_losses, generator_losses, sample_fakes

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr_generator: float = 5e-5
    lr_discriminators: float = 2e-4
    beta1: float = 0.0
    beta2: float = 0.999
    batch_size: int = 64
    d_steps_per_g_step: int = 2
    total_g_steps: int = 2000
    alpha: float = 0.2
    label_fraction: float = 1.0
    seed: int = 0
    rotation_on_real: bool = True
    rotation_on_fake: bool = True
    weight_image: float = 1.0
    weight_report: float = 1.0
    weight_joint: float = 1.0
    lambda_teacher_forcing: float = 0.0
    variant: str = "full"
    log_every: int = 50
    checkpoint_every: int = 500
    fid_count: int = 256

    def __post_init__(self):
        if self.lr_generator < 0 or self.lr_discriminators < 0:
            raise ConfigError("learning rates must be non-negative")
        if self.d_steps_per_g_step < 1:
            raise ConfigError("d_steps_per_g_step must be at least 1")
        if not 0.0 < self.label_fraction <= 1.0:
            raise ConfigError("label_fraction must lie in (0, 1]")
        if self.batch_size < 1 or self.total_g_steps < 0:
            raise ConfigError("batch_size must be positive and total_g_steps non-negative")
        if self.log_every < 1 or self.checkpoint_every < 1:
            raise ConfigError("log_every and checkpoint_every must be at least 1")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.variant not in CHOICES["train.variant"]:
            raise ConfigError("unknown variant {!r}".format(self.variant))

    @classmethod
    def from_config(cls, cfg):
        values = cfg.section("train")
        values["seed"] = cfg["run.seed"]
        return cls(**values)


@dataclass
class TrainState:
    models: object
    g_optimizer: torch.optim.Optimizer
    d_optimizer: torch.optim.Optimizer
    generator: torch.Generator
    g_step: int = 0
    d_step: int = 0
    history: List[dict] = field(default_factory=list)
    last_d_losses: Optional[object] = None
    last_g_losses: Optional[object] = None

    def last_terms(self):
        terms = {}
        for losses in (self.last_d_losses, self.last_g_losses):
            if losses is not None:
                terms.update(losses.as_dict())
        return terms

    def counters(self):
        return {"g_step": self.g_step, "d_step": self.d_step}

    def fingerprint(self):
        return state_fingerprint(self.models.state_dicts(), self.counters())

    def to_payload(self):
        return {
            "models": self.models.state_dicts(),
            "optimizers": {
                "generator": self.g_optimizer.state_dict(),
                "critics": self.d_optimizer.state_dict(),
            },
            "counters": self.counters(),
            "rng": self.generator.get_state(),
            "history": list(self.history),
        }

    def restore(self, archive):
        self.models.load_state_dicts(archive["models"])
        self.g_optimizer.load_state_dict(archive["optimizers"]["generator"])
        self.d_optimizer.load_state_dict(archive["optimizers"]["critics"])
        self.generator.set_state(archive["rng"])
        self.g_step = int(archive["counters"]["g_step"])
        self.d_step = int(archive["counters"]["d_step"])
        self.history = list(archive.get("history", []))
        return self


def init_state(models, config):
    betas = (config.beta1, config.beta2)
    return TrainState(
        models=models,
        g_optimizer=torch.optim.Adam(
            models.trainable_generator_parameters(), lr=config.lr_generator, betas=betas
        ),
        d_optimizer=torch.optim.Adam(
            models.critic_parameters(), lr=config.lr_discriminators, betas=betas
        ),
        generator=torch_generator(config.seed),
    )


def discriminator_step(state, batch, config):
    """One Adam step of the three critics.

    Generated inputs carry no gradient, and the generator side keeps its
    buffers: fakes are drawn in training mode with its state restored afterwards.
    """
    models = state.models
    for critic in models.critics():
        critic.train()
    with torch.no_grad(), preserved_buffers(models.generator_side()):
        fakes = sample_fakes(models, batch.size, state.generator,
                             decode=config.variant == "full")
    losses = discriminator_losses(batch, fakes, models, config, state.generator).check_finite()
    state.d_optimizer.zero_grad()
    losses.discriminator_total().backward()
    state.d_optimizer.step()
    state.d_step += 1
    state.last_d_losses = losses
    return state


def generator_step(state, batch, config):
    """One Adam step of the generator and decoder; critics are frozen and in eval mode."""
    models = state.models
    critics = models.critics()
    set_requires_grad(critics, False)
    for critic in critics:
        critic.eval()
    models.generator.train()
    models.decoder.train()
    try:
        fakes = sample_fakes(models, batch.size, state.generator,
                             decode=config.variant == "full")
        losses = generator_losses(batch, fakes, models, config, state.generator).check_finite()
        state.g_optimizer.zero_grad()
        losses.generator_total().backward()
        state.g_optimizer.step()
    finally:
        set_requires_grad(critics, True)
        for critic in critics:
            critic.train()
    state.g_step += 1
    state.last_g_losses = losses
    return state


def batch_stream(samples, config, t_max, l_max, dtype, label_mask):
    """Endless training batches; epoch ``e`` uses the permutation seeded with ``seed + e``."""
    for epoch in itertools.count():
        for batch in iterate_batches(samples, config.batch_size, config.seed + epoch,
                                     t_max, l_max, train=True, label_mask=label_mask):
            yield batch.to(dtype)


def max_critic_singular_value(models):
    """Largest top singular value over every spectrally normalized critic matrix."""
    values = [
        float(torch.linalg.svdvals(sn.matrix().double())[0])
        for critic in models.critics()
        for sn in spectral_modules(critic)
    ]
    return max(values) if values else 0.0


def log_step(state, out_dir):
    terms = state.last_terms()
    record = dict(terms, g_step=state.g_step, d_step=state.d_step)
    state.history.append(record)
    logger.info(
        "g_step {} d_step {} {}".format(
            state.g_step, state.d_step,
            " ".join("{} {:.4f}".format(k, v) for k, v in sorted(terms.items())),
        )
    )
    if out_dir:
        append_jsonl(
            [{"step": state.g_step, "term": k, "value": v} for k, v in sorted(terms.items())],
            os.path.join(out_dir, constants.METRICS_LOG_FILE_NAME),
        )


def snapshot(state, out_dir, archive_extras, fid_monitor):
    metrics = {"max_singular_value": max_critic_singular_value(state.models)}
    if fid_monitor is not None:
        metrics["fid"] = fid_monitor(state.models.generator)
    state.history.append(dict(metrics, g_step=state.g_step, d_step=state.d_step))
    logger.info("g_step {} snapshot {}".format(state.g_step, metrics))
    if out_dir:
        append_jsonl(
            [{"step": state.g_step, "term": k, "value": v} for k, v in sorted(metrics.items())],
            os.path.join(out_dir, constants.METRICS_LOG_FILE_NAME),
        )
        payload = dict(state.to_payload(), **(archive_extras or {}))
        save_checkpoint(payload, os.path.join(out_dir, "checkpoints",
                                              "step-{:06d}.pt".format(state.g_step)), "train")
        save_checkpoint(payload, os.path.join(out_dir, "checkpoint.pt"), "train")


def train(state, samples, config, out_dir=None, archive_extras=None, fid_monitor=None):
    """Run the alternating schedule until ``total_g_steps`` generator steps are done.

    Snapshots (checkpoint, FID, spectral check) are taken every
    ``checkpoint_every`` generator steps and at the end. A non-finite loss
    halts training after writing ``nan_dump.pt`` and ``nan_diagnostics.json``.
    """
    if len(samples) < config.batch_size:
        raise DataError(
            "dataset smaller than batch ({} < {})".format(len(samples), config.batch_size)
        )
    decoder_config = state.models.decoder.config
    dtype = next(state.models.generator.parameters()).dtype
    label_mask = stratified_label_mask(
        [s.label_index for s in samples], config.label_fraction, config.seed
    )
    batches = batch_stream(samples, config, decoder_config.t_max, decoder_config.l_max,
                           dtype, label_mask)
    # resumed runs continue the batch order where the archive left it
    batches = itertools.islice(batches, state.d_step + state.g_step, None)
    if out_dir:
        ensure_dir(out_dir)

    try:
        while state.g_step < config.total_g_steps:
            for _ in range(config.d_steps_per_g_step):
                discriminator_step(state, next(batches), config)
            generator_step(state, next(batches), config)
            if state.g_step % config.log_every == 0:
                log_step(state, out_dir)
            if state.g_step % config.checkpoint_every == 0:
                snapshot(state, out_dir, archive_extras, fid_monitor)
    except NumericalError as err:
        logger.error("Halting at g_step {}: {}".format(state.g_step, err))
        if out_dir:
            payload = dict(state.to_payload(), **(archive_extras or {}))
            payload["diagnostics"] = {k: float(v) for k, v in err.diagnostics.items()}
            save_checkpoint(payload, os.path.join(out_dir, "nan_dump.pt"), "train")
            write_json(dict(err.diagnostics, **state.counters()),
                       os.path.join(out_dir, "nan_diagnostics.json"))
        raise

    if config.total_g_steps % config.checkpoint_every or config.total_g_steps == 0:
        snapshot(state, out_dir, archive_extras, fid_monitor)
    return state


def build_fid_monitor(cfg, corpus, config):
    path = cfg["paths.classifier"]
    if not path:
        logger.warning("No classifier configured; training runs without FID snapshots")
        return None
    extractor = load_classifier(path)
    if not extractor.is_trained:
        logger.warning("Classifier {} is untrained; skipping FID snapshots".format(path))
        return None
    count = min(config.fid_count, len(corpus.samples))
    images = stack_images(corpus.samples[:count])
    return FidMonitor(extractor.eval(), images, seed=config.seed + 1, count=count)


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    config = TrainConfig.from_config(cfg)
    corpus = load_corpus(cfg)
    seed_everything(config.seed)

    # building the networks validates every model config before anything is written
    models = build_models(cfg, corpus.class_count, corpus.vocab.size,
                          load_encoder(cfg, corpus.class_count))
    if cfg["paths.decoder"]:
        load_decoder_weights(models, cfg["paths.decoder"])
    state = init_state(models, config)
    if checkpoint:
        state.restore(load_checkpoint(checkpoint, "train"))
        logger.info("Resuming from {} at g_step {}".format(checkpoint, state.g_step))
    fid_monitor = build_fid_monitor(cfg, corpus, config)
    out_dir = echo_config(cfg)

    extras = {
        "config": cfg.to_dict(),
        "vocab": list(corpus.vocab.id_to_token),
        "class_count": corpus.class_count,
        "encoder_config": encoder_config_dict(models),
    }
    train(state, corpus.samples, config, out_dir, extras, fid_monitor)
    logger.info("Finished at g_step {} d_step {} (fingerprint {})".format(
        state.g_step, state.d_step, state.fingerprint()))
