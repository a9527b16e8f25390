"""Adversarial objective terms.

Critics output logits; ``softplus(-x)`` is ``-log sigmoid(x)`` and
``softplus(x)`` is ``-log(1 - sigmoid(x))``. Real pairs are scored real,
generated pairs fake, for the image, report and joint critics. Generator terms
use the non-saturating form. The rotation task adds a cross-entropy on real
images to the critic objective and on generated images to the generator
objective, each scaled by ``alpha``.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F

from .. import constants
from ..exceptions import NumericalError
from ..models.critics import rotation_predict

DISCRIMINATOR_TERMS = (
    "d_image_real", "d_image_fake", "d_report_real", "d_report_fake",
    "d_joint_real", "d_joint_fake", "rotation_ss",
)
GENERATOR_TERMS = ("g_image", "g_report", "g_joint", "g_rotation", "teacher_forcing")


def real_loss(logits):
    return F.softplus(-logits).mean()


def fake_loss(logits):
    return F.softplus(logits).mean()


@dataclass
class FakeBatch:
    images: torch.Tensor
    labels: torch.Tensor
    label_index: torch.Tensor
    tokens: Optional[torch.Tensor] = None
    lengths: Optional[torch.Tensor] = None

    def detached(self):
        return FakeBatch(
            images=self.images.detach(),
            labels=self.labels,
            label_index=self.label_index,
            tokens=None if self.tokens is None else self.tokens.detach(),
            lengths=self.lengths,
        )


@dataclass
class LossBundle:
    alpha: float = 0.0
    weight_image: float = 1.0
    weight_report: float = 1.0
    weight_joint: float = 1.0
    lambda_teacher_forcing: float = 0.0
    d_image_real: Optional[torch.Tensor] = None
    d_image_fake: Optional[torch.Tensor] = None
    d_report_real: Optional[torch.Tensor] = None
    d_report_fake: Optional[torch.Tensor] = None
    d_joint_real: Optional[torch.Tensor] = None
    d_joint_fake: Optional[torch.Tensor] = None
    rotation_ss: Optional[torch.Tensor] = None
    g_image: Optional[torch.Tensor] = None
    g_report: Optional[torch.Tensor] = None
    g_joint: Optional[torch.Tensor] = None
    g_rotation: Optional[torch.Tensor] = None
    teacher_forcing: Optional[torch.Tensor] = None

    def _weighted(self, pairs):
        total = None
        for weight, term in pairs:
            if term is None:
                continue
            total = weight * term if total is None else total + weight * term
        if total is None:
            raise ValueError("no loss terms were computed")
        return total

    def discriminator_total(self):
        return self._weighted([
            (self.weight_image, self.d_image_real),
            (self.weight_image, self.d_image_fake),
            (self.weight_report, self.d_report_real),
            (self.weight_report, self.d_report_fake),
            (self.weight_joint, self.d_joint_real),
            (self.weight_joint, self.d_joint_fake),
            (self.alpha, self.rotation_ss),
        ])

    def generator_total(self):
        return self._weighted([
            (self.weight_image, self.g_image),
            (self.weight_report, self.g_report),
            (self.weight_joint, self.g_joint),
            (self.alpha, self.g_rotation),
            (self.lambda_teacher_forcing, self.teacher_forcing),
        ])

    def terms(self):
        return {
            name: getattr(self, name)
            for name in DISCRIMINATOR_TERMS + GENERATOR_TERMS
            if getattr(self, name) is not None
        }

    def as_dict(self):
        return {name: float(value.detach()) for name, value in self.terms().items()}

    def check_finite(self):
        bad = sorted(name for name, value in self.terms().items()
                     if not bool(torch.isfinite(value).all()))
        if bad:
            raise NumericalError(
                "non-finite loss terms: {}".format(", ".join(bad)), diagnostics=self.as_dict()
            )
        return self

    def merged(self, other):
        """Copy holding the computed terms of both bundles."""
        updates = {name: value for name, value in other.terms().items()}
        return dataclasses.replace(self, **updates)


def _bundle(config):
    return LossBundle(
        alpha=config.alpha,
        weight_image=config.weight_image,
        weight_report=config.weight_report,
        weight_joint=config.weight_joint,
        lambda_teacher_forcing=config.lambda_teacher_forcing,
    )


def sample_fakes(models, batch_size, generator, decode=True, mode="soft"):
    """Draw noise and uniform class labels, generate images and (optionally) decode reports."""
    gen_config = models.generator.config
    dtype = next(models.generator.parameters()).dtype
    z = torch.randn(batch_size, gen_config.noise_dim, generator=generator, dtype=dtype)
    label_index = torch.randint(gen_config.class_count, (batch_size,), generator=generator)
    labels = F.one_hot(label_index, gen_config.class_count).to(dtype)
    images = models.generator(z, labels)
    fakes = FakeBatch(images=images, labels=labels, label_index=label_index)
    if decode:
        decoded = models.decoder.decode_batch(images, mode=mode, generator=generator)
        fakes.tokens = decoded.tokens
        fakes.lengths = decoded.lengths
    return fakes


def random_rotations(batch_size, generator):
    return torch.randint(len(constants.ROTATION_ANGLES), (batch_size,), generator=generator)


def discriminator_losses(batch, fakes, models, config, generator):
    losses = _bundle(config)
    losses.d_image_real = real_loss(models.d_image(batch.images, batch.labels).adv_score)
    losses.d_image_fake = fake_loss(models.d_image(fakes.images, fakes.labels).adv_score)
    if config.rotation_on_real:
        _, losses.rotation_ss = rotation_predict(
            models.d_image, batch.images, random_rotations(batch.size, generator)
        )
    if config.variant == "full":
        losses.d_report_real = real_loss(models.d_report(batch.tokens, batch.token_lengths))
        losses.d_report_fake = fake_loss(models.d_report(fakes.tokens, fakes.lengths))
        losses.d_joint_real = real_loss(
            models.d_joint(batch.images, batch.tokens, batch.token_lengths)
        )
        losses.d_joint_fake = fake_loss(models.d_joint(fakes.images, fakes.tokens, fakes.lengths))
    return losses


def generator_losses(batch, fakes, models, config, generator):
    losses = _bundle(config)
    losses.g_image = real_loss(models.d_image(fakes.images, fakes.labels).adv_score)
    if config.rotation_on_fake:
        _, losses.g_rotation = rotation_predict(
            models.d_image, fakes.images, random_rotations(fakes.images.shape[0], generator)
        )
    if config.variant == "full":
        losses.g_report = real_loss(models.d_report(fakes.tokens, fakes.lengths))
        losses.g_joint = real_loss(models.d_joint(fakes.images, fakes.tokens, fakes.lengths))
    if config.lambda_teacher_forcing > 0:
        losses.teacher_forcing = models.decoder.teacher_forced_loss(
            batch.images, batch.sentences, batch.sentence_counts, batch.word_counts
        ).total
    return losses


def compute_losses(batch, models, config, generator):
    """Every term of the objective on one real batch and one generated batch."""
    fakes = sample_fakes(models, batch.size, generator, decode=config.variant == "full")
    critic_side = discriminator_losses(batch, fakes.detached(), models, config, generator)
    generator_side = generator_losses(batch, fakes, models, config, generator)
    return critic_side.merged(generator_side)
