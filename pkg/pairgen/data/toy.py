"""
Procedural paired image + report corpus for desk-scale runs.

Each class draws a bright ellipse at its own position and orientation over a
noisy textured background; the paired report names the class finding, its
location and whether the ellipse is small or large, so image and text carry
shared information. Generation is a pure function of the config and seed.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import List

import click
import numpy as np

from .. import constants
from ..command import echo_config, job, run_options
from ..exceptions import ConfigError
from ..utils import hash_file
from .manifest import (
    DatasetManifest,
    ManifestRecord,
    PairedSample,
    grayscale_to_image,
    one_hot,
    save_manifest,
    write_png,
)
from .vocabulary import build_vocabulary, save_vocabulary, tokenize_report

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

FINDINGS = [
    "opacity",
    "nodule",
    "consolidation",
    "effusion",
    "mass",
    "atelectasis",
    "infiltrate",
]
LOCATIONS = [
    "right upper lobe",
    "left lower lobe",
    "right lower lobe",
    "left upper lobe",
    "lingula",
]
HEART_SENTENCES = [
    "the heart size is normal",
    "heart size is within normal limits",
    "the cardiac silhouette is normal",
]
EXTRA_SENTENCES = [
    "no pleural effusion",
    "no pneumothorax is seen",
    "the lungs are otherwise clear",
]


@dataclass(frozen=True)
class ToyDataConfig:
    n_samples: int = 400
    class_count: int = 4
    image_size: int = 32
    seed: int = 0
    noise: float = 0.08

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigError("toy corpus needs at least 2 classes")
        size = self.image_size
        if size < 32 or size & (size - 1):
            raise ConfigError("image_size must be a power of two >= 32")
        if self.n_samples < self.class_count:
            raise ConfigError("need at least one sample per class")

    @classmethod
    def from_config(cls, cfg):
        return cls(
            n_samples=cfg["data.n_samples"],
            class_count=cfg["data.class_count"],
            image_size=cfg["data.image_size"],
            seed=cfg["run.seed"],
            noise=cfg["data.noise"],
        )


@dataclass(frozen=True)
class ToyCorpus:
    manifest: DatasetManifest
    pixels: List[np.ndarray]

    def samples(self, vocab):
        return [
            PairedSample(
                image=grayscale_to_image(px),
                report=tuple(tuple(s) for s in tokenize_report(rec.report, vocab)),
                label=one_hot(rec.label, self.manifest.class_count),
            ).validate(vocab.size)
            for rec, px in zip(self.manifest.records, self.pixels)
        ]


def class_finding(label):
    return FINDINGS[label % len(FINDINGS)], LOCATIONS[(label // len(FINDINGS)) % len(LOCATIONS)]


def render_image(label, class_count, size_factor, rng, image_size, noise):
    """Grayscale uint8 rendering of one toy "anatomy" image."""
    n = image_size
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64) / (n - 1)

    # faint rib-like banding as shared background structure
    background = 0.25 + 0.05 * np.sin(2 * math.pi * 4 * yy + rng.uniform(0, 2 * math.pi))

    angle = 2 * math.pi * label / class_count
    cx = 0.5 + 0.25 * math.cos(angle) + rng.normal(0, 0.02)
    cy = 0.5 + 0.25 * math.sin(angle) + rng.normal(0, 0.02)
    tilt = math.pi * label / class_count
    a = 0.16 * size_factor
    b = 0.09 * size_factor
    dx, dy = xx - cx, yy - cy
    u = dx * math.cos(tilt) + dy * math.sin(tilt)
    v = -dx * math.sin(tilt) + dy * math.cos(tilt)
    inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0

    img = background + 0.6 * inside + rng.normal(0, noise, size=(n, n))
    return np.clip(np.round(img * 255), 0, 255).astype(np.uint8)


def render_report(label, size_factor, rng):
    finding, location = class_finding(label)
    size_word = "small" if size_factor < 1.0 else "large"
    sentences = [
        HEART_SENTENCES[rng.integers(len(HEART_SENTENCES))],
        "there is a {} {} in the {}".format(size_word, finding, location),
    ]
    sentences.extend(s for s in EXTRA_SENTENCES if rng.random() < 0.5)
    return ". ".join(sentences) + "."


def class_counts(n_samples, class_count):
    base, extra = divmod(n_samples, class_count)
    return [base + (1 if c < extra else 0) for c in range(class_count)]


def generate_toy_dataset(config):
    """Render a class-balanced toy corpus.

    :param config: a ToyDataConfig.
    :return: a ToyCorpus holding the manifest (paths ``images/NNNNN.png``)
             and the grayscale pixel arrays in manifest order.
    """
    rng = np.random.default_rng(config.seed)
    labels = np.concatenate(
        [np.full(n, c, dtype=np.int64)
         for c, n in enumerate(class_counts(config.n_samples, config.class_count))]
    )
    labels = labels[rng.permutation(len(labels))]

    records, pixels = [], []
    for idx, label in enumerate(labels):
        label = int(label)
        size_factor = float(rng.uniform(0.75, 1.25))
        pixels.append(
            render_image(label, config.class_count, size_factor, rng,
                         config.image_size, config.noise)
        )
        records.append(
            ManifestRecord(
                image="images/{:05d}.png".format(idx),
                report=render_report(label, size_factor, rng),
                label=label,
            )
        )

    manifest = DatasetManifest(
        tuple(records), config.class_count, (config.image_size, config.image_size, 3)
    )
    return ToyCorpus(manifest, pixels)


def write_toy_dataset(corpus, out_dir, min_count):
    """Write images, manifest, sidecar and vocabulary under ``out_dir``."""
    for record, px in zip(corpus.manifest.records, corpus.pixels):
        write_png(px, os.path.join(out_dir, record.image))
    manifest_path = os.path.join(out_dir, constants.MANIFEST_FILE_NAME)
    save_manifest(corpus.manifest, manifest_path)
    vocab = build_vocabulary([r.report for r in corpus.manifest.records], min_count)
    save_vocabulary(vocab, os.path.join(out_dir, constants.VOCAB_FILE_NAME))
    logger.info(
        "Wrote {} records to {} (manifest sha256 {})".format(
            len(corpus.manifest), out_dir, hash_file(manifest_path)
        )
    )
    return manifest_path


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    config = ToyDataConfig.from_config(cfg)
    out_dir = echo_config(cfg)
    write_toy_dataset(generate_toy_dataset(config), out_dir, cfg["data.min_count"])
