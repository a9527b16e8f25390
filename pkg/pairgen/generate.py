"""Synthesize labeled image/report pairs from a training checkpoint.

``generate`` writes a dataset in the manifest format so it can be read back
by every other job. ``export_samples`` writes a review bundle: real and
synthetic pairs in a seeded random order, one grid image, one text file per
item and a key saying which items are synthetic.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import List

import click
import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from . import constants
from .artifacts import load_corpus, load_generation_bundle
from .command import echo_config, job, run_options
from .data.manifest import (
    DatasetManifest,
    ManifestRecord,
    PairedSample,
    grayscale_to_image,
    image_to_grayscale,
    one_hot,
    save_manifest,
    write_png,
)
from .data.vocabulary import detokenize, save_vocabulary, tokenize_report
from .exceptions import ConfigError
from .utils import ensure_dir, torch_generator, write_json

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def class_labels(count, class_spec, class_count):
    """Label indices for ``count`` samples.

    ``"balanced"`` cycles through every class; otherwise ``class_spec`` is a
    comma-separated list of class indices that is cycled through.
    """
    if count < 0:
        raise ConfigError("sample count must be non-negative")
    if class_spec == "balanced":
        classes = list(range(class_count))
    else:
        try:
            classes = [int(c) for c in class_spec.split(",") if c.strip()]
        except ValueError:
            raise ConfigError("class spec must be 'balanced' or comma-separated class indices")
        if not classes:
            raise ConfigError("class spec names no class")
        bad = [c for c in classes if not 0 <= c < class_count]
        if bad:
            raise ConfigError("classes {} out of range [0, {})".format(bad, class_count))
    return np.array([classes[i % len(classes)] for i in range(count)], dtype=np.int64)


@dataclass
class SyntheticSet:
    images: torch.Tensor
    label_index: np.ndarray
    reports: List[str]

    def __len__(self):
        return len(self.reports)

    def pixels(self):
        """Generated images as the uint8 grayscale arrays written to disk."""
        hwc = self.images.permute(0, 2, 3, 1).double().numpy()
        return [image_to_grayscale(img) for img in hwc]


def synthesize(models, vocab, label_index, seed, decode_mode="greedy", batch_size=64):
    """Generate one image and one decoded report per entry of ``label_index``."""
    rng = torch_generator(seed)
    generator, decoder = models.generator, models.decoder
    dtype = next(generator.parameters()).dtype
    class_count = generator.config.class_count
    generator.eval()
    decoder.eval()
    images, reports = [], []
    with torch.no_grad():
        for start in range(0, len(label_index), batch_size):
            idx = torch.as_tensor(label_index[start:start + batch_size], dtype=torch.long)
            z = torch.randn(idx.shape[0], generator.config.noise_dim, generator=rng, dtype=dtype)
            batch = generator(z, F.one_hot(idx, class_count).to(dtype))
            decoded = decoder.decode_batch(batch, mode=decode_mode, generator=rng)
            images.append(batch.clamp(-1.0, 1.0))
            reports.extend(detokenize(r.sentences, vocab) for r in decoded.reports)
    size = generator.config.image_size
    empty = torch.zeros((0, 3, size, size), dtype=dtype)
    return SyntheticSet(
        images=torch.cat(images) if images else empty,
        label_index=np.asarray(label_index, dtype=np.int64),
        reports=reports,
    )


def synthetic_samples(synthetic, vocab, class_count):
    """PairedSamples of a SyntheticSet, quantized like images read back from disk."""
    return [
        PairedSample(
            image=grayscale_to_image(px),
            report=tuple(tuple(s) for s in tokenize_report(text, vocab)),
            label=one_hot(int(label), class_count),
        ).validate(vocab.size)
        for px, text, label in zip(synthetic.pixels(), synthetic.reports, synthetic.label_index)
    ]


def write_synthetic_dataset(synthetic, vocab, class_count, out_dir):
    records = []
    for idx, (px, text, label) in enumerate(
        zip(synthetic.pixels(), synthetic.reports, synthetic.label_index)
    ):
        image = "images/{:05d}.png".format(idx)
        write_png(px, os.path.join(out_dir, image))
        with open(os.path.join(ensure_dir(os.path.join(out_dir, "reports")),
                               "{:05d}.txt".format(idx)), "w") as fout:
            fout.write(text + "\n")
        records.append(ManifestRecord(image=image, report=text, label=int(label)))
    size = synthetic.images.shape[-1]
    manifest = DatasetManifest(tuple(records), class_count, (size, size, 3), out_dir)
    path = os.path.join(out_dir, constants.MANIFEST_FILE_NAME)
    save_manifest(manifest, path)
    save_vocabulary(vocab, os.path.join(out_dir, constants.VOCAB_FILE_NAME))
    logger.info("Wrote {} synthetic pairs to {}".format(len(records), out_dir))
    return path


def _require_checkpoint(checkpoint):
    if not checkpoint:
        raise ConfigError("--checkpoint must name a training checkpoint")


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    _require_checkpoint(checkpoint)
    bundle = load_generation_bundle(checkpoint)
    labels = class_labels(cfg["generate.count"], cfg["generate.class_spec"], bundle.class_count)
    out_dir = echo_config(cfg)
    synthetic = synthesize(bundle.models, bundle.vocab, labels, cfg["run.seed"],
                           cfg["generate.decode_mode"])
    write_synthetic_dataset(synthetic, bundle.vocab, bundle.class_count, out_dir)


def review_order(real_count, synthetic_count, seed):
    """Seeded shuffle of (source, index) pairs for the review bundle."""
    items = [("real", i) for i in range(real_count)]
    items += [("synthetic", i) for i in range(synthetic_count)]
    order = np.random.default_rng(seed).permutation(len(items))
    return [items[i] for i in order]


def sample_grid(tiles, columns=None):
    """Paste equally sized uint8 grayscale tiles into one Pillow image, row by row."""
    if not tiles:
        raise ValueError("no tiles to arrange")
    columns = columns or int(math.ceil(math.sqrt(len(tiles))))
    rows = int(math.ceil(len(tiles) / float(columns)))
    height, width = tiles[0].shape
    grid = Image.new("L", (columns * width, rows * height))
    for i, tile in enumerate(tiles):
        corner = ((i % columns) * width, (i // columns) * height)
        grid.paste(Image.fromarray(tile, mode="L"), corner)
    return grid


def export_bundle(real_pixels, real_reports, synthetic, out_dir, seed):
    order = review_order(len(real_pixels), len(synthetic), seed)
    synthetic_pixels = synthetic.pixels()
    tiles, key = [], []
    for item, (source, idx) in enumerate(order):
        if source == "real":
            px, text = real_pixels[idx], real_reports[idx]
        else:
            px, text = synthetic_pixels[idx], synthetic.reports[idx]
        write_png(px, os.path.join(out_dir, "items", "{:03d}.png".format(item)))
        with open(os.path.join(out_dir, "items", "{:03d}.txt".format(item)), "w") as fout:
            fout.write(text + "\n")
        tiles.append(px)
        key.append({"item": item, "source": source, "index": int(idx)})
    sample_grid(tiles).save(os.path.join(out_dir, "grid.png"))
    write_json(key, os.path.join(out_dir, "key.json"))
    return key


@click.command()
@run_options
@job
def export_samples(cfg, checkpoint):
    _require_checkpoint(checkpoint)
    bundle = load_generation_bundle(checkpoint)
    corpus = load_corpus(cfg)
    count = min(cfg["export.count"], len(corpus.manifest))
    if count < 1:
        raise ConfigError("export.count must be at least 1")
    out_dir = echo_config(cfg)

    rng = np.random.default_rng(cfg["run.seed"])
    picks = rng.choice(len(corpus.manifest), count, replace=False)
    real_pixels = [image_to_grayscale(corpus.samples[i].image) for i in picks]
    real_reports = [corpus.manifest.records[i].report for i in picks]
    labels = class_labels(count, "balanced", bundle.class_count)
    synthetic = synthesize(bundle.models, bundle.vocab, labels, cfg["run.seed"],
                           cfg["generate.decode_mode"])
    export_bundle(real_pixels, real_reports, synthetic, out_dir, cfg["run.seed"])
