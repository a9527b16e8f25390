"""A system check for testing integration of the libraries pairgen relies on.

This sub-module prints relevant version info, renders a few toy pairs and runs
one forward pass of every network on them to verify that the system is
correctly set up.
"""

import dataclasses
import sys

import click
import logging
import numpy as np
import pandas as pd
import PIL
import scipy
import torch

from .command import job, run_options
from .data.manifest import collate
from .data.toy import ToyDataConfig, generate_toy_dataset
from .data.vocabulary import build_vocabulary
from .models.bundle import build_models
from .models.layers import parameter_count
from .training.losses import sample_fakes
from .utils import seed_everything, torch_generator

logging.basicConfig(level=logging.DEBUG)

SMOKE_SAMPLES = 8


def forward_pass(cfg):
    """Shapes produced by one pass of every network on a small toy batch."""
    seed_everything(cfg["run.seed"])
    config = ToyDataConfig.from_config(cfg)
    config = dataclasses.replace(config, n_samples=max(SMOKE_SAMPLES, config.class_count))
    corpus = generate_toy_dataset(config)
    vocab = build_vocabulary([r.report for r in corpus.manifest.records], 1)
    batch = collate(corpus.samples(vocab), cfg["decoder.t_max"], cfg["decoder.l_max"])
    models = build_models(cfg, config.class_count, vocab.size)
    shapes = {}
    with torch.no_grad():
        fakes = sample_fakes(models, batch.size, torch_generator(cfg["run.seed"]))
        shapes["generator"] = tuple(fakes.images.shape)
        shapes["decoder"] = tuple(fakes.tokens.shape)
        shapes["d_image"] = tuple(models.d_image(batch.images, batch.labels).adv_score.shape)
        shapes["d_report"] = tuple(models.d_report(batch.tokens, batch.token_lengths).shape)
        shapes["d_joint"] = tuple(
            models.d_joint(batch.images, batch.tokens, batch.token_lengths).shape
        )
    return models, shapes


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    print("Python version: {}".format(sys.version_info))
    for name, module in (("torch", torch), ("numpy", np), ("scipy", scipy),
                         ("pandas", pd), ("Pillow", PIL), ("click", click)):
        print("{} version: {}".format(name, getattr(module, "__version__", "unknown")))

    models, shapes = forward_pass(cfg)
    for name, module in models.named().items():
        print("{}: {} parameters, output {}".format(name, parameter_count(module), shapes[name]))
    print("Done!")
