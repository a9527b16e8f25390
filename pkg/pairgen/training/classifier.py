"""Fit the toy classifier on real images.

The fitted network is the FID feature extractor and the default image encoder
of the report decoder, so this job runs before decoder pretraining and
adversarial training.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass

import click
import torch
import torch.nn.functional as F

from ..artifacts import load_corpus
from ..command import echo_config, job, run_options
from ..data.manifest import label_indices, split_holdout, stack_images
from ..evaluation.classification import accuracy, macro_auc, per_class_auc
from ..exceptions import ConfigError
from ..models.classifier import ClassifierConfig, ToyClassifier
from ..utils import seed_everything, torch_generator
from .checkpoint import save_checkpoint

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

CLASSIFIER_FILE_NAME = "classifier.pt"


@dataclass(frozen=True)
class FitConfig:
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("classifier lr must be positive, epochs >= 0, batch_size >= 1")

    @classmethod
    def from_config(cls, cfg, seed=None):
        return cls(
            lr=cfg["classifier.lr"],
            epochs=cfg["classifier.epochs"],
            batch_size=cfg["classifier.batch_size"],
            seed=cfg["run.seed"] if seed is None else seed,
        )


def fit_classifier(model, images, labels, config):
    """Train ``model`` in place with Adam on cross-entropy; returns per-epoch mean losses."""
    rng = torch_generator(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    dtype = next(model.parameters()).dtype
    n = images.shape[0]
    history = []
    model.train()
    for epoch in range(config.epochs):
        order = torch.randperm(n, generator=rng)
        total, batches = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss = F.cross_entropy(model(images[idx].to(dtype)), labels[idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            batches += 1
        history.append(total / max(batches, 1))
        logger.info("classifier epoch {} loss {:.4f}".format(epoch + 1, history[-1]))
    model.mark_trained()
    model.eval()
    return history


def predict_proba(model, images, batch_size=256):
    dtype = next(model.parameters()).dtype
    model.eval()
    with torch.no_grad():
        return torch.cat([
            torch.softmax(model(images[i:i + batch_size].to(dtype)), dim=1)
            for i in range(0, images.shape[0], batch_size)
        ]).double().numpy()


def evaluate_classifier(model, images, labels):
    probs = predict_proba(model, images)
    labels = labels.numpy()
    return {
        "acc": accuracy(probs.argmax(axis=1), labels),
        "auc": macro_auc(probs, labels),
        "auc_per_class": per_class_auc(probs, labels),
    }


def classifier_archive(model, history, metrics=None):
    return {
        "classifier": model.state_dict(),
        "classifier_config": dataclasses.asdict(model.config),
        "history": history,
        "metrics": metrics or {},
    }


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    fit_config = FitConfig.from_config(cfg)
    corpus = load_corpus(cfg)
    classifier_config = ClassifierConfig.from_config(cfg, corpus.class_count)
    out_dir = echo_config(cfg)
    seed_everything(fit_config.seed)

    train_idx, holdout_idx = split_holdout(
        corpus.label_indices, cfg["data.holdout_fraction"], fit_config.seed
    )
    train_samples = [corpus.samples[i] for i in train_idx]
    holdout_samples = [corpus.samples[i] for i in holdout_idx]

    model = ToyClassifier(classifier_config)
    history = fit_classifier(
        model, stack_images(train_samples), label_indices(train_samples), fit_config
    )
    metrics = evaluate_classifier(
        model, stack_images(holdout_samples), label_indices(holdout_samples)
    )
    logger.info("held-out accuracy {acc:.4f} macro AUC {auc:.4f}".format(**metrics))
    save_checkpoint(
        classifier_archive(model, history, metrics),
        os.path.join(out_dir, CLASSIFIER_FILE_NAME),
        "classifier",
    )
