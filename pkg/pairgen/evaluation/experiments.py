"""Downstream augmentation experiments.

Both protocols fix one stratified split of the real corpus into a training
pool and a held-out set and draw real training pairs from the pool. Every
mix of real and class-balanced synthetic pairs from a checkpoint is then run
once per seed on a freshly trained model:

* ``augmentation``: a toy classifier scored by macro and per-class AUC and
  accuracy on the held-out images. With ``finetune`` it is first fit on the
  synthetic pairs alone and then on the real ones.
* ``report_generation``: an image-to-report captioner with its own fresh
  encoder, scored by BLEU-1..4 and CIDEr of greedy decodes against the
  held-out reports.

The mixes are ``real_count`` real pairs plus each of ``synth_counts``
synthetic ones, optionally the same synthetic counts with no real pairs
(``synthetic_only``), and optionally a sweep over the synthetic share of a
fixed ``total_count`` (``synth_ratios``).
"""


import dataclasses
import json
import logging
import os
from dataclasses import dataclass
from typing import List, Optional

import click
import numpy as np
import pandas as pd

from ..artifacts import load_corpus, load_generation_bundle
from ..command import echo_config, job, run_options
from ..data.manifest import label_indices, round_half_up, split_holdout, stack_images
from ..data.vocabulary import detokenize
from ..exceptions import ConfigError, DataError
from ..generate import class_labels, synthesize, synthetic_samples
from ..models.classifier import ClassifierConfig, ToyClassifier
from ..models.decoder import DecoderConfig, ReportDecoder
from ..training.classifier import FitConfig, evaluate_classifier, fit_classifier
from ..training.pretrain import DecoderPretrainer, PretrainConfig
from ..utils import append_jsonl, hash_array, seed_everything, sha256_hexdigest
from .text_metrics import text_metrics

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

REPORTS_FILE_NAME = "reports.jsonl"
SUMMARY_FILE_NAME = "summary.csv"
METRIC_COLUMNS = ("fid", "bleu1", "bleu2", "bleu3", "bleu4", "cider", "auc", "acc")


@dataclass
class MetricsReport:
    experiment: str
    real_count: int
    synth_count: int
    seed: int
    extractor: str = ""
    fid: Optional[float] = None
    bleu: Optional[List[float]] = None
    cider: Optional[float] = None
    auc: Optional[float] = None
    acc: Optional[float] = None
    auc_per_class: Optional[List[Optional[float]]] = None

    def __post_init__(self):
        for name in ("auc", "acc"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError("{} must lie in [0, 1], got {}".format(name, value))
        if self.auc_per_class is not None:
            if any(a is not None and not 0.0 <= a <= 1.0 for a in self.auc_per_class):
                raise ValueError("per-class AUC values must lie in [0, 1]")
        if self.bleu is not None:
            if len(self.bleu) != 4 or any(not 0.0 <= b <= 1.0 for b in self.bleu):
                raise ValueError("bleu must hold four values in [0, 1]")
        if self.fid is not None and self.fid < -1e-8:
            raise ValueError("fid must be non-negative, got {}".format(self.fid))

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def fingerprint(self):
        return sha256_hexdigest(self.to_json())

    def row(self):
        values = self.to_dict()
        bleu = values.pop("bleu") or [None] * 4
        values.update({"bleu{}".format(i + 1): b for i, b in enumerate(bleu)})
        per_class = values.pop("auc_per_class") or []
        values.update({"auc_class{}".format(c): a for c, a in enumerate(per_class)})
        return values


@dataclass(frozen=True)
class Mix:
    arm: str
    real_count: int
    synth_count: int


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "augmentation"
    real_count: int = 200
    synth_counts: tuple = (0, 1000)
    seeds: tuple = (0, 1, 2)
    finetune: bool = False
    captioner_steps: int = 300
    synthetic_only: bool = False
    total_count: int = 0
    synth_ratios: tuple = ()
    holdout_fraction: float = 0.2
    split_seed: int = 0
    decode_mode: str = "greedy"

    def __post_init__(self):
        if self.real_count < 1:
            raise ConfigError("experiment.real_count must be at least 1")
        if not self.seeds or not self.synth_counts:
            raise ConfigError("experiment needs at least one seed and one synthetic count")
        if any(n < 0 for n in self.synth_counts):
            raise ConfigError("synthetic counts must be non-negative")
        if self.synthetic_only and not any(self.synth_counts):
            raise ConfigError("experiment.synthetic_only needs a positive synthetic count")
        if any(not 0.0 <= r <= 1.0 for r in self.synth_ratios):
            raise ConfigError("experiment.synth_ratios must lie in [0, 1]")
        if self.synth_ratios and self.total_count < 1:
            raise ConfigError("experiment.synth_ratios needs experiment.total_count >= 1")

    @classmethod
    def from_config(cls, cfg):
        return cls(
            kind=cfg["experiment.kind"],
            real_count=cfg["experiment.real_count"],
            synth_counts=tuple(int(n) for n in cfg["experiment.synth_counts"]),
            seeds=tuple(int(s) for s in cfg["experiment.seeds"]),
            finetune=cfg["experiment.finetune"],
            captioner_steps=cfg["experiment.captioner_steps"],
            synthetic_only=cfg["experiment.synthetic_only"],
            total_count=cfg["experiment.total_count"],
            synth_ratios=tuple(float(r) for r in cfg["experiment.synth_ratios"]),
            holdout_fraction=cfg["data.holdout_fraction"],
            split_seed=cfg["run.seed"],
            decode_mode=cfg["generate.decode_mode"],
        )

    def mixes(self):
        """Every (arm, real, synthetic) mix in run order."""
        mixes = [Mix("", self.real_count, n) for n in self.synth_counts]
        if self.synthetic_only:
            mixes.extend(Mix("_synthetic_only", 0, n) for n in self.synth_counts if n)
        for ratio in self.synth_ratios:
            synth_count = round_half_up(ratio * self.total_count)
            mixes.append(Mix("_ratio", self.total_count - synth_count, synth_count))
        return mixes


@dataclass
class ExperimentSplit:
    drawn_index: np.ndarray
    drawn_samples: list
    holdout_samples: list
    holdout_reports: List[str]

    def real_samples(self, count):
        """The first ``count`` drawn pairs in corpus order; smaller draws nest in larger ones."""
        order = np.argsort(self.drawn_index[:count], kind="stable")
        return [self.drawn_samples[i] for i in order]


def split_corpus(corpus, config):
    """Held-out set plus one random draw from the rest, large enough for every mix."""
    train_idx, holdout_idx = split_holdout(
        corpus.label_indices, config.holdout_fraction, config.split_seed
    )
    needed = max(mix.real_count for mix in config.mixes())
    if needed > len(train_idx):
        raise DataError("real_count {} exceeds the {} pairs outside the held-out set".format(
            needed, len(train_idx)))
    rng = np.random.default_rng(config.split_seed)
    drawn = rng.choice(train_idx, size=needed, replace=False)
    return ExperimentSplit(
        drawn_index=drawn,
        drawn_samples=[corpus.samples[i] for i in drawn],
        holdout_samples=[corpus.samples[i] for i in holdout_idx],
        holdout_reports=[corpus.manifest.records[i].report for i in holdout_idx],
    )


def check_holdout_disjoint(train_samples, holdout_samples):
    """Raise DataError if any held-out image also appears among the training images."""
    seen = {hash_array(s.image) for s in train_samples}
    overlap = sum(hash_array(s.image) in seen for s in holdout_samples)
    if overlap:
        raise DataError("{} held-out images also appear in the training data".format(overlap))


def synthetic_pairs(bundle, vocab, class_count, count, seed, decode_mode):
    if not count:
        return []
    labels = class_labels(count, "balanced", class_count)
    synthetic = synthesize(bundle.models, bundle.vocab, labels, seed, decode_mode)
    return synthetic_samples(synthetic, vocab, class_count)


def _check_bundle(corpus, bundle):
    if bundle.class_count != corpus.class_count:
        raise ConfigError("checkpoint has {} classes but the corpus has {}".format(
            bundle.class_count, corpus.class_count))


def _mix_runs(corpus, bundle, config, split):
    """Yield (mix, seed, real pairs, synthetic pairs) for every run of the experiment."""
    synthetic_cache = {}
    for mix in config.mixes():
        real = split.real_samples(mix.real_count)
        for seed in config.seeds:
            key = (mix.synth_count, seed)
            if key not in synthetic_cache:
                synthetic_cache[key] = synthetic_pairs(
                    bundle, corpus.vocab, corpus.class_count, mix.synth_count, seed,
                    config.decode_mode,
                )
            synthetic = synthetic_cache[key]
            check_holdout_disjoint(real + synthetic, split.holdout_samples)
            yield mix, seed, real, synthetic


def augmentation_experiment(corpus, bundle, config, fit_config, classifier_config):
    """Classifier AUC/accuracy on held-out real images for every mix and seed."""
    _check_bundle(corpus, bundle)
    split = split_corpus(corpus, config)
    holdout_images = stack_images(split.holdout_samples)
    holdout_labels = label_indices(split.holdout_samples)
    name = "augmentation" + ("_finetune" if config.finetune else "")
    reports = []
    for mix, seed, real, synthetic in _mix_runs(corpus, bundle, config, split):
        seed_everything(seed)
        model = ToyClassifier(classifier_config)
        fit = dataclasses.replace(fit_config, seed=seed)
        samples = real + synthetic
        if config.finetune and synthetic and real:
            fit_classifier(model, stack_images(synthetic), label_indices(synthetic), fit)
            samples = real
        fit_classifier(model, stack_images(samples), label_indices(samples), fit)
        metrics = evaluate_classifier(model, holdout_images, holdout_labels)
        report = MetricsReport(
            experiment=name + mix.arm,
            real_count=mix.real_count,
            synth_count=mix.synth_count,
            seed=seed,
            extractor="toy_classifier",
            auc=metrics["auc"],
            acc=metrics["acc"],
            auc_per_class=metrics["auc_per_class"],
        )
        logger.info("{} R{} + S{} seed {}: auc {:.4f} acc {:.4f}".format(
            report.experiment, mix.real_count, mix.synth_count, seed, report.auc, report.acc))
        reports.append(report)
    return reports


def train_captioner(samples, decoder_config, classifier_config, pretrain_config):
    seed_everything(pretrain_config.seed)
    encoder = ToyClassifier(classifier_config)
    decoder = ReportDecoder(dataclasses.replace(decoder_config, train_encoder=True), encoder)
    return DecoderPretrainer(decoder, pretrain_config).run(samples).decoder


def decode_texts(decoder, samples, vocab, batch_size=64):
    decoder.eval()
    texts = []
    for start in range(0, len(samples), batch_size):
        images = stack_images(samples[start:start + batch_size])
        images = images.to(next(decoder.parameters()).dtype)
        decoded = decoder.decode_batch(images, mode="greedy")
        texts.extend(detokenize(r.sentences, vocab) for r in decoded.reports)
    return texts


def report_generation_experiment(corpus, bundle, config, decoder_config, classifier_config,
                                 pretrain_config, cider_variant="plain"):
    """Captioner BLEU/CIDEr on held-out real pairs for every mix and seed."""
    _check_bundle(corpus, bundle)
    split = split_corpus(corpus, config)
    reports = []
    for mix, seed, real, synthetic in _mix_runs(corpus, bundle, config, split):
        samples = real + synthetic
        pretrain = dataclasses.replace(
            pretrain_config,
            steps=config.captioner_steps,
            batch_size=min(pretrain_config.batch_size, len(samples)),
            seed=seed,
        )
        captioner = train_captioner(samples, decoder_config, classifier_config, pretrain)
        candidates = decode_texts(captioner, split.holdout_samples, corpus.vocab)
        metrics = text_metrics(candidates, split.holdout_reports, cider_variant=cider_variant)
        report = MetricsReport(
            experiment="report_generation" + mix.arm,
            real_count=mix.real_count,
            synth_count=mix.synth_count,
            seed=seed,
            bleu=[metrics["bleu{}".format(n)] for n in range(1, 5)],
            cider=metrics["cider"],
        )
        logger.info("{} R{} + S{} seed {}: bleu4 {:.4f} cider {:.4f}".format(
            report.experiment, mix.real_count, mix.synth_count, seed,
            report.bleu[3], report.cider))
        reports.append(report)
    return reports


def summarize(reports):
    """Mean and standard deviation of every metric per (experiment, real, synthetic) mix.

    Per-class AUC columns come out as ``auc_class<k>_mean``/``_std``; a class
    missing from the held-out set leaves its column empty.
    """
    frame = pd.DataFrame([r.row() for r in reports])
    per_class = [c for c in frame.columns if c.startswith("auc_class")]
    metrics = [c for c in list(METRIC_COLUMNS) + per_class
               if c in frame and frame[c].notna().any()]
    frame[metrics] = frame[metrics].astype(float)
    keys = ["experiment", "real_count", "synth_count"]
    summary = frame.groupby(keys, sort=False)[metrics].agg(["mean", "std"])
    summary.columns = ["{}_{}".format(metric, stat) for metric, stat in summary.columns]
    summary["seeds"] = frame.groupby(keys, sort=False).size()
    return summary.reset_index()


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    if not checkpoint:
        raise ConfigError("--checkpoint must name a training checkpoint")
    config = ExperimentConfig.from_config(cfg)
    corpus = load_corpus(cfg)
    bundle = load_generation_bundle(checkpoint)
    classifier_config = ClassifierConfig.from_config(cfg, corpus.class_count)
    if config.kind == "augmentation":
        fit_config = FitConfig.from_config(cfg)
    else:
        decoder_config = DecoderConfig.from_config(
            cfg, corpus.vocab.size, classifier_config.feature_dim
        )
        pretrain_config = PretrainConfig.from_config(cfg)
    out_dir = echo_config(cfg)

    if config.kind == "augmentation":
        reports = augmentation_experiment(
            corpus, bundle, config, fit_config, classifier_config
        )
    else:
        reports = report_generation_experiment(
            corpus, bundle, config, decoder_config, classifier_config, pretrain_config,
            cider_variant=cfg["eval.cider_variant"],
        )

    path = os.path.join(out_dir, REPORTS_FILE_NAME)
    if os.path.exists(path):
        os.remove(path)
    append_jsonl([r.to_dict() for r in reports], path)
    summary = summarize(reports)
    summary.to_csv(os.path.join(out_dir, SUMMARY_FILE_NAME), index=False)
    logger.info("Experiment summary:\n{}".format(summary.to_string(index=False)))
