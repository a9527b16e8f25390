"""Score a training checkpoint on held-out real data.

Writes ``metrics.json``: FID of class-balanced generated images against
held-out real images, conditioning accuracy and macro AUC of the toy
classifier on the generated images with respect to their conditioning labels,
and BLEU-1..4 / CIDEr of greedy decodes of the held-out images against their
real reports. Without a trained classifier the image metrics are skipped.
"""

import logging
import os

import click
import torch
import torch.nn.functional as F

from ..artifacts import load_corpus, load_generation_bundle, load_trained_classifier
from ..command import echo_config, job, run_options
from ..data.manifest import split_holdout, stack_images
from ..exceptions import ConfigError
from ..utils import write_json
from .classification import accuracy, macro_auc
from .experiments import MetricsReport, decode_texts
from .fid import extract_features, fid, fit_gaussian, generate_balanced_images
from .text_metrics import text_metrics

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

METRICS_FILE_NAME = "metrics.json"


def image_metrics(generator, classifier, real_images, count, seed):
    """FID, conditioning accuracy and conditioning macro AUC of ``count`` generated images."""
    images, label_index = generate_balanced_images(generator, count, seed)
    dtype = next(classifier.parameters()).dtype
    with torch.no_grad():
        probs = F.softmax(classifier(images.to(dtype)), dim=1).double().numpy()
    labels = label_index.numpy()
    return {
        "fid": fid(fit_gaussian(extract_features(real_images, classifier)),
                   fit_gaussian(extract_features(images, classifier))),
        "acc": accuracy(probs.argmax(axis=1), labels),
        "auc": macro_auc(probs, labels) if len(set(labels.tolist())) > 1 else None,
    }


def evaluate_checkpoint(bundle, corpus, classifier, holdout_idx, count, seed,
                        bleu_epsilon=1e-9, cider_variant="plain"):
    holdout = [corpus.samples[i] for i in holdout_idx]
    references = [corpus.manifest.records[i].report for i in holdout_idx]
    candidates = decode_texts(bundle.models.decoder, holdout, corpus.vocab)
    text = text_metrics(candidates, references, epsilon=bleu_epsilon, cider_variant=cider_variant)
    report = MetricsReport(
        experiment="evaluate",
        real_count=len(holdout),
        synth_count=count,
        seed=seed,
        bleu=[text["bleu{}".format(n)] for n in range(1, 5)],
        cider=text["cider"],
    )
    if classifier is not None:
        metrics = image_metrics(bundle.models.generator, classifier,
                                stack_images(holdout), count, seed)
        report.extractor = "toy_classifier"
        report.fid = max(metrics["fid"], 0.0)
        report.acc = metrics["acc"]
        report.auc = metrics["auc"]
    return report


@click.command()
@run_options
@job
def main(cfg, checkpoint):
    if not checkpoint:
        raise ConfigError("--checkpoint must name a training checkpoint")
    bundle = load_generation_bundle(checkpoint)
    corpus = load_corpus(cfg)
    classifier = load_trained_classifier(cfg) if cfg["paths.classifier"] else None
    if classifier is None:
        logger.warning("No classifier configured; skipping FID and conditioning metrics")
    out_dir = echo_config(cfg)

    _, holdout_idx = split_holdout(corpus.label_indices, cfg["data.holdout_fraction"],
                                   cfg["run.seed"])
    count = max(2, min(cfg["eval.sample_count"], len(holdout_idx)))
    report = evaluate_checkpoint(bundle, corpus, classifier, holdout_idx, count, cfg["run.seed"],
                                 cfg["eval.bleu_epsilon"], cfg["eval.cider_variant"])
    report.extractor = report.extractor and cfg["paths.classifier"]
    write_json(report.to_dict(), os.path.join(out_dir, METRICS_FILE_NAME))
    logger.info("Evaluation: {}".format(report.to_json()))
