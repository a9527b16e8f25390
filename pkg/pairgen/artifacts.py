"""Loading the on-disk inputs jobs share: corpus, vocabulary and model archives."""

import dataclasses
import logging
import os
from dataclasses import dataclass
from typing import List

from . import constants
from .config import RunConfig
from .data.manifest import DatasetManifest, PairedSample, load_manifest, load_samples
from .data.vocabulary import Vocabulary, build_vocabulary, load_vocabulary
from .exceptions import ConfigError
from .models.bundle import build_models
from .models.classifier import ClassifierConfig, ToyClassifier
from .training.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)


@dataclass
class Corpus:
    manifest: DatasetManifest
    vocab: Vocabulary
    samples: List[PairedSample]

    @property
    def class_count(self):
        return self.manifest.class_count

    @property
    def label_indices(self):
        return [s.label_index for s in self.samples]


def load_corpus(cfg, data_dir=None):
    """Manifest, vocabulary and samples under ``data_dir`` (default ``paths.data_dir``).

    A missing ``vocab.txt`` is rebuilt from the reports with ``data.min_count``.
    """
    data_dir = data_dir or cfg["paths.data_dir"]
    manifest = load_manifest(data_dir)
    vocab_path = os.path.join(manifest.root, constants.VOCAB_FILE_NAME)
    if os.path.exists(vocab_path):
        vocab = load_vocabulary(vocab_path)
    else:
        logger.warning("No vocabulary at {}, building one".format(vocab_path))
        vocab = build_vocabulary([r.report for r in manifest.records], cfg["data.min_count"])
    return Corpus(manifest, vocab, load_samples(manifest, vocab))


def classifier_from_archive(archive):
    model = ToyClassifier(ClassifierConfig(**archive["classifier_config"]))
    model.load_state_dict(archive["classifier"])
    return model


def load_classifier(path):
    return classifier_from_archive(load_checkpoint(path, "classifier"))


def load_trained_classifier(cfg):
    """The classifier at ``paths.classifier``; jobs measuring FID need one."""
    path = cfg["paths.classifier"]
    if not path:
        raise ConfigError("paths.classifier must name a trained classifier archive")
    model = load_classifier(path)
    if not model.is_trained:
        raise ConfigError("classifier at {} has not been trained".format(path))
    return model.eval()


def load_encoder(cfg, class_count):
    """Decoder image encoder: ``paths.encoder`` if set, else ``paths.classifier``, else fresh."""
    path = cfg["paths.encoder"] or cfg["paths.classifier"]
    if path:
        return load_classifier(path)
    logger.warning(
        "No encoder weights configured; the report decoder starts from an untrained encoder"
    )
    return ToyClassifier(ClassifierConfig.from_config(cfg, class_count))


def load_decoder_weights(models, path):
    archive = load_checkpoint(path, "decoder")
    models.decoder.load_state_dict(archive["decoder"])
    logger.info("Loaded decoder weights from {} (step {})".format(path, archive["step"]))


@dataclass
class GenerationBundle:
    cfg: RunConfig
    vocab: Vocabulary
    class_count: int
    models: object
    archive: dict


def load_generation_bundle(path):
    """Rebuild every network of a training checkpoint from the archive alone."""
    archive = load_checkpoint(path, "train")
    cfg = RunConfig(archive["config"])
    vocab = Vocabulary.from_tokens(archive["vocab"])
    class_count = int(archive["class_count"])
    encoder = ToyClassifier(ClassifierConfig(**archive["encoder_config"]))
    models = build_models(cfg, class_count, vocab.size, encoder)
    models.load_state_dicts(archive["models"])
    for module in models.named().values():
        module.eval()
    return GenerationBundle(cfg, vocab, class_count, models, archive)


def encoder_config_dict(models):
    return dataclasses.asdict(models.decoder.encoder.config)
