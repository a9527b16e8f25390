"""Flat, dotted-key run configuration.

Every tunable of every job lives in ``DEFAULTS``. A run is described by a JSON
file of dotted keys plus ``--set key=value`` overrides; the merged view is
echoed into the output directory so the run can be replayed from the echo
alone.
"""

import json
import logging
import os

from .exceptions import ConfigError
from .utils import read_json, sha256_hexdigest

logger = logging.getLogger(__name__)

DEFAULTS = {
    # paths
    "paths.data_dir": "data",
    "paths.out_dir": "out",
    "paths.classifier": "",
    "paths.decoder": "",
    "paths.encoder": "",
    # run
    "run.id": "",
    "run.seed": 0,
    # toy corpus
    "data.n_samples": 2000,
    "data.class_count": 4,
    "data.image_size": 32,
    "data.noise": 0.08,
    "data.min_count": 2,
    "data.holdout_fraction": 0.2,
    # image generator
    "generator.noise_dim": 24,
    "generator.chunk_dim": 4,
    "generator.class_emb_dim": 32,
    "generator.base_channels": 16,
    "generator.up_block_count": 4,
    "generator.spectral_norm": True,
    # report decoder
    "decoder.embed_dim": 64,
    "decoder.sentence_hidden": 128,
    "decoder.topic_hidden": 128,
    "decoder.word_hidden": 128,
    "decoder.word_layers": 3,
    "decoder.t_max": 6,
    "decoder.l_max": 16,
    "decoder.stop_threshold": 0.5,
    "decoder.temperature": 1.0,
    "decoder.train_encoder": False,
    # critics
    "critic.base_channels": 16,
    "critic.joint_base_channels": 8,
    "critic.embed_dim": 64,
    "critic.hidden_dim": 128,
    "critic.report_emb_dim": 64,
    "critic.power_iterations": 1,
    # toy classifier (FID extractor, encoder backbone, downstream classifier)
    "classifier.channels": 16,
    "classifier.feature_dim": 128,
    "classifier.lr": 1e-3,
    "classifier.epochs": 10,
    "classifier.batch_size": 64,
    # decoder warm start
    "pretrain.steps": 200,
    "pretrain.lr": 1e-3,
    "pretrain.batch_size": 32,
    "pretrain.log_every": 20,
    # adversarial training
    "train.lr_generator": 5e-5,
    "train.lr_discriminators": 2e-4,
    "train.beta1": 0.0,
    "train.beta2": 0.999,
    "train.batch_size": 64,
    "train.d_steps_per_g_step": 2,
    "train.total_g_steps": 2000,
    "train.alpha": 0.2,
    "train.label_fraction": 1.0,
    "train.rotation_on_real": True,
    "train.rotation_on_fake": True,
    "train.weight_image": 1.0,
    "train.weight_report": 1.0,
    "train.weight_joint": 1.0,
    "train.lambda_teacher_forcing": 0.0,
    "train.variant": "full",
    "train.log_every": 50,
    "train.checkpoint_every": 500,
    "train.fid_count": 256,
    # evaluation
    "eval.sample_count": 500,
    "eval.bleu_epsilon": 1e-9,
    "eval.cider_variant": "plain",
    # experiments
    "experiment.kind": "augmentation",
    "experiment.real_count": 200,
    "experiment.synth_counts": [0, 1000],
    "experiment.seeds": [0, 1, 2],
    "experiment.finetune": False,
    "experiment.captioner_steps": 300,
    "experiment.synthetic_only": False,
    "experiment.total_count": 0,
    "experiment.synth_ratios": [],
    # generation / export
    "generate.count": 100,
    "generate.class_spec": "balanced",
    "generate.decode_mode": "greedy",
    "export.count": 16,
}

CHOICES = {
    "train.variant": ("full", "image_only"),
    "eval.cider_variant": ("plain", "d"),
    "experiment.kind": ("augmentation", "report_generation"),
    "generate.decode_mode": ("greedy", "sample"),
}


def _coerce(key, value):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0"):
            return value.lower() in ("true", "1")
        raise ConfigError("{} expects a boolean, got {!r}".format(key, value))
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("{} expects an integer, got {!r}".format(key, value))
        if int(value) != value:
            raise ConfigError("{} expects an integer, got {!r}".format(key, value))
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("{} expects a number, got {!r}".format(key, value))
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError("{} expects a list, got {!r}".format(key, value))
        return list(value)
    if not isinstance(value, str):
        raise ConfigError("{} expects a string, got {!r}".format(key, value))
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigError(
            "{} must be one of {}, got {!r}".format(key, CHOICES[key], value)
        )
    return value


def parse_override(text):
    """Parse a ``key=value`` override; the value is read as JSON when it can be."""
    if "=" not in text:
        raise ConfigError("override {!r} is not of the form key=value".format(text))
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key, value


class RunConfig(object):
    """Merged, validated view of every job's settings."""

    def __init__(self, values=None):
        merged = dict(DEFAULTS)
        for key, value in (values or {}).items():
            if key not in DEFAULTS:
                raise ConfigError("unknown config key: {}".format(key))
            merged[key] = _coerce(key, value)
        self._values = merged
        if not self._values["run.id"]:
            self._values["run.id"] = self.fingerprint()[:12]

    def __getitem__(self, key):
        return self._values[key]

    def get(self, key, default=None):
        return self._values.get(key, default)

    def section(self, prefix):
        """Sub-keys under ``prefix.`` with the prefix stripped."""
        start = prefix + "."
        return {
            key[len(start):]: value
            for key, value in self._values.items()
            if key.startswith(start)
        }

    def replace(self, **updates):
        """Copy with dotted keys updated; keyword names use ``__`` for dots."""
        values = dict(self._values)
        for name, value in updates.items():
            values[name.replace("__", ".")] = value
        return RunConfig(values)

    def to_dict(self):
        return dict(self._values)

    def fingerprint(self):
        echo = {k: v for k, v in self._values.items() if k != "run.id"}
        return sha256_hexdigest(json.dumps(echo, sort_keys=True))


def load_config(path=None, overrides=(), seed=None, out_dir=None):
    """Build a RunConfig from an optional JSON file and command-line overrides.

    :param path: JSON file of flat dotted keys, or None.
    :param overrides: iterable of ``key=value`` strings, applied in order.
    :param seed: shortcut for ``run.seed``.
    :param out_dir: shortcut for ``paths.out_dir``.
    :raises ConfigError: unknown key, wrong type, or unreadable file.
    """
    values = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError("config file not found: {}".format(path))
        try:
            loaded = read_json(path)
        except ValueError as err:
            raise ConfigError("config file {} is not valid JSON: {}".format(path, err))
        if not isinstance(loaded, dict):
            raise ConfigError("config file {} must hold a JSON object".format(path))
        values.update(loaded)
    for text in overrides:
        key, value = parse_override(text)
        values[key] = value
    if seed is not None:
        values["run.seed"] = seed
    if out_dir is not None:
        values["paths.out_dir"] = out_dir
    return RunConfig(values)
