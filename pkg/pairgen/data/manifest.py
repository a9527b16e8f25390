"""Dataset records, manifest files and training batches.

Manifest file: one JSON object per line with keys ``image`` (path relative to
the manifest), ``report`` (raw text) and ``label`` (integer class index). A
``dataset.json`` sidecar next to it records ``class_count`` and ``image_size``.
Images are 8-bit grayscale PNGs; they are scaled to [-1, 1] and replicated to
three channels on load.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import torch
from PIL import Image

from .. import constants
from ..exceptions import DataError
from ..utils import atomic_write, read_json, write_json
from .vocabulary import flatten_report, tokenize_report

logger = logging.getLogger(__name__)

IMAGE_CHANNELS = 3


@dataclass(frozen=True)
class ManifestRecord:
    image: str
    report: str
    label: int

    def to_json(self):
        return json.dumps(
            {"image": self.image, "report": self.report, "label": self.label},
            sort_keys=True,
        )


@dataclass(frozen=True)
class DatasetManifest:
    records: Tuple[ManifestRecord, ...]
    class_count: int
    image_size: Tuple[int, int, int]
    root: str = field(default=".", compare=False)

    def __len__(self):
        return len(self.records)

    def image_path(self, record):
        return os.path.join(self.root, record.image)

    @property
    def labels(self):
        return np.array([r.label for r in self.records], dtype=np.int64)

    def subset(self, indices):
        return DatasetManifest(
            tuple(self.records[i] for i in indices),
            self.class_count,
            self.image_size,
            self.root,
        )


@dataclass(frozen=True)
class PairedSample:
    """One image, its tokenized report and its one-hot label."""

    image: np.ndarray
    report: Tuple[Tuple[int, ...], ...]
    label: np.ndarray

    @property
    def label_index(self):
        return int(np.argmax(self.label))

    def validate(self, vocab_size):
        if self.image.ndim != 3:
            raise DataError("image must be H x W x C")
        if self.image.min() < -1.0 or self.image.max() > 1.0:
            raise DataError("image values must lie in [-1, 1]")
        if len(self.report) < 1:
            raise DataError("report must hold at least one sentence")
        if any(idx < 0 or idx >= vocab_size for s in self.report for idx in s):
            raise DataError("word id out of vocabulary range")
        if not (np.sum(self.label == 1) == 1 and np.sum(self.label != 0) == 1):
            raise DataError("label must be one-hot")
        return self


def one_hot(index, class_count):
    label = np.zeros(class_count, dtype=np.float32)
    label[index] = 1.0
    return label


def grayscale_to_image(pixels):
    """uint8 H x W grayscale -> float32 H x W x 3 in [-1, 1]."""
    scaled = pixels.astype(np.float32) / 127.5 - 1.0
    return np.repeat(scaled[:, :, None], IMAGE_CHANNELS, axis=2)


def image_to_grayscale(image):
    """float H x W x C in [-1, 1] -> uint8 H x W (channel mean)."""
    gray = np.asarray(image, dtype=np.float64).mean(axis=2)
    return np.clip(np.round((gray + 1.0) * 127.5), 0, 255).astype(np.uint8)


def write_png(pixels, path):
    with atomic_write(path, "wb") as fout:
        Image.fromarray(pixels, mode="L").save(fout, format="PNG")


def read_png(path):
    with Image.open(path) as img:
        return np.array(img.convert("L"), dtype=np.uint8)


def manifest_text(manifest):
    return "".join(record.to_json() + "\n" for record in manifest.records)


def save_manifest(manifest, path):
    """Write the manifest lines and the ``dataset.json`` sidecar next to them."""
    with atomic_write(path) as fout:
        fout.write(manifest_text(manifest))
    meta = {
        "class_count": manifest.class_count,
        "image_size": list(manifest.image_size),
    }
    write_json(meta, os.path.join(os.path.dirname(os.path.abspath(path)),
                                  constants.DATASET_META_FILE_NAME))


def load_manifest(path):
    """Parse and validate a manifest file (or a directory holding ``manifest.jsonl``).

    :raises DataError: malformed line, label out of range (names the record
                       index) or missing image file (names the path).
    """
    if os.path.isdir(path):
        path = os.path.join(path, constants.MANIFEST_FILE_NAME)
    if not os.path.exists(path):
        raise DataError("manifest not found: {}".format(path))
    root = os.path.dirname(os.path.abspath(path))

    records = []
    with open(path) as fin:
        for idx, line in enumerate(ln for ln in fin if ln.strip()):
            try:
                raw = json.loads(line)
                record = ManifestRecord(str(raw["image"]), str(raw["report"]), int(raw["label"]))
            except (ValueError, KeyError, TypeError) as err:
                raise DataError("record {}: malformed manifest line ({})".format(idx, err))
            records.append(record)

    meta_path = os.path.join(root, constants.DATASET_META_FILE_NAME)
    if os.path.exists(meta_path):
        meta = read_json(meta_path)
        class_count = int(meta["class_count"])
        image_size = tuple(int(v) for v in meta["image_size"])
    else:
        class_count = max(r.label for r in records) + 1 if records else 0
        image_size = None

    for idx, record in enumerate(records):
        if not 0 <= record.label < class_count:
            raise DataError(
                "record {}: label {} out of range [0, {})".format(idx, record.label, class_count)
            )
        image_path = os.path.join(root, record.image)
        if not os.path.exists(image_path):
            raise DataError("missing image file: {}".format(image_path))

    if image_size is None:
        if not records:
            raise DataError("cannot infer image size from an empty manifest")
        pixels = read_png(os.path.join(root, records[0].image))
        image_size = (pixels.shape[0], pixels.shape[1], IMAGE_CHANNELS)

    manifest = DatasetManifest(tuple(records), class_count, image_size, root)
    logger.info("Loaded manifest {} with {} records, per class {}".format(
        path, len(records), manifest_class_histogram(manifest).tolist()
    ))
    return manifest


def load_samples(manifest, vocab):
    """Materialize every record as a validated PairedSample."""
    samples = []
    for record in manifest.records:
        pixels = read_png(manifest.image_path(record))
        if pixels.shape[:2] != tuple(manifest.image_size[:2]):
            raise DataError(
                "image {} has size {}, expected {}".format(
                    record.image, pixels.shape[:2], manifest.image_size[:2]
                )
            )
        sample = PairedSample(
            image=grayscale_to_image(pixels),
            report=tuple(tuple(s) for s in tokenize_report(record.report, vocab)),
            label=one_hot(record.label, manifest.class_count),
        )
        samples.append(sample.validate(vocab.size))
    return samples


@dataclass
class Batch:
    images: torch.Tensor
    labels: torch.Tensor
    label_index: torch.Tensor
    label_mask: torch.Tensor
    sentences: torch.Tensor
    sentence_counts: torch.Tensor
    word_counts: torch.Tensor
    tokens: torch.Tensor
    token_lengths: torch.Tensor

    @property
    def size(self):
        return self.images.shape[0]

    def to(self, dtype):
        self.images = self.images.to(dtype)
        self.labels = self.labels.to(dtype)
        return self


def stack_images(samples):
    """N x C x H x W float tensor of the samples' images."""
    return torch.from_numpy(np.stack([s.image for s in samples]).transpose(0, 3, 1, 2).copy())


def label_indices(samples):
    return torch.tensor([s.label_index for s in samples], dtype=torch.long)


def collate(samples, t_max, l_max, label_mask=None):
    """Stack samples into tensors for the networks.

    Rows of ``labels`` whose ``label_mask`` entry is False are zeroed, which
    removes the class-projection term for those images.
    """
    n = len(samples)
    if label_mask is None:
        label_mask = np.ones(n, dtype=bool)
    images = stack_images(samples)
    labels = torch.from_numpy(np.stack([s.label for s in samples]))
    mask = torch.from_numpy(np.asarray(label_mask, dtype=bool))
    labels = labels * mask[:, None].to(labels.dtype)
    label_index = label_indices(samples)

    sentences = torch.full((n, t_max, l_max), constants.PAD_ID, dtype=torch.long)
    word_counts = torch.zeros((n, t_max), dtype=torch.long)
    sentence_counts = torch.zeros(n, dtype=torch.long)
    flat = []
    for i, sample in enumerate(samples):
        report = sample.report[:t_max]
        sentence_counts[i] = len(report)
        for j, sentence in enumerate(report):
            words = [w for w in sentence if w != constants.STOPS_ID][:l_max]
            word_counts[i, j] = len(words)
            if words:
                sentences[i, j, : len(words)] = torch.tensor(words, dtype=torch.long)
        flat.append(flatten_report(report, l_max))

    lengths = torch.tensor([len(f) for f in flat], dtype=torch.long)
    tokens = torch.full((n, int(lengths.max())), constants.PAD_ID, dtype=torch.long)
    for i, f in enumerate(flat):
        tokens[i, : len(f)] = torch.tensor(f, dtype=torch.long)

    return Batch(
        images=images,
        labels=labels,
        label_index=label_index,
        label_mask=mask,
        sentences=sentences,
        sentence_counts=sentence_counts,
        word_counts=word_counts,
        tokens=tokens,
        token_lengths=lengths,
    )


def batch_indices(n, batch_size, seed, train=True):
    """Seeded permutation of ``range(n)`` cut into batches.

    Training drops the last partial batch; evaluation keeps it.
    """
    order = np.random.default_rng(seed).permutation(n)
    stop = (n // batch_size) * batch_size if train else n
    return [order[i:i + batch_size] for i in range(0, stop, batch_size)]


def iterate_batches(samples, batch_size, seed, t_max, l_max, train=True, label_mask=None):
    """Yield collated batches in the seeded order of ``batch_indices``."""
    for idx in batch_indices(len(samples), batch_size, seed, train):
        mask = None if label_mask is None else np.asarray(label_mask)[idx]
        yield collate([samples[i] for i in idx], t_max, l_max, mask)


def round_half_up(value):
    """Nearest integer, with halves rounded up (2.5 -> 3, 3.5 -> 4)."""
    return int(math.floor(value + 0.5))


def stratified_label_mask(label_indices, fraction, seed):
    """Mark ``fraction * n_c`` random samples of each class as labeled.

    Counts are rounded half up and never drop below one per class.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("label fraction must lie in (0, 1]")
    label_indices = np.asarray(label_indices)
    rng = np.random.default_rng(seed)
    mask = np.zeros(len(label_indices), dtype=bool)
    for cls in np.unique(label_indices):
        members = np.flatnonzero(label_indices == cls)
        keep = max(1, round_half_up(fraction * len(members)))
        mask[rng.choice(members, size=keep, replace=False)] = True
    return mask


def split_holdout(label_indices, holdout_fraction, seed):
    """Stratified split into (train indices, held-out indices)."""
    label_indices = np.asarray(label_indices)
    rng = np.random.default_rng(seed)
    train, holdout = [], []
    for cls in np.unique(label_indices):
        members = rng.permutation(np.flatnonzero(label_indices == cls))
        n_hold = max(1, round_half_up(holdout_fraction * len(members)))
        holdout.extend(members[:n_hold])
        train.extend(members[n_hold:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(holdout, dtype=np.int64))


def manifest_class_histogram(manifest):
    """Record count per class, zeros included."""
    return np.bincount(manifest.labels, minlength=manifest.class_count)
