"""Single-file checkpoint archives.

An archive is a ``torch.save`` mapping with a ``header`` ({"format",
"version", "kind"}) next to the payload. Writes go through a temp file and a
rename, so the newest archive on disk is always complete.
"""

import hashlib
import json
import logging
import os
import pickle

import torch

from .. import constants
from ..exceptions import DataError
from ..utils import atomic_write

logger = logging.getLogger(__name__)

KINDS = ("classifier", "decoder", "train")


def header(kind):
    return {
        "format": constants.CHECKPOINT_FORMAT,
        "version": constants.CHECKPOINT_VERSION,
        "kind": kind,
    }


def save_checkpoint(payload, path, kind):
    if kind not in KINDS:
        raise ValueError("unknown checkpoint kind {!r}".format(kind))
    archive = dict(payload)
    archive["header"] = header(kind)
    with atomic_write(path, "wb") as fout:
        torch.save(archive, fout)
    logger.info("Saved {} checkpoint to {}".format(kind, path))
    return path


def load_checkpoint(path, kind=None):
    """Read an archive written by ``save_checkpoint``.

    :raises DataError: missing or unreadable file, foreign format, newer
                       version, or a different kind than requested.
    """
    if not path or not os.path.exists(path):
        raise DataError("checkpoint not found: {}".format(path))
    try:
        archive = torch.load(path, map_location="cpu", weights_only=True)
    except (RuntimeError, EOFError, ValueError, pickle.UnpicklingError) as err:
        raise DataError("unreadable checkpoint {}: {}".format(path, err))
    head = archive.get("header", {}) if isinstance(archive, dict) else {}
    if head.get("format") != constants.CHECKPOINT_FORMAT:
        raise DataError("{} is not a pairgen checkpoint".format(path))
    if head.get("version", 0) > constants.CHECKPOINT_VERSION:
        raise DataError(
            "checkpoint version {} is newer than supported {}".format(
                head["version"], constants.CHECKPOINT_VERSION
            )
        )
    if kind is not None and head.get("kind") != kind:
        raise DataError(
            "expected a {} checkpoint, {} holds {}".format(kind, path, head.get("kind"))
        )
    return archive


def _update_with_tensors(digest, prefix, state):
    for key in sorted(state):
        value = state[key]
        name = "{}.{}".format(prefix, key)
        if isinstance(value, torch.Tensor):
            digest.update(name.encode("utf8"))
            digest.update(value.detach().cpu().contiguous().numpy().tobytes())
        elif isinstance(value, dict):
            _update_with_tensors(digest, name, value)


def state_fingerprint(state_dicts, counters=None):
    """sha256 over every tensor of the given state dicts plus the counters."""
    digest = hashlib.sha256()
    _update_with_tensors(digest, "", state_dicts)
    digest.update(json.dumps(counters or {}, sort_keys=True).encode("utf8"))
    return digest.hexdigest()
