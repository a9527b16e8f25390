import contextlib
import hashlib
import json
import logging
import os
import random
import tempfile

import numpy as np
import torch

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def ensure_dir(path):
    if not os.path.isdir(path):
        os.makedirs(path)
    return path


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    """Write ``path`` through a temp file in the same directory.

    The destination only ever holds either the previous content or the
    complete new content, so an interrupted run never leaves a torn file.
    """
    dirname = os.path.dirname(os.path.abspath(path))
    ensure_dir(dirname)
    fd, tmp_path = tempfile.mkstemp(dir=dirname, prefix=".tmp-")
    os.close(fd)
    try:
        newline = "" if "b" not in mode else None
        with open(tmp_path, mode, newline=newline) as fout:
            yield fout
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_json(data, path):
    with atomic_write(path) as fout:
        json.dump(data, fout, indent=2, sort_keys=True)
        fout.write("\n")
    logger.info("Wrote {}".format(path))


def read_json(path):
    with open(path) as fin:
        return json.load(fin)


def append_jsonl(records, path):
    """Append records to a line-delimited JSON log."""
    ensure_dir(os.path.dirname(os.path.abspath(path)))
    with open(path, "a") as fout:
        for record in records:
            fout.write(json.dumps(record, sort_keys=True))
            fout.write("\n")


def read_jsonl(path):
    with open(path) as fin:
        return [json.loads(line) for line in fin if line.strip()]


def sha256_hexdigest(data):
    if isinstance(data, str):
        data = data.encode("utf8")
    return hashlib.sha256(data).hexdigest()


def hash_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fin:
        for chunk in iter(lambda: fin.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def hash_array(array):
    """Stable hash of an array's dtype, shape and bytes."""
    array = np.ascontiguousarray(array)
    digest = hashlib.sha256()
    digest.update(str(array.dtype).encode("utf8"))
    digest.update(str(array.shape).encode("utf8"))
    digest.update(array.tobytes())
    return digest.hexdigest()


def parameter_checksum(modules):
    """Hash of every parameter of the given modules, keyed by name."""
    digest = hashlib.sha256()
    for module in modules:
        for name, param in sorted(module.named_parameters()):
            digest.update(name.encode("utf8"))
            digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def state_checksum(modules):
    """Hash of every parameter and buffer of the given modules, keyed by name."""
    digest = hashlib.sha256()
    for module in modules:
        for name, value in sorted(module.state_dict().items()):
            digest.update(name.encode("utf8"))
            digest.update(value.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)


def torch_generator(seed):
    generator = torch.Generator()
    generator.manual_seed(int(seed))
    return generator
