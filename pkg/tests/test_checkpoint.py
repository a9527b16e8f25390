import os

import pytest
import torch

from pairgen.exceptions import DataError
from pairgen.training.checkpoint import load_checkpoint, save_checkpoint, state_fingerprint


def test_round_trip(tmpdir):
    path = str(tmpdir.join("run", "model.pt"))
    payload = {"weights": {"w": torch.arange(3.0)}, "step": 7, "history": [{"loss": 0.5}]}
    save_checkpoint(payload, path, "decoder")
    archive = load_checkpoint(path, "decoder")
    assert torch.equal(archive["weights"]["w"], torch.arange(3.0))
    assert archive["step"] == 7
    assert archive["header"] == {"format": "pairgen-checkpoint", "version": 1, "kind": "decoder"}


def test_unknown_kind(tmpdir):
    with pytest.raises(ValueError):
        save_checkpoint({}, str(tmpdir.join("x.pt")), "optimizer")


def test_wrong_kind(tmpdir):
    path = save_checkpoint({}, str(tmpdir.join("x.pt")), "classifier")
    with pytest.raises(DataError, match="expected a train checkpoint"):
        load_checkpoint(path, "train")


def test_missing_and_foreign_files(tmpdir):
    with pytest.raises(DataError, match="not found"):
        load_checkpoint(str(tmpdir.join("missing.pt")))
    foreign = str(tmpdir.join("foreign.pt"))
    torch.save({"weights": torch.zeros(1)}, foreign)
    with pytest.raises(DataError, match="not a pairgen checkpoint"):
        load_checkpoint(foreign)
    garbage = tmpdir.join("garbage.pt")
    garbage.write("not a zip archive")
    with pytest.raises(DataError, match="unreadable"):
        load_checkpoint(str(garbage))


def test_newer_version_is_rejected(tmpdir):
    path = str(tmpdir.join("future.pt"))
    torch.save({"header": {"format": "pairgen-checkpoint", "version": 99, "kind": "train"}}, path)
    with pytest.raises(DataError, match="newer"):
        load_checkpoint(path)


def test_overwrite_leaves_no_temp_files(tmpdir):
    path = str(tmpdir.join("ck.pt"))
    save_checkpoint({"step": 1}, path, "train")
    save_checkpoint({"step": 2}, path, "train")
    assert load_checkpoint(path)["step"] == 2
    assert os.listdir(str(tmpdir)) == ["ck.pt"]


def test_state_fingerprint():
    states = {"net": {"w": torch.ones(2), "inner": {"b": torch.zeros(1)}}}
    same = {"net": {"inner": {"b": torch.zeros(1)}, "w": torch.ones(2)}}
    assert state_fingerprint(states, {"step": 1}) == state_fingerprint(same, {"step": 1})
    assert state_fingerprint(states, {"step": 1}) != state_fingerprint(states, {"step": 2})
    changed = {"net": {"w": torch.ones(2) * 2, "inner": {"b": torch.zeros(1)}}}
    assert state_fingerprint(states) != state_fingerprint(changed)
