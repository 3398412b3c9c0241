import numpy as np
import pytest
import torch

from src.config import NetArch
from src.learning.checkpoint import (
    load_checkpoint,
    make_optimizer,
    restore_optimizer,
    save_checkpoint,
)
from src.learning.policy import backward, collate, evaluate, init_network
from src.utils.errors import ArchMismatchError, CheckpointVersionError, CorruptCheckpointError

ARCH = NetArch(embed_dim=4, hidden=(6, 5))


@pytest.fixture
def trained(tmp_path):
    """A network that took one Adam step, saved to disk"""
    net = init_network(ARCH, 1)
    optimizer = make_optimizer(net, 1e-3)
    batch = collate([(np.full(4, 0.3), np.full((2, 3), -0.2))])
    dist, values = evaluate(net, batch)
    loss = values.sum() + dist.mean.sum()
    for name, grad in backward(loss, net).items():
        dict(net.named_parameters())[name].grad = grad
    optimizer.step()
    path = save_checkpoint(tmp_path / "checkpoint.rpf", net, 12, optimizer)
    return net, optimizer, path


def test_round_trip_is_bit_exact(trained):
    net, _, path = trained
    checkpoint = load_checkpoint(path)
    assert checkpoint.episode == 12
    assert checkpoint.arch == ARCH
    for (name, original), (_, restored) in zip(
        net.named_parameters(), checkpoint.network.named_parameters()
    ):
        assert torch.equal(original, restored), name


def test_optimizer_moments_survive(trained):
    net, optimizer, path = trained
    restored = restore_optimizer(load_checkpoint(path), lr=5e-4)
    assert restored.param_groups[0]["lr"] == 5e-4
    original_states = list(optimizer.state.values())
    restored_states = list(restored.state.values())
    assert len(original_states) == len(restored_states) > 0
    for a, b in zip(original_states, restored_states):
        assert torch.equal(a["exp_avg"], b["exp_avg"])
        assert torch.equal(a["exp_avg_sq"], b["exp_avg_sq"])
        assert int(a["step"]) == int(b["step"])


def test_save_is_atomic(trained):
    _, _, path = trained
    assert not path.with_name(path.name + ".tmp").exists()


def test_file_layout_header(trained):
    _, _, path = trained
    first, second, _ = path.read_bytes().split(b"\n", 2)
    assert first == b"RPF-CHECKPOINT 1"
    assert b'"episode": 12' in second


def test_truncated_file_is_corrupt(trained):
    _, _, path = trained
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)

    path.write_bytes(data[:20])
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_foreign_file_is_corrupt(tmp_path):
    path = tmp_path / "notes.txt"
    path.write_text("hello\nworld\n", encoding="utf-8")
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(path)


def test_version_mismatch_rejected(trained):
    _, _, path = trained
    data = path.read_bytes()
    path.write_bytes(data.replace(b"RPF-CHECKPOINT 1\n", b"RPF-CHECKPOINT 2\n", 1))
    with pytest.raises(CheckpointVersionError):
        load_checkpoint(path)


def test_arch_mismatch_rejected(trained):
    _, _, path = trained
    with pytest.raises(ArchMismatchError):
        load_checkpoint(path, expected_arch=NetArch(embed_dim=8, hidden=(6, 5)))


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "nothing.rpf")


def test_checkpoint_without_optimizer(tmp_path):
    net = init_network(ARCH, 0)
    path = save_checkpoint(tmp_path / "bare.rpf", net, 0)
    checkpoint = load_checkpoint(path)
    assert checkpoint.optimizer_state is None
    assert restore_optimizer(checkpoint, 1e-4).state == {}
