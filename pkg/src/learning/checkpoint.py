"""
Checkpoint file layout (format version 1):

    line 1   b"RPF-CHECKPOINT 1\\n"
    line 2   JSON header terminated by b"\\n":
             {"arch": {...NetArch...}, "episode": int,
              "tensors": [{"name": str, "shape": [int, ...]}, ...],
              "optimizer": {"steps": {param name: int}, "lr": float} | null}
    payload  every tensor listed in the header, in order, as little-endian
             float64 values in row-major order

Optimizer moments are stored as tensors named "adam.<param>.exp_avg" and
"adam.<param>.exp_avg_sq". Writes go to a temporary file first and are renamed
into place, so an interrupted save never replaces the last good checkpoint.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from src.config import NetArch
from src.learning.policy import DTYPE, PolicyNetwork
from src.utils.errors import (
    ArchMismatchError,
    CheckpointVersionError,
    CorruptCheckpointError,
)

logger = logging.getLogger(__name__)

MAGIC = b"RPF-CHECKPOINT"
FORMAT_VERSION = 1
_ITEM = np.dtype("<f8")


@dataclass
class Checkpoint:
    network: PolicyNetwork
    episode: int
    optimizer_state: dict | None = None

    @property
    def arch(self) -> NetArch:
        return self.network.arch


def make_optimizer(network: PolicyNetwork, lr: float) -> torch.optim.Adam:
    return torch.optim.Adam(network.parameters(), lr=lr)


def save_checkpoint(
    path: str | Path,
    network: PolicyNetwork,
    episode: int,
    optimizer: torch.optim.Optimizer | None = None,
) -> Path:
    path = Path(path)
    named = dict(network.named_parameters())
    tensors: list[tuple[str, torch.Tensor]] = list(named.items())

    optimizer_header = None
    if optimizer is not None:
        index_of = {id(p): name for name, p in named.items()}
        steps = {}
        for param, state in optimizer.state.items():
            name = index_of[id(param)]
            steps[name] = int(state["step"])
            tensors.append((f"adam.{name}.exp_avg", state["exp_avg"]))
            tensors.append((f"adam.{name}.exp_avg_sq", state["exp_avg_sq"]))
        optimizer_header = {"steps": steps, "lr": optimizer.param_groups[0]["lr"]}

    header = {
        "arch": network.arch.model_dump(mode="json"),
        "episode": episode,
        "tensors": [{"name": name, "shape": list(t.shape)} for name, t in tensors],
        "optimizer": optimizer_header,
    }

    tmp_path = path.with_name(path.name + ".tmp")
    with open(tmp_path, "wb") as f:
        f.write(MAGIC + f" {FORMAT_VERSION}\n".encode("ascii"))
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, tensor in tensors:
            f.write(tensor.detach().cpu().numpy().astype(_ITEM).tobytes(order="C"))
    os.replace(tmp_path, path)

    logger.info(f"Saved checkpoint for episode {episode} to {path}")
    return path


def _read_header(path: Path) -> tuple[dict, bytes]:
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    raw = path.read_bytes()

    first, _, rest = raw.partition(b"\n")
    parts = first.split(b" ")
    if len(parts) != 2 or parts[0] != MAGIC:
        raise CorruptCheckpointError(f"{path} is not a checkpoint file")
    try:
        version = int(parts[1])
    except ValueError as e:
        raise CorruptCheckpointError(f"{path} has an unreadable version field") from e
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path} has format version {version}, expected {FORMAT_VERSION}"
        )

    header_line, sep, payload = rest.partition(b"\n")
    if not sep:
        raise CorruptCheckpointError(f"{path} is truncated inside its header")
    try:
        header = json.loads(header_line)
        header["arch"], header["tensors"], header["episode"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise CorruptCheckpointError(f"{path} has a malformed header") from e
    return header, payload


def load_checkpoint(path: str | Path, expected_arch: NetArch | None = None) -> Checkpoint:
    path = Path(path)
    header, payload = _read_header(path)

    try:
        arch = NetArch.model_validate(header["arch"])
    except ValueError as e:
        raise CorruptCheckpointError(f"{path} stores an invalid architecture") from e
    if expected_arch is not None and arch != expected_arch:
        raise ArchMismatchError(
            f"{path} holds a {arch.model_dump()} network, expected {expected_arch.model_dump()}"
        )

    expected_bytes = sum(int(np.prod(t["shape"])) for t in header["tensors"]) * _ITEM.itemsize
    if len(payload) != expected_bytes:
        raise CorruptCheckpointError(
            f"{path} payload has {len(payload)} bytes, header promises {expected_bytes}"
        )

    values: dict[str, torch.Tensor] = {}
    offset = 0
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"]))
        array = np.frombuffer(payload, dtype=_ITEM, count=count, offset=offset)
        values[entry["name"]] = torch.tensor(array.reshape(entry["shape"]), dtype=DTYPE)
        offset += count * _ITEM.itemsize

    network = PolicyNetwork(arch)
    named = dict(network.named_parameters())
    if set(named) - set(values):
        raise CorruptCheckpointError(f"{path} is missing tensors {sorted(set(named) - set(values))}")
    with torch.no_grad():
        for name, param in named.items():
            if tuple(values[name].shape) != tuple(param.shape):
                raise CorruptCheckpointError(f"{path} tensor {name} has the wrong shape")
            param.copy_(values[name])

    optimizer_state = None
    if header.get("optimizer"):
        optimizer_state = _optimizer_state(network, header["optimizer"], values)

    return Checkpoint(network=network, episode=int(header["episode"]), optimizer_state=optimizer_state)


def _optimizer_state(network: PolicyNetwork, meta: dict, values: dict[str, torch.Tensor]) -> dict:
    """Rebuild a torch Adam state_dict for `network` from the stored moments"""
    template = make_optimizer(network, meta["lr"]).state_dict()
    names = [name for name, _ in network.named_parameters()]
    state = {}
    for index, name in enumerate(names):
        if name not in meta["steps"]:
            continue
        state[index] = {
            "step": torch.tensor(float(meta["steps"][name])),
            "exp_avg": values[f"adam.{name}.exp_avg"],
            "exp_avg_sq": values[f"adam.{name}.exp_avg_sq"],
        }
    template["state"] = state
    return template


def restore_optimizer(checkpoint: Checkpoint, lr: float) -> torch.optim.Adam:
    optimizer = make_optimizer(checkpoint.network, lr)
    if checkpoint.optimizer_state is not None:
        optimizer.load_state_dict(checkpoint.optimizer_state)
        for group in optimizer.param_groups:
            group["lr"] = lr
    return optimizer
