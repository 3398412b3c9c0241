"""
Attention-based observation embedding feeding shared actor-critic heads.

Observations enter as padded batches: o_loc (B, 4), neighbors (B, M, 3) and a
boolean mask (B, M) marking real neighbors. One embedding is shared by the
actor and the critic. Everything runs on CPU in float64.
"""

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn
from torch.distributions import Normal

from src.config import NetArch, WorldConfig, half_range_log_std
from src.engine.world import Observation
from src.utils.errors import UnsupportedNodeError

logger = logging.getLogger(__name__)

DTYPE = torch.float64


def _trunk(in_dim: int, hidden: Sequence[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for width in hidden:
        layers += [nn.Linear(in_dim, width, dtype=DTYPE), nn.ReLU()]
        in_dim = width
    return nn.Sequential(*layers)


class PolicyNetwork(nn.Module):
    """All trainable parameters: embedding layers, actor and critic trunks, action log-std"""

    def __init__(self, arch: NetArch):
        super().__init__()
        self.arch = arch
        e = arch.embed_dim
        self.encoder_e = nn.Linear(arch.obs_loc_dim + arch.neighbor_dim, e, dtype=DTYPE)
        self.encoder_h = nn.Linear(e, e, dtype=DTYPE)
        self.score_b = nn.Linear(2 * e, 1, dtype=DTYPE)

        joint_dim = arch.obs_loc_dim + e
        self.actor_trunk = _trunk(joint_dim, arch.hidden)
        self.actor_mean = nn.Linear(arch.hidden[-1], arch.action_dim, dtype=DTYPE)
        self.critic_trunk = _trunk(joint_dim, arch.hidden)
        self.value_head = nn.Linear(arch.hidden[-1], 1, dtype=DTYPE)
        self.log_std = nn.Parameter(
            torch.tensor(half_range_log_std(arch.action_low, arch.action_high), dtype=DTYPE)
        )

        self.register_buffer("action_low", torch.tensor(arch.action_low, dtype=DTYPE))
        self.register_buffer("action_high", torch.tensor(arch.action_high, dtype=DTYPE))


@dataclass
class EmbeddingActivations:
    e: torch.Tensor  # (B, M, E)
    h: torch.Tensor  # (B, M, E)
    scores: torch.Tensor  # (B, M)
    mean_embedding: torch.Tensor  # (B, E)
    weights: torch.Tensor  # (B, M), zero on padding
    context: torch.Tensor  # (B, E)
    joint: torch.Tensor  # (B, obs_loc_dim + E)


@dataclass
class ActionDistribution:
    mean: torch.Tensor  # (B, A)
    std: torch.Tensor  # (B, A)
    low: torch.Tensor  # (A,)
    high: torch.Tensor  # (A,)

    def normal(self) -> Normal:
        return Normal(self.mean, self.std)

    def log_prob(self, raw_action: torch.Tensor) -> torch.Tensor:
        return self.normal().log_prob(raw_action).sum(dim=-1)

    def entropy(self) -> torch.Tensor:
        return self.normal().entropy().sum(dim=-1)


@dataclass
class ObservationBatch:
    o_loc: torch.Tensor
    neighbors: torch.Tensor
    mask: torch.Tensor

    def __len__(self) -> int:
        return self.o_loc.shape[0]


def init_network(arch: NetArch, seed: int) -> PolicyNetwork:
    """Fan-in scaled uniform weights, zero biases, log-std at log(0.5 * half-range)"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = PolicyNetwork(arch)
        with torch.no_grad():
            for module in net.modules():
                if isinstance(module, nn.Linear):
                    bound = 1.0 / math.sqrt(module.in_features)
                    module.weight.uniform_(-bound, bound)
                    module.bias.zero_()
    return net


def normalize_observation(obs: Observation, config: WorldConfig) -> tuple[np.ndarray, np.ndarray]:
    """Scale distances by the detection range (goal distance by the reward range), angles by pi"""
    local = obs.local
    o_loc = np.array(
        [
            local.obstacle_distance / config.detection_range,
            local.obstacle_azimuth / math.pi,
            local.goal_distance / config.reward_range,
            local.goal_azimuth / math.pi,
        ]
    )
    neighbors = obs.neighbor_array()
    if len(neighbors):
        neighbors = neighbors / np.array([config.detection_range, math.pi, math.pi])
    return o_loc, neighbors


def collate(samples: Sequence[tuple[np.ndarray, np.ndarray]], neighbor_dim: int = 3) -> ObservationBatch:
    """Pad normalized (o_loc, neighbors) pairs into one batch"""
    width = max((len(n) for _, n in samples), default=0)
    batch = len(samples)
    o_loc = torch.tensor(np.stack([o for o, _ in samples]), dtype=DTYPE)
    neighbors = torch.zeros((batch, width, neighbor_dim), dtype=DTYPE)
    mask = torch.zeros((batch, width), dtype=torch.bool)
    for row, (_, n) in enumerate(samples):
        if len(n):
            neighbors[row, : len(n)] = torch.as_tensor(n, dtype=DTYPE)
            mask[row, : len(n)] = True
    return ObservationBatch(o_loc=o_loc, neighbors=neighbors, mask=mask)


def embed(
    o_loc: torch.Tensor,
    neighbors: torch.Tensor,
    mask: torch.Tensor,
    net: PolicyNetwork,
    uniform_weights: bool | None = None,
) -> EmbeddingActivations:
    """
    Encode a variable-size neighbor set into a fixed-length context vector

    Args:
        uniform_weights: Replace softmax attention with 1/|N| weights (the mean-embedding
            variant); defaults to the network's own kind
    """
    if uniform_weights is None:
        uniform_weights = not net.arch.attention

    batch, width = mask.shape
    local = o_loc.unsqueeze(1).expand(batch, width, o_loc.shape[-1])
    e = torch.relu(net.encoder_e(torch.cat([local, neighbors], dim=-1)))
    h = torch.relu(net.encoder_h(e))

    maskf = mask.to(DTYPE)
    count = maskf.sum(dim=1, keepdim=True)
    mean_embedding = (e * maskf.unsqueeze(-1)).sum(dim=1) / count.clamp(min=1.0)

    paired = torch.cat([e, mean_embedding.unsqueeze(1).expand_as(e)], dim=-1)
    scores = torch.relu(net.score_b(paired)).squeeze(-1)

    if uniform_weights:
        weights = maskf / count.clamp(min=1.0)
    else:
        has_neighbors = mask.any(dim=1, keepdim=True)
        logits = scores.masked_fill(~mask, float("-inf")).masked_fill(~has_neighbors, 0.0)
        weights = torch.softmax(logits, dim=1) * maskf

    context = (weights.unsqueeze(-1) * h).sum(dim=1)
    joint = torch.cat([o_loc, context], dim=-1)
    return EmbeddingActivations(e, h, scores, mean_embedding, weights, context, joint)


def actor_forward(joint: torch.Tensor, net: PolicyNetwork) -> ActionDistribution:
    logits = net.actor_mean(net.actor_trunk(joint))
    mean = net.action_low + (net.action_high - net.action_low) * torch.sigmoid(logits)
    std = torch.exp(net.log_std).expand_as(mean)
    return ActionDistribution(mean=mean, std=std, low=net.action_low, high=net.action_high)


def critic_forward(joint: torch.Tensor, net: PolicyNetwork) -> torch.Tensor:
    return net.value_head(net.critic_trunk(joint)).squeeze(-1)


def evaluate(net: PolicyNetwork, batch: ObservationBatch) -> tuple[ActionDistribution, torch.Tensor]:
    """Shared embedding, then both heads"""
    activations = embed(batch.o_loc, batch.neighbors, batch.mask, net)
    return actor_forward(activations.joint, net), critic_forward(activations.joint, net)


def sample_action(
    dist: ActionDistribution,
    generator: torch.Generator | None,
    deterministic: bool = False,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Draw (clipped action, pre-clip sample, log-density of the pre-clip sample)

    Deterministic mode returns the mean with its log-density.
    """
    if deterministic:
        raw = dist.mean
    else:
        noise = torch.randn(dist.mean.shape, generator=generator, dtype=DTYPE)
        raw = dist.mean + dist.std * noise
    action = torch.minimum(torch.maximum(raw, dist.low.expand_as(raw)), dist.high.expand_as(raw))
    return action, raw, dist.log_prob(raw)


def backward(
    loss: torch.Tensor, parameters: Mapping[str, torch.Tensor] | nn.Module
) -> dict[str, torch.Tensor]:
    """Exact reverse-mode gradients of a scalar loss with respect to named parameters"""
    if isinstance(parameters, nn.Module):
        parameters = dict(parameters.named_parameters())
    if loss.numel() != 1:
        raise UnsupportedNodeError(f"loss must be a scalar, got shape {tuple(loss.shape)}")
    if loss.grad_fn is None:
        raise UnsupportedNodeError("loss was not produced through recorded operations")

    names = list(parameters)
    grads = torch.autograd.grad(
        loss.reshape(()), [parameters[n] for n in names], allow_unused=True
    )
    return {
        name: torch.zeros_like(parameters[name]) if grad is None else grad
        for name, grad in zip(names, grads)
    }
