"""
Parameter-shared PPO: rollout buffer, generalized advantage estimation, the
clipped surrogate loss and the Adam update.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable

import numpy as np
import torch

from src.config import PpoConfig
from src.learning.policy import DTYPE, ObservationBatch, PolicyNetwork, backward, collate, evaluate
from src.utils.errors import NumericalDivergenceError

logger = logging.getLogger(__name__)


@dataclass
class Transition:
    robot_id: int
    o_loc: np.ndarray
    neighbors: np.ndarray
    action: np.ndarray
    raw_action: np.ndarray
    log_prob: float
    reward: float
    value: float
    done: bool
    step_index: int
    # filled when the window closes
    advantage: float = 0.0
    ret: float = 0.0


@dataclass
class PpoBatch:
    observations: ObservationBatch
    raw_actions: torch.Tensor
    old_log_probs: torch.Tensor
    advantages: torch.Tensor
    returns: torch.Tensor

    def __len__(self) -> int:
        return len(self.observations)


@dataclass
class LossComponents:
    policy: float
    value: float
    entropy: float
    total: float
    max_ratio_deviation: float


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    total_loss: float
    grad_norm: float
    n_samples: int
    lr: float


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    tau: float,
    bootstrap_value: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Advantages and returns for one robot's temporally ordered transitions

    The value after the last transition is `bootstrap_value` unless that transition
    is terminal. Advantages are returned unstandardized; see `standardize`.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if len(rewards) == 0:
        raise ValueError("compute_gae needs at least one transition")

    advantages = np.zeros_like(rewards)
    next_value = bootstrap_value
    running = 0.0
    for t in reversed(range(len(rewards))):
        not_done = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        running = delta + gamma * tau * not_done * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


def standardize(advantages: np.ndarray) -> np.ndarray:
    if len(advantages) < 2:
        return advantages - advantages.mean()
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def lr_schedule(lr_initial: float, decay: float, episode: int) -> float:
    return lr_initial * decay**episode


class RolloutBuffer:
    """Per-robot transition sequences collected between two updates"""

    def __init__(self):
        self.sequences: dict[Hashable, list[Transition]] = defaultdict(list)

    def add(self, key: Hashable, transition: Transition) -> None:
        self.sequences[key].append(transition)

    def __len__(self) -> int:
        return sum(len(seq) for seq in self.sequences.values())

    def finish(self, bootstrap: Callable[[Hashable], float], gamma: float, tau: float) -> None:
        """Compute advantages/returns; `bootstrap(key)` values unfinished sequences"""
        for key, seq in self.sequences.items():
            last_value = 0.0 if seq[-1].done else bootstrap(key)
            advantages, returns = compute_gae(
                np.array([t.reward for t in seq]),
                np.array([t.value for t in seq]),
                np.array([t.done for t in seq]),
                gamma,
                tau,
                last_value,
            )
            for transition, advantage, ret in zip(seq, advantages, returns):
                transition.advantage = float(advantage)
                transition.ret = float(ret)

    def to_batch(self) -> PpoBatch:
        transitions = [t for seq in self.sequences.values() for t in seq]
        advantages = standardize(np.array([t.advantage for t in transitions]))
        return PpoBatch(
            observations=collate([(t.o_loc, t.neighbors) for t in transitions]),
            raw_actions=torch.tensor(np.stack([t.raw_action for t in transitions]), dtype=DTYPE),
            old_log_probs=torch.tensor([t.log_prob for t in transitions], dtype=DTYPE),
            advantages=torch.tensor(advantages, dtype=DTYPE),
            returns=torch.tensor([t.ret for t in transitions], dtype=DTYPE),
        )

    def flush(self) -> None:
        self.sequences.clear()


def clipped_surrogate(ratio: torch.Tensor, advantages: torch.Tensor, clip: float) -> torch.Tensor:
    """Per-sample min(r A, clip(r, 1 - eps, 1 + eps) A); never exceeds (1 + eps)|A|"""
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * advantages
    return torch.min(unclipped, clipped)


def ppo_loss(
    batch: PpoBatch,
    net: PolicyNetwork,
    clip: float,
    value_coef: float,
    entropy_coef: float,
) -> tuple[torch.Tensor, LossComponents]:
    dist, values = evaluate(net, batch.observations)
    new_log_probs = dist.log_prob(batch.raw_actions)
    ratio = torch.exp(new_log_probs - batch.old_log_probs)
    if not torch.isfinite(ratio).all():
        raise NumericalDivergenceError("probability ratio became non-finite")

    policy_loss = -clipped_surrogate(ratio, batch.advantages, clip).mean()
    value_loss = ((values - batch.returns) ** 2).mean()
    entropy = dist.entropy().mean()

    loss = policy_loss + value_coef * value_loss - entropy_coef * entropy
    components = LossComponents(
        policy=policy_loss.item(),
        value=value_loss.item(),
        entropy=entropy.item(),
        total=loss.item(),
        max_ratio_deviation=(ratio - 1.0).abs().max().item(),
    )
    return loss, components


def update(
    net: PolicyNetwork,
    buffer: RolloutBuffer,
    config: PpoConfig,
    optimizer: torch.optim.Optimizer,
    lr: float,
) -> UpdateStats:
    """
    K epochs of full-batch gradient descent over every robot's transitions

    Parameters are rolled back to their pre-update values when a loss or
    gradient norm turns non-finite, and NumericalDivergenceError is raised.
    """
    if len(buffer) == 0:
        raise ValueError("update needs at least one transition")

    batch = buffer.to_batch()
    for group in optimizer.param_groups:
        group["lr"] = lr

    params = dict(net.named_parameters())
    last_good = {name: p.detach().clone() for name, p in params.items()}

    try:
        for _ in range(config.epochs):
            loss, components = ppo_loss(
                batch, net, config.clip, config.value_coef, config.entropy_coef
            )
            if not math.isfinite(components.total):
                raise NumericalDivergenceError("PPO loss became non-finite")

            grads = backward(loss, params)
            optimizer.zero_grad(set_to_none=True)
            for name, param in params.items():
                param.grad = grads[name]
            grad_norm = float(torch.nn.utils.clip_grad_norm_(net.parameters(), config.max_grad_norm))
            if not math.isfinite(grad_norm):
                raise NumericalDivergenceError("gradient norm became non-finite")
            optimizer.step()
    except NumericalDivergenceError:
        with torch.no_grad():
            for name, param in params.items():
                param.copy_(last_good[name])
        logger.error("PPO update diverged; parameters restored to their last finite values")
        raise
    finally:
        buffer.flush()

    stats = UpdateStats(
        policy_loss=components.policy,
        value_loss=components.value,
        entropy=components.entropy,
        total_loss=components.total,
        grad_norm=grad_norm,
        n_samples=len(batch),
        lr=lr,
    )
    logger.info(
        f"PPO update: samples={stats.n_samples} | loss={stats.total_loss:.4f} | "
        f"policy={stats.policy_loss:.4f} | value={stats.value_loss:.4f} | "
        f"entropy={stats.entropy:.4f} | grad_norm={stats.grad_norm:.4f} | lr={lr:.3e}"
    )
    return stats
