"""
Training loop: every unfinished robot queries the shared policy, the planner
turns its action into a heading, the world steps, and every Z timesteps of an
episode the shared policy is updated on the transitions of all robots.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import pandas as pd
import torch

from src.config import ApfConfig, NetArch, PpoConfig, WorldConfig
from src.engine.scenario import Scenario, ScenarioKind, sample_scenario
from src.engine.world import Status, build_world, reward, step
from src.evaluation.planners import Planner
from src.learning.checkpoint import make_optimizer, save_checkpoint
from src.learning.policy import PolicyNetwork, init_network
from src.learning.ppo import RolloutBuffer, Transition, UpdateStats, lr_schedule, update
from src.utils.errors import NumericalDivergenceError

logger = logging.getLogger(__name__)

LOG_COLUMNS = [
    "episode",
    "return_mean",
    "success_rate",
    "collision_rate",
    "steps",
    "updates",
    "lr",
    "policy_loss",
    "value_loss",
    "entropy",
    "grad_norm",
]


@dataclass
class ScenarioSource:
    """Where each training episode's scenario comes from"""

    kind: ScenarioKind = "circle_swap"
    n_robots: int = 6
    fixed: Scenario | None = None
    options: dict = field(default_factory=dict)

    def for_episode(self, seed: int, episode: int, safe_radius: float) -> Scenario:
        if self.fixed is not None:
            return self.fixed
        return sample_scenario(
            self.kind,
            self.n_robots,
            seed * 100_003 + episode,
            safe_radius=safe_radius,
            **self.options,
        )


@dataclass
class TrainingResult:
    network: PolicyNetwork
    log: pd.DataFrame
    checkpoint_path: Path | None
    updates: list[UpdateStats]


def _append_log(path: Path | None, row: dict) -> None:
    if path is None:
        return
    pd.DataFrame([row], columns=LOG_COLUMNS).to_csv(
        path, mode="a", header=not path.exists(), index=False
    )


def train(
    world_config: WorldConfig,
    scenarios: ScenarioSource,
    arch: NetArch,
    ppo_config: PpoConfig,
    seed: int,
    apf_config: ApfConfig | None = None,
    output_dir: str | Path | None = None,
    on_episode: Callable[[dict], None] | None = None,
) -> TrainingResult:
    """
    Train a shared policy with PPO

    Transitions are collected in windows of `batch_interval` environment steps that
    run across episode boundaries; every full window triggers one update.

    Args:
        scenarios: Scenario kind and robot count, or a fixed scenario reused every episode
        seed: Seeds the network, the action noise and every episode's scenario
        output_dir: Receives training_log.csv and checkpoints; None keeps everything in memory
        on_episode: Called with each episode's log row
    """
    apf_config = apf_config or ApfConfig()
    network = init_network(arch, seed)
    planner = Planner(kind=arch.kind, apf_config=apf_config, network=network)
    optimizer = make_optimizer(network, ppo_config.lr_initial)
    generator = torch.Generator().manual_seed(seed)
    buffer = RolloutBuffer()

    log_path = checkpoint_path = None
    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        log_path = output_dir / "training_log.csv"
        if log_path.exists():
            log_path.unlink()
        checkpoint_path = output_dir / "checkpoint.rpf"

    rows: list[dict] = []
    env_steps = 0
    all_updates: list[UpdateStats] = []

    for episode in range(ppo_config.episodes):
        lr = lr_schedule(ppo_config.lr_initial, ppo_config.lr_decay, episode)
        scenario = scenarios.for_episode(seed, episode, world_config.safe_radius)
        world = build_world(world_config, scenario)
        returns = [0.0] * len(world.robots)
        episode_updates: list[UpdateStats] = []

        for t in range(1, world_config.max_steps + 1):
            decision = planner.decide(world, generator, deterministic=False)
            before = world.snapshot()
            step(world, decision.commands)
            env_steps += 1
            timed_out = world.step_count >= world_config.max_steps

            for robot_id, record in decision.records.items():
                breakdown = reward(before, world, robot_id)
                returns[robot_id] += breakdown.total
                finished = world.robots[robot_id].status is not Status.ACTIVE
                buffer.add(
                    (episode, robot_id),
                    Transition(
                        robot_id=robot_id,
                        o_loc=record.o_loc,
                        neighbors=record.neighbors,
                        action=decision.actions[robot_id],
                        raw_action=record.raw_action,
                        log_prob=record.log_prob,
                        reward=breakdown.total,
                        value=record.value,
                        done=finished or timed_out,
                        step_index=t,
                    ),
                )

            if env_steps % ppo_config.batch_interval == 0 and len(buffer):
                buffer.finish(
                    lambda key: planner.value_of(world, key[1]),
                    ppo_config.gamma,
                    ppo_config.gae_tau,
                )
                try:
                    stats = update(network, buffer, ppo_config, optimizer, lr)
                except NumericalDivergenceError:
                    logger.error(f"Training aborted in episode {episode} at step {t}")
                    raise
                episode_updates.append(stats)

            if not world.active_ids():
                break

        statuses = [robot.status for robot in world.robots]
        n = len(statuses)
        last = episode_updates[-1] if episode_updates else None
        row = {
            "episode": episode,
            "return_mean": sum(returns) / n,
            "success_rate": statuses.count(Status.REACHED) / n,
            "collision_rate": statuses.count(Status.COLLIDED) / n,
            "steps": world.step_count,
            "updates": len(episode_updates),
            "lr": lr,
            "policy_loss": last.policy_loss if last else math.nan,
            "value_loss": last.value_loss if last else math.nan,
            "entropy": last.entropy if last else math.nan,
            "grad_norm": last.grad_norm if last else math.nan,
        }
        rows.append(row)
        all_updates.extend(episode_updates)
        _append_log(log_path, row)
        if on_episode is not None:
            on_episode(row)

        logger.info(
            f"Episode {episode}: return={row['return_mean']:.2f} | "
            f"success={row['success_rate']:.2f} | collisions={row['collision_rate']:.2f} | "
            f"steps={row['steps']} | updates={row['updates']} | lr={lr:.3e}"
        )

        if checkpoint_path is not None and (episode + 1) % ppo_config.checkpoint_interval == 0:
            save_checkpoint(checkpoint_path, network, episode, optimizer)

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, network, ppo_config.episodes - 1, optimizer)

    return TrainingResult(
        network=network,
        log=pd.DataFrame(rows, columns=LOG_COLUMNS),
        checkpoint_path=checkpoint_path,
        updates=all_updates,
    )
