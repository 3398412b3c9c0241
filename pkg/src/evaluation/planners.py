"""
Planners turn a world snapshot into one unit heading per active robot.

  rpf_attention   policy picks (eta, lambda) per robot, the force field picks the heading
  rpf_mean_embed  same, with uniform neighbor weights instead of attention
  vanilla_apf     fixed eta = 0.05, lambda = 2
  ppo_steer       policy picks a steering value a in [-2.5, 2.5] applied to the velocity
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from src.config import ApfConfig, PlannerKind
from src.engine.apf import ApfParams, ForceBreakdown, resolve_direction
from src.engine.geometry import heading_vector, normalize, rotate_ccw
from src.engine.world import WorldState, observe
from src.learning.checkpoint import load_checkpoint
from src.learning.policy import PolicyNetwork, collate, evaluate, normalize_observation, sample_action
from src.utils.errors import ArchMismatchError, DegenerateGeometryError

logger = logging.getLogger(__name__)

VANILLA_GAINS = ApfParams(eta=0.05, lam=2.0)


def ppo_steer_direction(velocity: np.ndarray, steer: float) -> np.ndarray:
    """normalize(v + a * v_perp) with v_perp the velocity rotated by +90 degrees"""
    velocity = np.asarray(velocity, dtype=float)
    if float(np.linalg.norm(velocity)) == 0.0:
        raise DegenerateGeometryError("steering needs a non-zero velocity")
    return normalize(velocity + steer * rotate_ccw(velocity), "steered velocity")


def apf_command(
    world: WorldState, robot_id: int, params: ApfParams, config: ApfConfig
) -> ForceBreakdown:
    """Resolve the force field for one active robot from ground-truth geometry"""
    robot = world.robots[robot_id]
    obs = observe(world, robot_id)
    neighbors = np.array([world.robots[n.robot_id].position for n in obs.neighbors]).reshape(-1, 2)

    nearest = world.nearest_obstacle(robot.position)
    obstacle = None
    if nearest is not None:
        index = nearest[0]
        obstacle = (world.obstacle_centers[index], float(world.obstacle_radii[index]))

    return resolve_direction(
        robot.position, robot.goal, obstacle, neighbors, robot.heading, params, config
    )


@dataclass
class PolicyRecord:
    """What the learner needs to replay a decision"""

    o_loc: np.ndarray
    neighbors: np.ndarray
    raw_action: np.ndarray
    log_prob: float
    value: float


@dataclass
class Decision:
    commands: dict[int, np.ndarray] = field(default_factory=dict)
    actions: dict[int, np.ndarray] = field(default_factory=dict)
    records: dict[int, PolicyRecord] = field(default_factory=dict)
    regimes: dict[int, str] = field(default_factory=dict)


@dataclass
class Planner:
    kind: PlannerKind
    apf_config: ApfConfig = field(default_factory=ApfConfig)
    network: PolicyNetwork | None = None
    gains: ApfParams = VANILLA_GAINS
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or self.kind

    @property
    def learned(self) -> bool:
        return self.kind != "vanilla_apf"

    @classmethod
    def vanilla_apf(cls, apf_config: ApfConfig | None = None) -> "Planner":
        return cls(kind="vanilla_apf", apf_config=apf_config or ApfConfig())

    @classmethod
    def from_checkpoint(
        cls, kind: PlannerKind, path: str | Path, apf_config: ApfConfig | None = None
    ) -> "Planner":
        checkpoint = load_checkpoint(path)
        if checkpoint.arch.kind != kind:
            raise ArchMismatchError(
                f"checkpoint {path} was trained as {checkpoint.arch.kind}, not {kind}"
            )
        logger.info(f"Loaded {kind} planner from {path} (episode {checkpoint.episode})")
        return cls(kind=kind, apf_config=apf_config or ApfConfig(), network=checkpoint.network)

    def decide(
        self,
        world: WorldState,
        generator: torch.Generator | None = None,
        deterministic: bool = True,
    ) -> Decision:
        decision = Decision()
        active = world.active_ids()
        if not active:
            return decision

        if not self.learned:
            for robot_id in active:
                forces = apf_command(world, robot_id, self.gains, self.apf_config)
                decision.commands[robot_id] = forces.resolved
                decision.actions[robot_id] = np.array([self.gains.eta, self.gains.lam])
                decision.regimes[robot_id] = forces.regime.value
            return decision

        features = [normalize_observation(observe(world, i), world.config) for i in active]
        with torch.no_grad():
            dist, values = evaluate(self.network, collate(features))
            actions, raw, log_probs = sample_action(dist, generator, deterministic)

        for row, robot_id in enumerate(active):
            action = actions[row].numpy().copy()
            decision.actions[robot_id] = action
            decision.records[robot_id] = PolicyRecord(
                o_loc=features[row][0],
                neighbors=features[row][1],
                raw_action=raw[row].numpy().copy(),
                log_prob=float(log_probs[row]),
                value=float(values[row]),
            )
            robot = world.robots[robot_id]
            if self.kind == "ppo_steer":
                velocity = world.config.desired_speed * heading_vector(robot.heading)
                decision.commands[robot_id] = ppo_steer_direction(velocity, float(action[0]))
                decision.regimes[robot_id] = "steer"
            else:
                params = ApfParams(eta=float(action[0]), lam=float(action[1]))
                forces = apf_command(world, robot_id, params, self.apf_config)
                decision.commands[robot_id] = forces.resolved
                decision.regimes[robot_id] = forces.regime.value
        return decision

    def value_of(self, world: WorldState, robot_id: int) -> float:
        """Critic estimate for an active robot's current observation"""
        features = [normalize_observation(observe(world, robot_id), world.config)]
        with torch.no_grad():
            _, values = evaluate(self.network, collate(features))
        return float(values[0])


def build_planner(
    kind: PlannerKind,
    checkpoints: dict[str, str],
    apf_config: ApfConfig,
) -> Planner:
    if kind == "vanilla_apf":
        return Planner.vanilla_apf(apf_config)
    if kind not in checkpoints:
        raise FileNotFoundError(f"no checkpoint given for planner {kind}")
    return Planner.from_checkpoint(kind, checkpoints[kind], apf_config)
