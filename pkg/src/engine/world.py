"""
Deterministic 2D multi-robot world: first-order point-mass kinematics,
range-limited sensing, collision/goal bookkeeping and the shaped reward.

A WorldState has a single writer (the episode loop calling `step`); use
`WorldState.snapshot()` to hand read-only copies to other consumers.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.config import WorldConfig
from src.engine.geometry import local_azimuth, normalize, vector_angle, wrap_angle
from src.engine.scenario import Scenario, validate_scenario
from src.utils.errors import InactiveRobotError, MalformedCommandError

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-6
SMOOTHNESS_LIMIT = math.pi / 4


class Status(str, Enum):
    ACTIVE = "active"
    REACHED = "reached"
    COLLIDED = "collided"


@dataclass
class RobotState:
    position: np.ndarray
    heading: float
    goal: np.ndarray
    start_goal_dist: float
    step_length: float
    status: Status = Status.ACTIVE
    steps_moved: int = 0

    @property
    def path_length(self) -> float:
        # integer step count keeps d_a exactly k * v * dt
        return self.steps_moved * self.step_length

    @property
    def goal_distance(self) -> float:
        return float(np.linalg.norm(self.goal - self.position))


@dataclass
class WorldState:
    config: WorldConfig
    robots: list[RobotState]
    obstacle_centers: np.ndarray
    obstacle_radii: np.ndarray
    step_count: int = 0

    def snapshot(self) -> "WorldState":
        return copy.deepcopy(self)

    def active_ids(self) -> list[int]:
        return [i for i, robot in enumerate(self.robots) if robot.status is Status.ACTIVE]

    @property
    def done(self) -> bool:
        return not self.active_ids() or self.step_count >= self.config.max_steps

    def nearest_obstacle(self, position: np.ndarray) -> tuple[int, float] | None:
        """(index, surface distance) of the nearest obstacle; ties go to the lowest index"""
        if len(self.obstacle_radii) == 0:
            return None
        surface = np.linalg.norm(self.obstacle_centers - position, axis=1) - self.obstacle_radii
        index = int(np.argmin(surface))
        return index, float(surface[index])

    def obstacle_distance(self, robot_id: int) -> float:
        nearest = self.nearest_obstacle(self.robots[robot_id].position)
        return math.inf if nearest is None else nearest[1]


@dataclass(frozen=True)
class LocalFeatures:
    obstacle_distance: float
    obstacle_azimuth: float
    goal_distance: float
    goal_azimuth: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.obstacle_distance, self.obstacle_azimuth, self.goal_distance, self.goal_azimuth]
        )


@dataclass(frozen=True)
class NeighborFeature:
    robot_id: int
    distance: float
    azimuth: float
    relative_heading: float

    def as_array(self) -> np.ndarray:
        return np.array([self.distance, self.azimuth, self.relative_heading])


@dataclass(frozen=True)
class Observation:
    local: LocalFeatures
    neighbors: tuple[NeighborFeature, ...] = ()

    def neighbor_array(self) -> np.ndarray:
        if not self.neighbors:
            return np.zeros((0, 3))
        return np.stack([n.as_array() for n in self.neighbors])


@dataclass
class StepOutcome:
    step_count: int
    transitions: dict[int, Status] = field(default_factory=dict)


@dataclass(frozen=True)
class RewardBreakdown:
    arrival: float
    smoothness: float
    obstacle: float
    progress: float

    @property
    def total(self) -> float:
        return self.arrival + self.smoothness + self.obstacle + self.progress


def build_world(config: WorldConfig, scenario: Scenario) -> WorldState:
    """Place every robot at its start, heading toward its goal"""
    validate_scenario(scenario, config.safe_radius)

    robots = []
    for task in scenario.robots:
        start = np.array(task.start, dtype=float)
        goal = np.array(task.goal, dtype=float)
        robots.append(
            RobotState(
                position=start,
                heading=vector_angle(goal - start),
                goal=goal,
                start_goal_dist=float(np.linalg.norm(goal - start)),
                step_length=config.step_length,
            )
        )

    if scenario.obstacles:
        centers = np.array([o.center for o in scenario.obstacles], dtype=float)
        radii = np.array([o.radius for o in scenario.obstacles], dtype=float)
    else:
        centers, radii = np.zeros((0, 2)), np.zeros(0)

    return WorldState(config=config, robots=robots, obstacle_centers=centers, obstacle_radii=radii)


def observe(world: WorldState, robot_id: int) -> Observation:
    robot = world.robots[robot_id]
    if robot.status is not Status.ACTIVE:
        raise InactiveRobotError(f"robot {robot_id} is {robot.status.value}")

    d_r = world.config.detection_range
    nearest = world.nearest_obstacle(robot.position)
    if nearest is None or nearest[1] > d_r:
        d_o, phi_o = d_r, 0.0
    else:
        index, surface = nearest
        d_o = min(max(surface, 0.0), d_r)
        phi_o = local_azimuth(robot.position, world.obstacle_centers[index], robot.heading)

    local = LocalFeatures(
        obstacle_distance=d_o,
        obstacle_azimuth=phi_o,
        goal_distance=robot.goal_distance,
        goal_azimuth=local_azimuth(robot.position, robot.goal, robot.heading),
    )

    neighbors = []
    for j in world.active_ids():
        if j == robot_id:
            continue
        other = world.robots[j]
        distance = float(np.linalg.norm(other.position - robot.position))
        if 0.0 < distance < d_r:
            neighbors.append(
                NeighborFeature(
                    robot_id=j,
                    distance=distance,
                    azimuth=local_azimuth(robot.position, other.position, robot.heading),
                    relative_heading=wrap_angle(other.heading - robot.heading),
                )
            )
    neighbors.sort(key=lambda n: (n.distance, n.robot_id))
    return Observation(local=local, neighbors=tuple(neighbors))


def step(world: WorldState, commanded_headings: dict[int, np.ndarray]) -> StepOutcome:
    """Advance every active robot by v*dt along its unit command, then settle statuses"""
    active = world.active_ids()
    for robot_id in commanded_headings:
        if robot_id not in active:
            raise InactiveRobotError(f"command issued to non-active robot {robot_id}")
    missing = [i for i in active if i not in commanded_headings]
    if missing:
        raise MalformedCommandError(f"no command for active robots {missing}")

    directions = {}
    for robot_id in active:
        command = np.asarray(commanded_headings[robot_id], dtype=float)
        if command.shape != (2,) or abs(float(np.linalg.norm(command)) - 1.0) > UNIT_TOLERANCE:
            raise MalformedCommandError(f"command for robot {robot_id} is not a unit 2-vector")
        directions[robot_id] = normalize(command, "command")

    cfg = world.config
    for robot_id in active:
        robot = world.robots[robot_id]
        robot.position = robot.position + cfg.step_length * directions[robot_id]
        robot.heading = vector_angle(directions[robot_id])
        robot.steps_moved += 1
    world.step_count += 1

    outcome = StepOutcome(step_count=world.step_count)

    # collisions are judged on the pre-transition statuses so both active parties of a pair
    # collide; a robot parked at its goal blocks others but stays reached
    candidates = [i for i, robot in enumerate(world.robots) if robot.status is not Status.COLLIDED]
    collided = set()
    for robot_id in active:
        robot = world.robots[robot_id]
        if world.obstacle_distance(robot_id) < cfg.safe_radius:
            collided.add(robot_id)
        for j in candidates:
            if j == robot_id:
                continue
            if np.linalg.norm(world.robots[j].position - robot.position) < 2 * cfg.safe_radius:
                collided.add(robot_id)
                if j in active:
                    collided.add(j)

    for robot_id in sorted(collided):
        world.robots[robot_id].status = Status.COLLIDED
        outcome.transitions[robot_id] = Status.COLLIDED

    for robot_id in active:
        robot = world.robots[robot_id]
        if robot.status is Status.ACTIVE and robot.goal_distance < cfg.safe_radius:
            robot.status = Status.REACHED
            outcome.transitions[robot_id] = Status.REACHED

    if outcome.transitions:
        logger.debug(
            f"Step {world.step_count}: "
            + ", ".join(f"robot {i} {s.value}" for i, s in sorted(outcome.transitions.items()))
        )
    return outcome


def reward(world_before: WorldState, world_after: WorldState, robot_id: int) -> RewardBreakdown:
    before = world_before.robots[robot_id]
    after = world_after.robots[robot_id]
    if before.status is not Status.ACTIVE:
        raise InactiveRobotError(f"robot {robot_id} was not active before the step")

    cfg = world_after.config
    r = cfg.safe_radius

    arrival = 0.0
    if after.status is Status.REACHED:
        arrival = 300.0 - 100.0 * after.path_length / after.start_goal_dist

    smoothness = -5.0 if abs(wrap_angle(after.heading - before.heading)) > SMOOTHNESS_LIMIT else 0.0

    d_o = world_after.obstacle_distance(robot_id)
    if d_o < r:
        obstacle = -100.0
    elif d_o < 2 * r:
        obstacle = -20.0
    else:
        obstacle = 0.0

    d_g = after.goal_distance
    progress = 1.0 - d_g / cfg.reward_range if d_g < cfg.reward_range else 0.0

    return RewardBreakdown(arrival=arrival, smoothness=smoothness, obstacle=obstacle, progress=progress)
