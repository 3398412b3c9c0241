"""
Scenario definitions, seeded generation and the JSON scenario file format.

A scenario file is a JSON object:

    {
      "kind": "cluttered" | "circle_swap",
      "robots": [{"start": [x, y], "goal": [x, y]}, ...],
      "obstacles": [{"center": [x, y], "radius": R}, ...],
      "circle_radius": 2.0 | null,
      "bounds": [xmin, ymin, xmax, ymax] | null,
      "name": "circle8" | null
    }

Floats are written with their shortest round-trip representation, so
load(save(s)) == s.
"""

import itertools
import logging
import math
from pathlib import Path
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.utils.errors import MalformedScenarioError, OvercrowdedArenaError

logger = logging.getLogger(__name__)

ScenarioKind = Literal["cluttered", "circle_swap"]
Point = tuple[float, float]


class Obstacle(BaseModel):
    model_config = ConfigDict(frozen=True)

    center: Point
    radius: float = Field(gt=0)


class RobotTask(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: Point
    goal: Point


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: ScenarioKind
    robots: tuple[RobotTask, ...]
    obstacles: tuple[Obstacle, ...] = ()
    circle_radius: float | None = None
    bounds: tuple[float, float, float, float] | None = None
    name: str | None = None

    @property
    def n_robots(self) -> int:
        return len(self.robots)


def _distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def validate_scenario(scenario: Scenario, safe_radius: float) -> None:
    """Raise MalformedScenarioError unless starts/goals are separated and clear of obstacles"""
    if not scenario.robots:
        raise MalformedScenarioError("scenario has no robots")

    for label in ("start", "goal"):
        points = [getattr(task, label) for task in scenario.robots]
        for (i, a), (j, b) in itertools.combinations(enumerate(points), 2):
            if _distance(a, b) <= 2 * safe_radius:
                raise MalformedScenarioError(
                    f"{label}s of robots {i} and {j} are closer than 2r ({_distance(a, b):.4f} m)"
                )

    for i, task in enumerate(scenario.robots):
        if _distance(task.start, task.goal) <= safe_radius:
            raise MalformedScenarioError(f"robot {i} starts within its goal radius")
        for label in ("start", "goal"):
            point = getattr(task, label)
            for k, obstacle in enumerate(scenario.obstacles):
                if _distance(point, obstacle.center) < obstacle.radius + safe_radius:
                    raise MalformedScenarioError(
                        f"{label} of robot {i} lies inside obstacle {k} inflated by r"
                    )


class _AttemptBudget:
    """Shared rejection-sampling budget; exhausting it means the arena is overcrowded"""

    def __init__(self, max_attempts: int, what: str):
        self.remaining = max_attempts
        self.what = what

    def spend(self) -> None:
        self.remaining -= 1
        if self.remaining < 0:
            raise OvercrowdedArenaError(f"could not place {self.what} within the attempt budget")


def _sample_obstacles(
    rng: np.random.Generator,
    count: int,
    radius: float | tuple[float, float],
    half_width: float,
    gap: float,
    budget: _AttemptBudget,
) -> list[Obstacle]:
    obstacles: list[Obstacle] = []
    while len(obstacles) < count:
        budget.spend()
        if isinstance(radius, tuple):
            r_obs = float(rng.uniform(radius[0], radius[1]))
        else:
            r_obs = float(radius)
        limit = half_width - r_obs
        if limit <= 0:
            continue
        center = (float(rng.uniform(-limit, limit)), float(rng.uniform(-limit, limit)))
        if all(
            _distance(center, other.center) >= r_obs + other.radius + gap for other in obstacles
        ):
            obstacles.append(Obstacle(center=center, radius=r_obs))
    return obstacles


def _sample_free_point(
    rng: np.random.Generator,
    half_width: float,
    obstacles: list[Obstacle],
    taken: list[Point],
    min_gap: float,
    obstacle_margin: float,
    budget: _AttemptBudget,
    reference: Point | None = None,
    min_travel: float = 0.0,
) -> Point:
    while True:
        budget.spend()
        point = (
            float(rng.uniform(-half_width, half_width)),
            float(rng.uniform(-half_width, half_width)),
        )
        if any(_distance(point, o.center) < o.radius + obstacle_margin for o in obstacles):
            continue
        if any(_distance(point, other) <= min_gap for other in taken):
            continue
        if reference is not None and _distance(point, reference) < min_travel:
            continue
        return point


def sample_scenario(
    kind: ScenarioKind,
    n_robots: int,
    seed: int,
    *,
    safe_radius: float = 0.1,
    circle_radius: float = 2.0,
    half_width: float = 5.0,
    n_obstacles: int = 12,
    obstacle_radius: float | tuple[float, float] = 0.5,
    shrink_obstacles_to: float | None = None,
    clearance: float = 0.3,
    min_travel: float = 2.0,
    max_attempts: int = 5000,
) -> Scenario:
    """
    Generate a scenario deterministically from a seed

    Args:
        kind: "circle_swap" places robots evenly on a circle with a random phase and
            antipodal goals; "cluttered" scatters obstacles, starts and goals in a square
        n_robots: Number of robots (>= 1)
        seed: Seed of the numpy Generator driving every random choice
        shrink_obstacles_to: Keep the sampled obstacle locations but give every
            obstacle this radius (the steering baseline trains this way)
        max_attempts: Rejection-sampling budget shared by all placements
    """
    if n_robots < 1:
        raise MalformedScenarioError("n_robots must be at least 1")

    rng = np.random.default_rng(seed)

    if kind == "circle_swap":
        if n_robots > 1 and 2 * circle_radius * math.sin(math.pi / n_robots) <= 2 * safe_radius:
            raise OvercrowdedArenaError(
                f"{n_robots} robots do not fit on a circle of radius {circle_radius} m"
            )
        phase = float(rng.uniform(0.0, 2 * math.pi / n_robots))
        robots = []
        for k in range(n_robots):
            angle = phase + 2 * math.pi * k / n_robots
            start = (circle_radius * math.cos(angle), circle_radius * math.sin(angle))
            robots.append(RobotTask(start=start, goal=(-start[0], -start[1])))
        margin = circle_radius + 1.0
        scenario = Scenario(
            kind=kind,
            robots=tuple(robots),
            circle_radius=circle_radius,
            bounds=(-margin, -margin, margin, margin),
        )
    elif kind == "cluttered":
        budget = _AttemptBudget(max_attempts, f"{n_obstacles} obstacles and {n_robots} robots")
        obstacles = _sample_obstacles(
            rng, n_obstacles, obstacle_radius, half_width, 4 * safe_radius, budget
        )
        if shrink_obstacles_to is not None:
            obstacles = [Obstacle(center=o.center, radius=shrink_obstacles_to) for o in obstacles]

        margin = safe_radius + clearance
        starts: list[Point] = []
        goals: list[Point] = []
        for _ in range(n_robots):
            start = _sample_free_point(
                rng, half_width, obstacles, starts, 2 * safe_radius + clearance, margin, budget
            )
            goal = _sample_free_point(
                rng,
                half_width,
                obstacles,
                goals,
                2 * safe_radius + clearance,
                margin,
                budget,
                reference=start,
                min_travel=min(min_travel, half_width),
            )
            starts.append(start)
            goals.append(goal)

        scenario = Scenario(
            kind=kind,
            robots=tuple(RobotTask(start=s, goal=g) for s, g in zip(starts, goals)),
            obstacles=tuple(obstacles),
            bounds=(-half_width, -half_width, half_width, half_width),
        )
    else:
        raise MalformedScenarioError(f"unknown scenario kind: {kind}")

    validate_scenario(scenario, safe_radius)
    return scenario


def _deadlock(seed: int, n_robots: int | None) -> Scenario:
    return Scenario(
        kind="cluttered",
        robots=(RobotTask(start=(0.0, 0.0), goal=(6.0, 0.0)),),
        obstacles=(Obstacle(center=(3.0, 0.0), radius=0.5),),
        bounds=(-1.0, -3.5, 7.0, 3.5),
    )


PRESETS: dict[str, Callable[[int, int | None], Scenario]] = {
    "circle4": lambda seed, n: sample_scenario("circle_swap", n or 4, seed, circle_radius=2.0),
    "circle6": lambda seed, n: sample_scenario("circle_swap", n or 6, seed, circle_radius=2.0),
    "circle8": lambda seed, n: sample_scenario("circle_swap", n or 8, seed, circle_radius=3.0),
    "circle8_wide": lambda seed, n: sample_scenario(
        "circle_swap", n or 8, seed, circle_radius=8.0
    ),
    "cluttered": lambda seed, n: sample_scenario("cluttered", n or 6, seed),
    "cluttered_small": lambda seed, n: sample_scenario(
        "cluttered", n or 6, seed, shrink_obstacles_to=0.1
    ),
    "lab": lambda seed, n: sample_scenario(
        "cluttered", n or 3, seed, n_obstacles=12, obstacle_radius=(0.1, 0.5)
    ),
    "deadlock": _deadlock,
}


def preset_scenario(name: str, seed: int, n_robots: int | None = None) -> Scenario:
    if name not in PRESETS:
        raise MalformedScenarioError(
            f"unknown scenario preset '{name}' (choose from {', '.join(sorted(PRESETS))})"
        )
    return PRESETS[name](seed, n_robots).model_copy(update={"name": name})


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(scenario.model_dump_json(indent=2), encoding="utf-8")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scenario file {path} does not exist")
    try:
        return Scenario.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise MalformedScenarioError(f"scenario file {path} is malformed: {e}") from e
