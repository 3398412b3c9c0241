"""
Path-length and smoothness metrics over episode traces.

Velocities come from actual per-step displacements. A robot stops contributing
once it reaches its goal or collides; its partial path still counts toward the
traveling distance and it is flagged in the per-robot breakdown.
"""

from dataclasses import dataclass, field

import numpy as np

from src.engine.world import Status
from src.evaluation.traces import EpisodeTrace
from src.utils.errors import TraceFormatError


@dataclass
class MetricsReport:
    traveling_distance: float
    smoothness: float
    success_rate: float
    collision_rate: float
    steps: int
    per_robot: list[dict] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        """True when at least one robot did not reach its goal"""
        return self.success_rate < 1.0


def _displacements(trace: EpisodeTrace) -> np.ndarray:
    return np.diff(trace.full_positions(), axis=0)


def path_lengths(trace: EpisodeTrace) -> np.ndarray:
    if trace.step_count == 0:
        return np.zeros(trace.n_robots)
    return np.linalg.norm(_displacements(trace), axis=2).sum(axis=0)


def traveling_distance(trace: EpisodeTrace) -> float:
    """Mean over robots of the summed per-step displacement lengths"""
    if trace.n_robots == 0:
        raise TraceFormatError("trace has no robots")
    return float(path_lengths(trace).mean())


def motion_smoothness(trace: EpisodeTrace) -> float:
    """Sum over robots and steps of |dv| / |v|, divided by the step count T"""
    steps = trace.step_count
    if steps < 2:
        raise TraceFormatError("motion smoothness needs a trace of at least two steps")

    velocities = _displacements(trace) / trace.timestep
    speeds = np.linalg.norm(velocities, axis=2)
    total = 0.0
    for robot in range(trace.n_robots):
        for t in range(steps - 1):
            # a step without a successor velocity (the terminal one) contributes nothing
            if speeds[t, robot] == 0.0 or speeds[t + 1, robot] == 0.0:
                continue
            change = np.linalg.norm(velocities[t + 1, robot] - velocities[t, robot])
            total += change / speeds[t, robot]
    return float(total / steps)


def evaluate_trace(trace: EpisodeTrace) -> MetricsReport:
    finals = trace.final_statuses()
    lengths = path_lengths(trace)
    n = trace.n_robots
    per_robot = [
        {
            "robot": i,
            "path_length": float(lengths[i]),
            "start_goal_dist": float(np.linalg.norm(trace.goals[i] - trace.starts[i])),
            "status": finals[i].value,
        }
        for i in range(n)
    ]
    return MetricsReport(
        traveling_distance=traveling_distance(trace),
        smoothness=motion_smoothness(trace) if trace.step_count >= 2 else 0.0,
        success_rate=finals.count(Status.REACHED) / n,
        collision_rate=finals.count(Status.COLLIDED) / n,
        steps=trace.step_count,
        per_robot=per_robot,
    )
