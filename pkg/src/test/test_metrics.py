import math

import numpy as np
import pytest

from src.config import WorldConfig
from src.engine.scenario import preset_scenario
from src.evaluation.bench import run_episode
from src.evaluation.metrics import evaluate_trace, motion_smoothness, path_lengths, traveling_distance
from src.evaluation.planners import Planner
from src.evaluation.traces import EpisodeTrace
from src.utils.errors import TraceFormatError


def make_trace(starts, positions, goals=None, statuses=None, timestep=0.1):
    starts = np.asarray(starts, dtype=float)
    positions = np.asarray(positions, dtype=float)
    steps, n = positions.shape[:2]
    return EpisodeTrace(
        timestep=timestep,
        speed=0.5,
        starts=starts,
        start_headings=np.zeros(n),
        goals=np.asarray(goals if goals is not None else starts + 10.0, dtype=float),
        obstacles=np.zeros((0, 3)),
        positions=positions,
        headings=np.zeros((steps, n)),
        actions=np.zeros((steps, n, 2)),
        rewards=np.zeros((steps, n)),
        statuses=np.zeros((steps, n), dtype=np.int64) if statuses is None else np.asarray(statuses),
    )


def _walk(moves, step=0.05):
    """Positions of one robot from the origin following unit moves"""
    return np.cumsum(np.asarray(moves, dtype=float) * step, axis=0)[:, None, :]


def test_straight_line_is_perfectly_smooth():
    trace = make_trace([[0.0, 0.0]], _walk([[1.0, 0.0]] * 10))
    assert motion_smoothness(trace) == pytest.approx(0.0, abs=1e-9)
    assert traveling_distance(trace) == pytest.approx(0.5)


def test_right_angle_turn():
    trace = make_trace([[0.0, 0.0]], _walk([[1.0, 0.0], [0.0, 1.0]]))
    assert motion_smoothness(trace) == pytest.approx(math.sqrt(2) / 2)


def test_doubling_the_horizon_halves_smoothness():
    short = make_trace([[0.0, 0.0]], _walk([[1.0, 0.0], [0.0, 1.0]]))
    long = make_trace([[0.0, 0.0]], _walk([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]))
    assert motion_smoothness(long) == pytest.approx(motion_smoothness(short) / 2)


def test_traveling_distance_is_mean_over_robots():
    positions = np.array(
        [
            [[2.0, 0.0], [0.0, 3.0]],
            [[4.0, 0.0], [0.0, 6.0]],
        ]
    )
    trace = make_trace([[0.0, 0.0], [0.0, 0.0]], positions)
    assert path_lengths(trace) == pytest.approx([4.0, 6.0])
    assert traveling_distance(trace) == pytest.approx(5.0)


def test_smoothness_needs_two_steps():
    trace = make_trace([[0.0, 0.0]], _walk([[1.0, 0.0]]))
    with pytest.raises(TraceFormatError):
        motion_smoothness(trace)
    assert evaluate_trace(trace).smoothness == 0.0


def test_finished_robot_stops_contributing():
    # robot 0 reaches its goal after two steps and then stays put
    moving = _walk([[1.0, 0.0]] * 4)[:, 0]
    parked = np.array([[0.05, 0.0], [0.1, 0.0], [0.1, 0.0], [0.1, 0.0]])
    positions = np.stack([parked, moving], axis=1)
    statuses = [[0, 0], [1, 0], [1, 0], [1, 1]]
    trace = make_trace(
        [[0.0, 0.0], [0.0, 0.0]], positions, goals=[[0.12, 0.0], [0.25, 0.0]], statuses=statuses
    )
    report = evaluate_trace(trace)
    assert report.smoothness == pytest.approx(0.0, abs=1e-9)
    assert report.success_rate == 1.0
    assert not report.partial
    assert report.per_robot[0]["path_length"] == pytest.approx(0.1)
    assert report.per_robot[0]["status"] == "reached"


def test_report_flags_partial_runs():
    statuses = [[0, 2]] * 3
    trace = make_trace([[0.0, 0.0], [1.0, 0.0]], np.zeros((3, 2, 2)) + [[0.0, 0.0], [1.0, 0.0]], statuses=statuses)
    report = evaluate_trace(trace)
    assert report.success_rate == 0.0
    assert report.collision_rate == 0.5
    assert report.partial
    assert report.steps == 3


def _rotate(points, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.asarray(points) @ np.array([[c, s], [-s, c]])


@pytest.mark.parametrize("angle", [0.3, math.pi / 2, 2.5, -1.0])
def test_metrics_do_not_depend_on_the_global_frame(angle):
    rng = np.random.default_rng(7)
    moves = rng.normal(size=(30, 3, 2))
    moves /= np.linalg.norm(moves, axis=2, keepdims=True)
    starts = rng.uniform(-2.0, 2.0, (3, 2))
    positions = starts + np.cumsum(0.05 * moves, axis=0)
    trace = make_trace(starts, positions)

    shift = np.array([4.0, -1.5])
    moved = make_trace(_rotate(starts, angle) + shift, _rotate(positions, angle) + shift)
    assert motion_smoothness(moved) == pytest.approx(motion_smoothness(trace), rel=1e-9)
    assert traveling_distance(moved) == pytest.approx(traveling_distance(trace), rel=1e-9)


def test_successful_robots_travel_at_least_start_goal_distance_minus_radius():
    config = WorldConfig()
    reached = 0
    for preset in ("circle4", "lab", "deadlock"):
        for seed in range(3):
            trace = run_episode(preset_scenario(preset, seed), Planner.vanilla_apf(), config, seed=seed)
            for robot in evaluate_trace(trace).per_robot:
                if robot["status"] == "reached":
                    reached += 1
                    assert robot["path_length"] >= robot["start_goal_dist"] - config.safe_radius - 1e-9
    assert reached > 0
