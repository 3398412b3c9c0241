import math

import numpy as np
import pytest

from src.config import WorldConfig
from src.engine.geometry import wrap_angle
from src.engine.scenario import Obstacle, RobotTask, Scenario, sample_scenario
from src.engine.world import Status, build_world, observe, reward, step
from src.utils.errors import InactiveRobotError, MalformedCommandError, MalformedScenarioError

CONFIG = WorldConfig()


def _scenario(*tasks, obstacles=()):
    return Scenario(
        kind="cluttered",
        robots=tuple(RobotTask(start=s, goal=g) for s, g in tasks),
        obstacles=tuple(Obstacle(center=c, radius=r) for c, r in obstacles),
    )


def test_build_world_records_start_goal_distance_and_heading():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0))))
    robot = world.robots[0]
    assert robot.start_goal_dist == pytest.approx(5.0)
    assert robot.heading == pytest.approx(0.0)
    assert robot.status is Status.ACTIVE
    assert world.step_count == 0


def test_build_world_rejects_start_inside_obstacle():
    with pytest.raises(MalformedScenarioError):
        build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0)), obstacles=[((0.2, 0.0), 0.5)]))


def test_observe_obstacle_surface_distance_and_bearing():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0)), obstacles=[((3.0, 0.0), 0.5)]))
    obs = observe(world, 0)
    assert obs.local.obstacle_distance == pytest.approx(2.5)
    assert obs.local.obstacle_azimuth == pytest.approx(0.0)
    assert obs.local.goal_distance == pytest.approx(5.0)


def test_observe_empty_world_uses_absence_convention():
    obs = observe(build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0)))), 0)
    assert obs.local.obstacle_distance == CONFIG.detection_range
    assert obs.local.obstacle_azimuth == 0.0
    assert obs.neighbors == ()
    assert obs.neighbor_array().shape == (0, 3)


def test_observe_neighbor_bearing_in_local_frame():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0)), ((0.0, 2.0), (0.0, 7.0))))
    obs = observe(world, 0)
    assert len(obs.neighbors) == 1
    neighbor = obs.neighbors[0]
    assert neighbor.robot_id == 1
    assert neighbor.distance == pytest.approx(2.0)
    assert neighbor.azimuth == pytest.approx(math.pi / 2)
    assert neighbor.relative_heading == pytest.approx(math.pi / 2)


def test_observe_ignores_robots_beyond_detection_range():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0)), ((0.0, 6.5), (0.0, 9.0))))
    assert observe(world, 0).neighbors == ()


def test_step_moves_robot_by_one_step_length():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0))))
    step(world, {0: np.array([1.0, 0.0])})
    assert world.robots[0].position == pytest.approx([0.05, 0.0])
    assert world.robots[0].path_length == pytest.approx(0.05)
    assert world.step_count == 1


def test_step_marks_goal_reached():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (0.12, 0.0))))
    outcome = step(world, {0: np.array([1.0, 0.0])})
    assert world.robots[0].status is Status.REACHED
    assert outcome.transitions == {0: Status.REACHED}
    assert world.done


def test_step_collides_both_robots_of_a_close_pair():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0)), ((0.25, 0.0), (-5.0, 0.0))))
    step(world, {0: np.array([1.0, 0.0]), 1: np.array([-1.0, 0.0])})
    assert [robot.status for robot in world.robots] == [Status.COLLIDED, Status.COLLIDED]


def test_active_robot_hitting_a_parked_robot_leaves_it_reached():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (0.12, 0.0)), ((1.0, 0.0), (-5.0, 0.0))))
    step(world, {0: np.array([1.0, 0.0]), 1: np.array([-1.0, 0.0])})
    assert world.robots[0].status is Status.REACHED

    for _ in range(30):
        outcome = step(world, {1: np.array([-1.0, 0.0])})
        if world.robots[1].status is not Status.ACTIVE:
            break
    assert world.robots[1].status is Status.COLLIDED
    assert outcome.transitions == {1: Status.COLLIDED}
    assert world.robots[0].status is Status.REACHED


def test_step_collision_takes_precedence_over_reaching():
    world = build_world(
        CONFIG, _scenario(((0.0, 0.0), (0.12, 0.0)), obstacles=[((0.05, -0.5), 0.401)])
    )
    step(world, {0: np.array([1.0, 0.0])})
    assert world.robots[0].status is Status.COLLIDED


def test_finished_robots_stay_put():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (0.12, 0.0)), ((0.0, 3.0), (5.0, 3.0))))
    step(world, {0: np.array([1.0, 0.0]), 1: np.array([1.0, 0.0])})
    parked = world.robots[0].position.copy()
    step(world, {1: np.array([1.0, 0.0])})
    assert world.robots[0].position == pytest.approx(parked)
    with pytest.raises(InactiveRobotError):
        step(world, {0: np.array([1.0, 0.0]), 1: np.array([1.0, 0.0])})
    with pytest.raises(InactiveRobotError):
        observe(world, 0)


@pytest.mark.parametrize("command", [np.array([2.0, 0.0]), np.array([0.0, 0.0]), np.array([1.0, 0.0, 0.0])])
def test_step_rejects_non_unit_commands(command):
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0))))
    with pytest.raises(MalformedCommandError):
        step(world, {0: command})


def test_step_requires_a_command_for_every_active_robot():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0)), ((0.0, 3.0), (5.0, 3.0))))
    with pytest.raises(MalformedCommandError):
        step(world, {0: np.array([1.0, 0.0])})


def test_arrival_reward_on_straight_line():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (0.47, 0.0))))
    for _ in range(7):
        step(world, {0: np.array([1.0, 0.0])})
    before = world.snapshot()
    step(world, {0: np.array([1.0, 0.0])})
    breakdown = reward(before, world, 0)
    assert world.robots[0].status is Status.REACHED
    assert breakdown.arrival == pytest.approx(300 - 100 * 0.4 / 0.47)


def test_arrival_reward_is_200_when_path_equals_start_goal_distance():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (0.5, 0.0))))
    before = world.snapshot()
    robot = world.robots[0]
    robot.steps_moved = 10
    robot.position = np.array([0.45, 0.0])
    robot.status = Status.REACHED
    assert reward(before, world, 0).arrival == pytest.approx(200.0)


def test_obstacle_and_progress_rewards():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.2, 0.0)), obstacles=[((0.0, 1.0), 0.8)]))
    before = world.snapshot()
    step(world, {0: np.array([1.0, 0.0])})
    # pull the robot back to a known spot: 1.5 r from the obstacle, 5 m from the goal
    world.robots[0].position = np.array([0.2, 0.0])
    world.obstacle_centers[0] = np.array([0.2, 0.95])
    breakdown = reward(before, world, 0)
    assert breakdown.obstacle == -20.0
    assert breakdown.progress == pytest.approx(0.5)
    assert breakdown.arrival == 0.0


def test_sharp_heading_change_is_penalized():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0))))
    before = world.snapshot()
    step(world, {0: np.array([0.0, 1.0])})
    assert reward(before, world, 0).smoothness == -5.0

    before = world.snapshot()
    step(world, {0: np.array([math.sqrt(0.5), math.sqrt(0.5)])})
    assert reward(before, world, 0).smoothness == 0.0


def test_snapshot_is_independent():
    world = build_world(CONFIG, _scenario(((0.0, 0.0), (5.0, 0.0))))
    snapshot = world.snapshot()
    step(world, {0: np.array([1.0, 0.0])})
    assert snapshot.robots[0].position == pytest.approx([0.0, 0.0])
    assert snapshot.step_count == 0


def test_wrap_angle_range():
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)


def _toward_goals(world, rng=None, noise=0.0):
    commands = {}
    for i in world.active_ids():
        robot = world.robots[i]
        direction = robot.goal - robot.position
        if rng is not None:
            direction = direction + noise * rng.normal(size=2)
        commands[i] = direction / np.linalg.norm(direction)
    return commands


def _rollout(scenario, seed, max_steps=400):
    """Noisy goal seeking; one (positions, statuses, outcome) entry per step"""
    world = build_world(CONFIG, scenario)
    rng = np.random.default_rng(seed)
    history = []
    while world.active_ids() and world.step_count < max_steps:
        outcome = step(world, _toward_goals(world, rng, noise=0.3))
        positions = np.array([robot.position for robot in world.robots])
        history.append((positions, [robot.status for robot in world.robots], outcome))
    return world, history


@pytest.mark.parametrize("seed", range(4))
def test_statuses_never_leave_reached_or_collided(seed):
    scenario = sample_scenario("circle_swap", 6, seed, circle_radius=1.5)
    _, history = _rollout(scenario, seed)
    previous = [Status.ACTIVE] * 6
    for _, statuses, outcome in history:
        for i, (before, after) in enumerate(zip(previous, statuses)):
            if before is not Status.ACTIVE:
                assert after is before
                assert i not in outcome.transitions
        previous = statuses


def test_same_commands_give_identical_trajectories():
    scenario = sample_scenario("cluttered", 4, seed=2)
    _, first = _rollout(scenario, seed=5)
    _, second = _rollout(scenario, seed=5)
    assert len(first) == len(second)
    for (p1, s1, _), (p2, s2, _) in zip(first, second):
        assert np.array_equal(p1, p2)
        assert s1 == s2


def test_path_length_matches_steps_and_travelled_polyline():
    scenario = sample_scenario("circle_swap", 4, seed=1, circle_radius=1.5)
    world, history = _rollout(scenario, seed=1)
    starts = np.array([task.start for task in scenario.robots])
    polyline = np.vstack([starts[None], np.stack([positions for positions, _, _ in history])])
    travelled = np.linalg.norm(np.diff(polyline, axis=0), axis=2).sum(axis=0)
    for robot, distance in zip(world.robots, travelled):
        assert robot.path_length == pytest.approx(
            robot.steps_moved * CONFIG.desired_speed * CONFIG.timestep
        )
        assert robot.path_length == pytest.approx(distance)
        if robot.status is Status.ACTIVE:
            assert robot.steps_moved == world.step_count


def _turn(point, angle):
    c, s = math.cos(angle), math.sin(angle)
    return (c * point[0] - s * point[1], s * point[0] + c * point[1])


def _assert_same_observation(a, b):
    assert b.local.obstacle_distance == pytest.approx(a.local.obstacle_distance)
    assert b.local.goal_distance == pytest.approx(a.local.goal_distance)
    assert wrap_angle(b.local.obstacle_azimuth - a.local.obstacle_azimuth) == pytest.approx(0.0, abs=1e-9)
    assert wrap_angle(b.local.goal_azimuth - a.local.goal_azimuth) == pytest.approx(0.0, abs=1e-9)
    assert [n.robot_id for n in b.neighbors] == [n.robot_id for n in a.neighbors]
    for na, nb in zip(a.neighbors, b.neighbors):
        assert nb.distance == pytest.approx(na.distance)
        assert wrap_angle(nb.azimuth - na.azimuth) == pytest.approx(0.0, abs=1e-9)
        assert wrap_angle(nb.relative_heading - na.relative_heading) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("angle", [0.7, math.pi / 2, -2.2])
def test_observations_do_not_depend_on_the_global_frame(angle):
    tasks = [((0.0, 0.0), (4.0, 1.0)), ((1.0, 2.0), (-3.0, 0.0)), ((-1.0, -1.5), (2.0, 3.0))]
    obstacles = [((2.0, 0.5), 0.3), ((-1.0, 1.0), 0.4)]
    world = build_world(CONFIG, _scenario(*tasks, obstacles=obstacles))
    turned = build_world(
        CONFIG,
        _scenario(
            *[(_turn(s, angle), _turn(g, angle)) for s, g in tasks],
            obstacles=[(_turn(c, angle), r) for c, r in obstacles],
        ),
    )
    for _ in range(5):
        assert turned.active_ids() == world.active_ids()
        for i in world.active_ids():
            _assert_same_observation(observe(world, i), observe(turned, i))
        step(world, _toward_goals(world))
        step(turned, _toward_goals(turned))
