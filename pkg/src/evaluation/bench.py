"""
Episode rollouts and paired planner comparisons.

Every planner in a comparison sees the same scenario instance for a given seed.
Cells (planner, seed) run in a thread pool; rows are collected and aggregated
by the calling thread only.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
import torch

from src.config import WorldConfig
from src.engine.scenario import Scenario, preset_scenario
from src.engine.world import Status, build_world, reward, step
from src.evaluation.metrics import evaluate_trace
from src.evaluation.planners import Planner
from src.evaluation.traces import STATUS_CODES, EpisodeTrace, save_trace
from src.utils.errors import PlannerError

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = [
    "planner",
    "scenario",
    "seed",
    "l",
    "xi",
    "success_rate",
    "collisions",
    "steps",
    "status",
]


def run_episode(
    scenario: Scenario,
    planner: Planner,
    world_config: WorldConfig,
    seed: int,
    deterministic: bool = True,
) -> EpisodeTrace:
    """Roll observe -> planner -> heading -> step until every robot finished or time ran out"""
    world = build_world(world_config, scenario)
    generator = torch.Generator().manual_seed(seed)
    n = len(world.robots)
    action_dim = 1 if planner.kind == "ppo_steer" else 2

    positions, headings, actions, rewards, statuses = [], [], [], [], []
    starts = np.array([robot.position for robot in world.robots])
    start_headings = np.array([robot.heading for robot in world.robots])

    while not world.done:
        decision = planner.decide(world, generator, deterministic=deterministic)
        before = world.snapshot()
        step(world, decision.commands)

        step_actions = np.full((n, action_dim), np.nan)
        step_rewards = np.full(n, np.nan)
        for robot_id, action in decision.actions.items():
            step_actions[robot_id] = action
            step_rewards[robot_id] = reward(before, world, robot_id).total

        positions.append(np.array([robot.position for robot in world.robots]))
        headings.append(np.array([robot.heading for robot in world.robots]))
        statuses.append(np.array([STATUS_CODES[robot.status] for robot in world.robots]))
        actions.append(step_actions)
        rewards.append(step_rewards)

    steps = len(positions)
    if scenario.obstacles:
        obstacles = np.array([[*o.center, o.radius] for o in scenario.obstacles], dtype=float)
    else:
        obstacles = np.zeros((0, 3))

    trace = EpisodeTrace(
        timestep=world_config.timestep,
        speed=world_config.desired_speed,
        starts=starts,
        start_headings=start_headings,
        goals=np.array([robot.goal for robot in world.robots]),
        obstacles=obstacles,
        positions=np.array(positions).reshape(steps, n, 2),
        headings=np.array(headings).reshape(steps, n),
        actions=np.array(actions).reshape(steps, n, action_dim),
        rewards=np.array(rewards).reshape(steps, n),
        statuses=np.array(statuses, dtype=np.int64).reshape(steps, n),
        planner=planner.label,
        scenario=scenario.name or scenario.kind,
        seed=seed,
    )
    finals = trace.final_statuses()
    logger.debug(
        f"Episode {planner.label} seed={seed}: steps={steps} | "
        f"reached={finals.count(Status.REACHED)}/{n} | collided={finals.count(Status.COLLIDED)}"
    )
    return trace


@dataclass
class Comparison:
    rows: pd.DataFrame
    summary: pd.DataFrame
    traces: dict[tuple[str, int], EpisodeTrace]


def _failed_row(planner: Planner, scenario_name: str, seed: int) -> dict:
    return {
        "planner": planner.label,
        "scenario": scenario_name,
        "seed": seed,
        "l": math.nan,
        "xi": math.nan,
        "success_rate": math.nan,
        "collisions": math.nan,
        "steps": math.nan,
        "status": "failed",
    }


def summarize(rows: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of l, xi and success rate per planner"""
    ok = rows[rows["status"] != "failed"]
    summary = ok.groupby("planner", sort=False).agg(
        l_mean=("l", "mean"),
        l_std=("l", "std"),
        xi_mean=("xi", "mean"),
        xi_std=("xi", "std"),
        success_mean=("success_rate", "mean"),
        success_std=("success_rate", "std"),
        episodes=("seed", "count"),
    )
    failed = rows[rows["status"] == "failed"].groupby("planner", sort=False)["seed"].count()
    summary = summary.reindex(pd.Index(rows["planner"].unique(), name="planner"))
    summary["failed"] = failed.reindex(summary.index).fillna(0).astype(int)
    summary["episodes"] = summary["episodes"].fillna(0).astype(int)
    return summary.reset_index()


def compare(
    planners: Sequence[Planner],
    scenario: str | Scenario | Callable[[int], Scenario],
    seeds: Sequence[int],
    world_config: WorldConfig,
    n_robots: int | None = None,
    output_dir: str | Path | None = None,
    max_workers: int = 1,
) -> Comparison:
    """
    Run every planner on every seed and tabulate l, xi and success rate

    Args:
        scenario: A preset name, a fixed scenario, or a factory seed -> scenario
        output_dir: Receives comparison.csv, summary.csv and traces/<planner>_seed<s>.npz
        max_workers: Threads used to run episodes
    """
    if not planners:
        raise ValueError("compare needs at least one planner")
    if not seeds:
        raise ValueError("compare needs at least one seed")

    if isinstance(scenario, str):
        preset = scenario

        def factory(seed: int) -> Scenario:
            return preset_scenario(preset, seed, n_robots)

    elif isinstance(scenario, Scenario):
        fixed = scenario

        def factory(seed: int) -> Scenario:
            return fixed

    else:
        factory = scenario

    instances = {seed: factory(seed) for seed in seeds}
    cells = [(planner, seed) for planner in planners for seed in seeds]

    def run_cell(cell: tuple[Planner, int]) -> tuple[dict, EpisodeTrace | None]:
        planner, seed = cell
        instance = instances[seed]
        name = instance.name or instance.kind
        try:
            trace = run_episode(instance, planner, world_config, seed)
            report = evaluate_trace(trace)
        except PlannerError as e:
            logger.error(f"Episode {planner.label} seed={seed} failed: {e}")
            return _failed_row(planner, name, seed), None
        row = {
            "planner": planner.label,
            "scenario": name,
            "seed": seed,
            "l": report.traveling_distance,
            "xi": report.smoothness,
            "success_rate": report.success_rate,
            "collisions": round(report.collision_rate * trace.n_robots),
            "steps": report.steps,
            "status": "partial" if report.partial else "ok",
        }
        return row, trace

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    rows = pd.DataFrame([row for row, _ in results], columns=COMPARISON_COLUMNS)
    traces = {
        (planner.label, seed): trace
        for (planner, seed), (_, trace) in zip(cells, results)
        if trace is not None
    }
    summary = summarize(rows)

    if output_dir is not None:
        output_dir = Path(output_dir)
        trace_dir = output_dir / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)
        for (label, seed), trace in traces.items():
            save_trace(trace, trace_dir / f"{label}_seed{seed}.npz")
        rows.to_csv(output_dir / "comparison.csv", index=False)
        summary.to_csv(output_dir / "summary.csv", index=False)

    logger.info(
        f"Compared {len(planners)} planner(s) over {len(seeds)} seed(s): "
        f"{int((rows['status'] == 'failed').sum())} failed cell(s)"
    )
    return Comparison(rows=rows, summary=summary, traces=traces)
