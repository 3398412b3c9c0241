"""
Episode traces and their on-disk forms.

A trace file is a numpy .npz archive with arrays
  starts (N, 2), start_headings (N,), goals (N, 2), obstacles (M, 3) [cx, cy, R],
  positions (T, N, 2), headings (T, N), actions (T, N, A), rewards (T, N),
  statuses (T, N) as int codes (0 active, 1 reached, 2 collided),
and a JSON string `meta` holding timestep, speed, planner, scenario and seed.
Row t of the per-step arrays is the state after step t + 1. Entries for robots
that already finished repeat their last state; their actions and rewards are NaN.

The replay CSV has columns t, robot, x, y, heading, status with t counting
from 1, one row per robot per step.
"""

import json
import logging
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from src.engine.world import Status
from src.utils.errors import TraceFormatError

logger = logging.getLogger(__name__)

STATUS_CODES = {Status.ACTIVE: 0, Status.REACHED: 1, Status.COLLIDED: 2}
STATUS_NAMES = {code: status.value for status, code in STATUS_CODES.items()}
REPLAY_COLUMNS = ["t", "robot", "x", "y", "heading", "status"]
_ARRAYS = (
    "starts",
    "start_headings",
    "goals",
    "obstacles",
    "positions",
    "headings",
    "actions",
    "rewards",
    "statuses",
)


@dataclass
class EpisodeTrace:
    timestep: float
    speed: float
    starts: np.ndarray
    start_headings: np.ndarray
    goals: np.ndarray
    obstacles: np.ndarray
    positions: np.ndarray
    headings: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    statuses: np.ndarray
    planner: str = ""
    scenario: str = ""
    seed: int = 0

    @property
    def n_robots(self) -> int:
        return len(self.starts)

    @property
    def step_count(self) -> int:
        return len(self.positions)

    def full_positions(self) -> np.ndarray:
        """(T + 1, N, 2) positions including the starts"""
        return np.concatenate([self.starts[None], self.positions.reshape(-1, self.n_robots, 2)])

    def final_statuses(self) -> list[Status]:
        if self.step_count == 0:
            return [Status.ACTIVE] * self.n_robots
        by_code = {code: status for status, code in STATUS_CODES.items()}
        return [by_code[int(code)] for code in self.statuses[-1]]


def save_trace(trace: EpisodeTrace, path: str | Path) -> Path:
    path = Path(path)
    meta = {
        "timestep": trace.timestep,
        "speed": trace.speed,
        "planner": trace.planner,
        "scenario": trace.scenario,
        "seed": trace.seed,
    }
    with open(path, "wb") as f:
        np.savez(f, meta=np.array(json.dumps(meta)), **{k: getattr(trace, k) for k in _ARRAYS})
    return path


def load_trace(path: str | Path) -> EpisodeTrace:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"trace file {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive["meta"]))
            arrays = {k: archive[k] for k in _ARRAYS}
    except (OSError, ValueError, KeyError, zipfile.BadZipFile, json.JSONDecodeError) as e:
        raise TraceFormatError(f"{path} is not a readable trace: {e}") from e

    n = len(arrays["starts"])
    t = len(arrays["positions"])
    if arrays["positions"].shape[1:] not in ((n, 2), (0,)) or arrays["statuses"].shape[0] != t:
        raise TraceFormatError(f"{path} has inconsistent series lengths")
    return EpisodeTrace(
        timestep=float(meta["timestep"]),
        speed=float(meta["speed"]),
        planner=meta.get("planner", ""),
        scenario=meta.get("scenario", ""),
        seed=int(meta.get("seed", 0)),
        **arrays,
    )


def trace_table(trace: EpisodeTrace) -> pd.DataFrame:
    """Flat per-step table of positions, headings and statuses"""
    steps, n = trace.step_count, trace.n_robots
    if steps == 0:
        return pd.DataFrame(columns=REPLAY_COLUMNS)
    positions = trace.positions.reshape(steps, n, 2)
    return pd.DataFrame(
        {
            "t": np.repeat(np.arange(1, steps + 1), n),
            "robot": np.tile(np.arange(n), steps),
            "x": positions[:, :, 0].ravel(),
            "y": positions[:, :, 1].ravel(),
            "heading": trace.headings.ravel(),
            "status": [STATUS_NAMES[int(c)] for c in trace.statuses.ravel()],
        },
        columns=REPLAY_COLUMNS,
    )


def read_replay_table(path: str | Path) -> pd.DataFrame:
    try:
        table = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise TraceFormatError(f"{path} is not a readable replay table: {e}") from e
    if list(table.columns) != REPLAY_COLUMNS:
        raise TraceFormatError(f"{path} does not have the replay columns {REPLAY_COLUMNS}")
    return table


def write_replay_table(table: pd.DataFrame, path: str | Path) -> Path:
    table.to_csv(path, index=False)
    return Path(path)
