import numpy as np
import pytest

from src.evaluation.traces import (
    REPLAY_COLUMNS,
    EpisodeTrace,
    load_trace,
    read_replay_table,
    save_trace,
    trace_table,
    write_replay_table,
)
from src.utils.errors import TraceFormatError


def two_robot_trace(steps=10):
    rng = np.random.default_rng(0)
    positions = np.cumsum(rng.normal(0, 0.05, (steps, 2, 2)), axis=0)
    statuses = np.zeros((steps, 2), dtype=np.int64)
    if steps:
        statuses[-1] = [1, 2]
    return EpisodeTrace(
        timestep=0.1,
        speed=0.5,
        starts=np.zeros((2, 2)),
        start_headings=np.zeros(2),
        goals=np.ones((2, 2)),
        obstacles=np.array([[3.0, 0.0, 0.5]]),
        positions=positions.reshape(steps, 2, 2),
        headings=rng.uniform(-3, 3, (steps, 2)),
        actions=rng.uniform(0, 1, (steps, 2, 2)),
        rewards=rng.normal(size=(steps, 2)),
        statuses=statuses,
        planner="vanilla_apf",
        scenario="circle4",
        seed=5,
    )


def test_replay_table_has_one_row_per_robot_per_step():
    table = trace_table(two_robot_trace())
    assert list(table.columns) == REPLAY_COLUMNS
    assert len(table) == 20
    assert table["t"].min() == 1 and table["t"].max() == 10
    assert table.iloc[-2:]["status"].tolist() == ["reached", "collided"]


def test_empty_trace_gives_header_only_table(tmp_path):
    table = trace_table(two_robot_trace(steps=0))
    path = write_replay_table(table, tmp_path / "empty.csv")
    assert path.read_text().strip() == ",".join(REPLAY_COLUMNS)


def test_replaying_a_replay_is_identical(tmp_path):
    first = write_replay_table(trace_table(two_robot_trace()), tmp_path / "first.csv")
    second = write_replay_table(read_replay_table(first), tmp_path / "second.csv")
    assert first.read_bytes() == second.read_bytes()


def test_trace_file_keeps_arrays_and_meta(tmp_path):
    trace = two_robot_trace()
    loaded = load_trace(save_trace(trace, tmp_path / "trace.npz"))
    assert np.array_equal(loaded.positions, trace.positions)
    assert np.array_equal(loaded.statuses, trace.statuses)
    assert (loaded.planner, loaded.scenario, loaded.seed) == ("vanilla_apf", "circle4", 5)
    assert loaded.timestep == 0.1


def test_missing_trace_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_trace(tmp_path / "nope.npz")


def test_corrupt_trace_file(tmp_path):
    path = tmp_path / "corrupt.npz"
    path.write_bytes(b"PK\x03\x04 not really a zip archive")
    with pytest.raises(TraceFormatError):
        load_trace(path)


def test_replay_table_with_wrong_columns(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(TraceFormatError):
        read_replay_table(path)
