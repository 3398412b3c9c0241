"""
Static SVG figures for traces and comparison tables.

Element ids in the SVG: `obstacle-<k>` per obstacle disc, `trajectory-<i>` per
robot polyline, `start-<i>` and `goal-<i>` for the markers, `bar-<planner>-<metric>`
for comparison bars. Output bytes depend only on the input.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from src.evaluation.bench import COMPARISON_COLUMNS, summarize  # noqa: E402
from src.evaluation.traces import EpisodeTrace, load_trace  # noqa: E402
from src.utils.errors import TraceFormatError  # noqa: E402

logger = logging.getLogger(__name__)

SVG_RC = {"svg.hashsalt": "rpf-planner", "svg.fonttype": "none", "path.simplify": False}
_SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig: plt.Figure, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    plt.close(fig)
    return path


def plot_trace(trace: EpisodeTrace, path: str | Path) -> Path:
    path = Path(path)
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 6))
        for k, (cx, cy, radius) in enumerate(trace.obstacles):
            disc = Circle((cx, cy), radius, facecolor="0.6", edgecolor="0.3")
            disc.set_gid(f"obstacle-{k}")
            ax.add_patch(disc)

        full = trace.full_positions()
        colors = plt.get_cmap("tab10")
        for i in range(trace.n_robots):
            color = colors(i % 10)
            (line,) = ax.plot(full[:, i, 0], full[:, i, 1], color=color, linewidth=1.2)
            line.set_gid(f"trajectory-{i}")
            (start,) = ax.plot(*trace.starts[i], marker="o", color=color, linestyle="none")
            start.set_gid(f"start-{i}")
            (goal,) = ax.plot(*trace.goals[i], marker="*", markersize=10, color=color, linestyle="none")
            goal.set_gid(f"goal-{i}")

        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        title = trace.planner or "trajectories"
        if trace.scenario:
            title = f"{title} / {trace.scenario} (seed {trace.seed})"
        ax.set_title(title)
        return _save(fig, path)


def plot_comparison(rows: pd.DataFrame, path: str | Path) -> Path:
    """Bars of mean traveling distance and smoothness per planner, stdev as error bars"""
    path = Path(path)
    summary = summarize(rows)
    with plt.rc_context(SVG_RC):
        fig, axes = plt.subplots(1, 2, figsize=(9, 4))
        for ax, metric, label in ((axes[0], "l", "traveling distance [m]"), (axes[1], "xi", "motion smoothness")):
            means = summary[f"{metric}_mean"].fillna(0.0)
            stds = summary[f"{metric}_std"].fillna(0.0)
            bars = ax.bar(summary["planner"], means, yerr=stds, capsize=4, color="0.55")
            for bar, planner in zip(bars, summary["planner"]):
                bar.set_gid(f"bar-{planner}-{metric}")
            ax.set_ylabel(label)
            ax.tick_params(axis="x", labelrotation=20)
        fig.tight_layout()
        return _save(fig, path)


def plot_file(input_path: str | Path, output_path: str | Path) -> Path:
    """Plot a trace (.npz) or a comparison table (.csv)"""
    input_path = Path(input_path)
    if not input_path.exists():
        raise FileNotFoundError(f"plot input {input_path} does not exist")

    if input_path.suffix == ".npz":
        return plot_trace(load_trace(input_path), output_path)

    if input_path.suffix == ".csv":
        try:
            rows = pd.read_csv(input_path)
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise TraceFormatError(f"{input_path} is not a readable comparison table: {e}") from e
        if list(rows.columns) != COMPARISON_COLUMNS:
            raise TraceFormatError(f"{input_path} does not have the comparison columns")
        return plot_comparison(rows, output_path)

    raise TraceFormatError(f"cannot plot {input_path}: expected a .npz trace or a .csv comparison")
