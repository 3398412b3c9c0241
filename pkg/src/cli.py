"""
Command line entry point.

  python -m src.cli train  [--config FILE] [--episodes N] [--seed S] [--scenario NAME|FILE] ...
  python -m src.cli eval   --planners rpf_attention,vanilla_apf --checkpoint rpf_attention=PATH ...
  python -m src.cli replay TRACE.npz|TABLE.csv [--output FILE]
  python -m src.cli plot   TRACE.npz|comparison.csv [--output FILE]
  python -m src.cli serve  [--host HOST] [--port PORT]

Exit status is 0 only when every requested artifact was written.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from src.config import RunConfig, load_config_file
from src.engine.scenario import PRESETS, Scenario, load_scenario, preset_scenario
from src.evaluation.bench import compare
from src.evaluation.planners import Planner, build_planner
from src.evaluation.plotting import plot_file
from src.evaluation.traces import load_trace, read_replay_table, trace_table, write_replay_table
from src.learning.trainer import ScenarioSource, train
from src.utils.error_handlers import PlannerErrorHandler
from src.utils.logging_config import LOG_FILE, configure_logging, log_banner

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--log-file", default=LOG_FILE, help="Append log records here ('' for console only)")


def _add_world_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", help=f"Preset ({', '.join(sorted(PRESETS))}) or scenario JSON file")
    parser.add_argument("--n-robots", dest="n_robots", type=int)
    parser.add_argument("--max-steps", dest="world.max_steps", type=int)
    parser.add_argument("--timestep", dest="world.timestep", type=float)
    parser.add_argument("--speed", dest="world.desired_speed", type=float)
    parser.add_argument("--wall-following", dest="apf.wall_following", action=argparse.BooleanOptionalAction)
    parser.add_argument("--soft-rule", dest="apf.soft_rule", action=argparse.BooleanOptionalAction)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpf", description="Multi-robot reinforced potential field planner")
    commands = parser.add_subparsers(dest="command", required=True)

    train_p = commands.add_parser("train", help="Train a shared policy with PPO")
    _add_common(train_p)
    _add_world_flags(train_p)
    train_p.add_argument("--planner", choices=("rpf_attention", "rpf_mean_embed", "ppo_steer"))
    train_p.add_argument("--scenario-kind", dest="scenario_kind", choices=("circle_swap", "cluttered"))
    train_p.add_argument("--obstacle-radius", dest="obstacle_radius", type=float)
    train_p.add_argument("--episodes", dest="ppo.episodes", type=int)
    train_p.add_argument("--batch-interval", dest="ppo.batch_interval", type=int)
    train_p.add_argument("--epochs", dest="ppo.epochs", type=int)
    train_p.add_argument("--lr", dest="ppo.lr_initial", type=float)
    train_p.add_argument("--checkpoint-interval", dest="ppo.checkpoint_interval", type=int)

    eval_p = commands.add_parser("eval", help="Compare planners over paired seeds")
    _add_common(eval_p)
    _add_world_flags(eval_p)
    eval_p.add_argument("--planners", help="Comma-separated planner kinds")
    eval_p.add_argument(
        "--checkpoint",
        action="append",
        default=[],
        help="KIND=PATH, or PATH for every learned planner; repeatable",
    )
    eval_p.add_argument("--seeds", type=int, help="Number of paired seeds, counted from --seed")
    eval_p.add_argument("--workers", type=int, default=1)

    replay_p = commands.add_parser("replay", help="Export a trace as a flat CSV table")
    replay_p.add_argument("input", help="Trace .npz or replay .csv")
    replay_p.add_argument("--output")
    replay_p.add_argument("--log-file", default=LOG_FILE)

    plot_p = commands.add_parser("plot", help="Render a trace or comparison table to SVG")
    plot_p.add_argument("input", help="Trace .npz or comparison .csv")
    plot_p.add_argument("--output")
    plot_p.add_argument("--log-file", default=LOG_FILE)

    serve_p = commands.add_parser("serve", help="Run the HTTP planning service")
    serve_p.add_argument("--host", default=os.environ.get("HOST", "0.0.0.0"))
    serve_p.add_argument("--port", type=int, default=int(os.environ.get("PORT", "8080")))
    serve_p.add_argument("--log-file", default=LOG_FILE)

    return parser


def _flag_values(args: argparse.Namespace) -> dict[str, Any]:
    skip = {"command", "config", "log_file", "checkpoint", "planners", "workers"}
    return {key: value for key, value in vars(args).items() if key not in skip}


def _run_config(args: argparse.Namespace) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else None
    flags = _flag_values(args)
    if getattr(args, "planners", None):
        flags["planners"] = tuple(p.strip() for p in args.planners.split(",") if p.strip())
    if getattr(args, "checkpoint", None):
        flags["checkpoints"] = _parse_checkpoints(args.checkpoint, flags.get("planners"), file_values)
    return RunConfig.resolve(args.command, file_values, flags)


def _parse_checkpoints(
    values: Sequence[str], planners: Sequence[str] | None, file_values: dict | None
) -> dict[str, str]:
    if planners is None:
        planners = (file_values or {}).get("planners") or ()
    learned = [p for p in planners if p != "vanilla_apf"]
    checkpoints: dict[str, str] = {}
    for value in values:
        kind, sep, path = value.partition("=")
        if sep:
            checkpoints[kind] = path
        else:
            checkpoints.update({k: value for k in learned})
    return checkpoints


def _resolve_scenario(config: RunConfig) -> Scenario | None:
    """A scenario file or preset fixed for the whole run; None samples per episode"""
    if config.scenario is None:
        return None
    if config.scenario in PRESETS:
        return preset_scenario(config.scenario, config.seed, config.n_robots)
    return load_scenario(config.scenario)


def cmd_train(config: RunConfig) -> int:
    fixed = _resolve_scenario(config)
    arch = config.net_arch()
    options = {}
    if config.obstacle_radius is not None:
        options["shrink_obstacles_to"] = config.obstacle_radius
    source = ScenarioSource(
        kind=config.scenario_kind, n_robots=config.n_robots or 4, fixed=fixed, options=options
    )

    def report(row: dict) -> None:
        print(
            f"episode {row['episode']:>5}  return {row['return_mean']:>9.2f}  "
            f"success {row['success_rate']:.2f}  collisions {row['collision_rate']:.2f}  "
            f"steps {row['steps']:>4}"
        )

    result = train(
        config.world,
        source,
        arch,
        config.ppo,
        config.seed,
        apf_config=config.apf,
        output_dir=config.output_dir,
        on_episode=report,
    )
    logger.info(f"Training finished; checkpoint at {result.checkpoint_path}")
    return 0


def cmd_eval(config: RunConfig, workers: int = 1) -> int:
    # every input is checked before anything is written
    planners: list[Planner] = []
    for kind in config.planners:
        try:
            planners.append(build_planner(kind, config.checkpoints, config.apf))
        except FileNotFoundError as e:
            raise FileNotFoundError(f"planner {kind}: {e}") from e

    scenario: str | Scenario
    if config.scenario is None:
        scenario = "circle8"
    elif config.scenario in PRESETS:
        scenario = config.scenario
    else:
        scenario = load_scenario(config.scenario)

    seeds = list(range(config.seed, config.seed + config.seeds))
    result = compare(
        planners,
        scenario,
        seeds,
        config.world,
        n_robots=config.n_robots,
        output_dir=config.output_dir,
        max_workers=workers,
    )
    print(result.summary.to_string(index=False))
    return 0


def cmd_replay(input_path: str, output: str | None) -> int:
    source = Path(input_path)
    if not source.exists():
        raise FileNotFoundError(f"replay input {source} does not exist")
    if source.suffix == ".csv":
        table = read_replay_table(source)
    else:
        table = trace_table(load_trace(source))
    target = Path(output) if output else source.with_name(f"{source.stem}_replay.csv")
    write_replay_table(table, target)
    logger.info(f"Wrote {len(table)} replay rows to {target}")
    return 0


def cmd_plot(input_path: str, output: str | None) -> int:
    source = Path(input_path)
    target = Path(output) if output else source.with_suffix(".svg")
    plot_file(source, target)
    logger.info(f"Wrote plot to {target}")
    return 0


def cmd_serve(host: str, port: int) -> int:
    import uvicorn

    uvicorn.run("src.main:app", host=host, port=port)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_file or None)
    log_banner(logger, f"rpf {args.command}")

    try:
        if args.command == "train":
            return cmd_train(_run_config(args))
        if args.command == "eval":
            return cmd_eval(_run_config(args), workers=args.workers)
        if args.command == "replay":
            return cmd_replay(args.input, args.output)
        if args.command == "plot":
            return cmd_plot(args.input, args.output)
        return cmd_serve(args.host, args.port)
    except Exception as e:
        PlannerErrorHandler.log_error(f"{args.command}_command", e)
        print(f"error: {e}", file=sys.stderr)
        return PlannerErrorHandler.exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
