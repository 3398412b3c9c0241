import logging
import math
from typing import Any

import pandas as pd
from fastapi import APIRouter
from pydantic import BaseModel, Field

from src.config import ApfConfig, PlannerKind, WorldConfig
from src.engine.scenario import Scenario, preset_scenario
from src.evaluation.bench import compare, run_episode
from src.evaluation.metrics import evaluate_trace
from src.evaluation.planners import build_planner
from src.evaluation.traces import trace_table
from src.utils.error_handlers import handle_evaluation_errors

router = APIRouter()

logger = logging.getLogger(__name__)


class EpisodeRequest(BaseModel):
    planner: PlannerKind = "vanilla_apf"
    checkpoint: str | None = Field(None, description="Checkpoint path on the server for learned planners")
    scenario: Scenario | None = None
    preset: str = "circle4"
    n_robots: int | None = Field(None, ge=1)
    seed: int = 0
    include_trace: bool = False
    world: WorldConfig = WorldConfig()
    apf: ApfConfig = ApfConfig()


class CompareRequest(BaseModel):
    planners: list[PlannerKind] = Field(default_factory=lambda: ["vanilla_apf"], min_length=1)
    checkpoints: dict[str, str] = Field(default_factory=dict)
    preset: str = "circle8"
    n_robots: int | None = Field(None, ge=1)
    seed: int = 0
    seeds: int = Field(1, ge=1, le=100)
    world: WorldConfig = WorldConfig()
    apf: ApfConfig = ApfConfig()


def _records(frame: pd.DataFrame) -> list[dict[str, Any]]:
    """DataFrame rows as JSON-safe dicts (NaN becomes null)"""
    return [
        {k: None if isinstance(v, float) and math.isnan(v) else v for k, v in row.items()}
        for row in frame.to_dict("records")
    ]


@router.post("/episode")
@handle_evaluation_errors
async def episode(request: EpisodeRequest):
    """Run one episode and report its metrics"""
    checkpoints = {request.planner: request.checkpoint} if request.checkpoint else {}
    planner = build_planner(request.planner, checkpoints, request.apf)
    scenario = request.scenario or preset_scenario(request.preset, request.seed, request.n_robots)

    trace = run_episode(scenario, planner, request.world, request.seed)
    report = evaluate_trace(trace)
    body = {
        "message": "OK",
        "planner": planner.label,
        "seed": request.seed,
        "metrics": {
            "traveling_distance": report.traveling_distance,
            "smoothness": report.smoothness,
            "success_rate": report.success_rate,
            "collision_rate": report.collision_rate,
            "steps": report.steps,
            "partial": report.partial,
        },
        "robots": report.per_robot,
    }
    if request.include_trace:
        body["trace"] = _records(trace_table(trace))
    return body


@router.post("/compare")
@handle_evaluation_errors
async def compare_planners(request: CompareRequest):
    """Paired-seed comparison of several planners"""
    planners = [build_planner(kind, request.checkpoints, request.apf) for kind in request.planners]
    seeds = list(range(request.seed, request.seed + request.seeds))
    result = compare(planners, request.preset, seeds, request.world, n_robots=request.n_robots)
    return {
        "message": "OK",
        "rows": _records(result.rows),
        "summary": _records(result.summary),
    }
