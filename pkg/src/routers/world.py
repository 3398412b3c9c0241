import logging
from dataclasses import asdict
from typing import Literal

from fastapi import APIRouter
from pydantic import BaseModel, Field

from src.config import WorldConfig
from src.engine.scenario import Scenario, preset_scenario, sample_scenario
from src.engine.world import build_world, observe
from src.utils.error_handlers import handle_world_errors

router = APIRouter()

logger = logging.getLogger(__name__)


class ScenarioRequest(BaseModel):
    kind: Literal["circle_swap", "cluttered"] = "circle_swap"
    preset: str | None = Field(None, description="Preset name; overrides kind and the layout options")
    n_robots: int | None = Field(None, ge=1)
    seed: int = 0
    safe_radius: float = Field(0.1, gt=0)
    circle_radius: float = Field(2.0, gt=0)
    half_width: float = Field(5.0, gt=0)
    n_obstacles: int = Field(12, ge=0)
    obstacle_radius: float = Field(0.5, gt=0)


class ObserveRequest(BaseModel):
    scenario: Scenario
    world: WorldConfig = WorldConfig()


@router.post("/scenario")
@handle_world_errors
async def create_scenario(request: ScenarioRequest):
    """Generate a scenario from a seed (or a named preset)"""
    if request.preset is not None:
        scenario = preset_scenario(request.preset, request.seed, request.n_robots)
    else:
        scenario = sample_scenario(
            request.kind,
            request.n_robots or 4,
            request.seed,
            safe_radius=request.safe_radius,
            circle_radius=request.circle_radius,
            half_width=request.half_width,
            n_obstacles=request.n_obstacles,
            obstacle_radius=request.obstacle_radius,
        )
    logger.info(f"Generated {scenario.kind} scenario with {scenario.n_robots} robots (seed {request.seed})")
    return {"message": "OK", "scenario": scenario.model_dump()}


@router.post("/observe")
@handle_world_errors
async def observe_scenario(request: ObserveRequest):
    """Observation of every robot at the start of the scenario"""
    world = build_world(request.world, request.scenario)
    observations = []
    for robot_id in world.active_ids():
        obs = observe(world, robot_id)
        observations.append(
            {
                "robot": robot_id,
                "local": asdict(obs.local),
                "neighbors": [asdict(n) for n in obs.neighbors],
            }
        )
    return {"message": "OK", "observations": observations}
