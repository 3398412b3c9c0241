import logging

import numpy as np
from fastapi import APIRouter
from pydantic import BaseModel, Field

from src.config import ApfConfig
from src.engine.apf import ApfParams, resolve_direction
from src.engine.scenario import Obstacle, Point
from src.utils.error_handlers import handle_planning_errors

router = APIRouter()

logger = logging.getLogger(__name__)


class ResolveRequest(BaseModel):
    position: Point
    goal: Point
    heading: float = 0.0
    obstacle: Obstacle | None = Field(None, description="Nearest obstacle, if any")
    neighbors: list[Point] = Field(default_factory=list)
    gains: ApfParams = ApfParams(eta=0.05, lam=2.0)
    apf: ApfConfig = ApfConfig()


@router.post("/resolve")
@handle_planning_errors
async def resolve(request: ResolveRequest):
    """Force breakdown and resolved heading for one robot configuration"""
    obstacle = None
    if request.obstacle is not None:
        obstacle = (np.array(request.obstacle.center), request.obstacle.radius)
    forces = resolve_direction(
        np.array(request.position),
        np.array(request.goal),
        obstacle,
        np.array(request.neighbors, dtype=float).reshape(-1, 2),
        request.heading,
        request.gains,
        request.apf,
    )
    return {"message": "OK", "forces": forces.as_dict()}
