"""
Artificial potential field with wall following and its soft extension.

Every function here is pure; forces are 2-vectors as numpy arrays.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.config import ApfConfig
from src.engine.geometry import heading_vector, normalize, rotate_ccw
from src.utils.errors import DegenerateGeometryError

ZERO = np.zeros(2)


class ApfParams(BaseModel):
    """The two gains the learned policy modulates online"""

    model_config = ConfigDict(frozen=True)

    eta: float = Field(ge=0.0, le=0.1)
    lam: float = Field(ge=0.0, le=5.0)


class Regime(str, Enum):
    FREE = "free"
    WALL_FOLLOW = "wall_follow"
    SOFT = "soft"


@dataclass(frozen=True)
class ForceBreakdown:
    attractive: np.ndarray
    repulsive: np.ndarray
    inter_robot: np.ndarray
    resultant: np.ndarray
    n1: np.ndarray | None
    n2: np.ndarray | None
    soft: np.ndarray | None
    resolved: np.ndarray
    regime: Regime

    def as_dict(self) -> dict:
        def vec(v):
            return None if v is None else [float(v[0]), float(v[1])]

        return {
            "F_a": vec(self.attractive),
            "F_r": vec(self.repulsive),
            "F_in": vec(self.inter_robot),
            "F_ar": vec(self.resultant),
            "n_1": vec(self.n1),
            "n_2": vec(self.n2),
            "F_soft": vec(self.soft),
            "resolved": vec(self.resolved),
            "regime": self.regime.value,
        }


def attractive_force(p_i: np.ndarray, p_g: np.ndarray) -> np.ndarray:
    offset = np.asarray(p_g, dtype=float) - np.asarray(p_i, dtype=float)
    d_g = float(np.linalg.norm(offset))
    if d_g == 0.0:
        raise DegenerateGeometryError("robot position coincides with its goal")
    return offset / d_g


def repulsive_force(p_i: np.ndarray, p_o: np.ndarray, eta: float, rho: float) -> np.ndarray:
    """Repulsion from the nearest obstacle surface point p_o, zero beyond rho"""
    offset = np.asarray(p_i, dtype=float) - np.asarray(p_o, dtype=float)
    d_o = float(np.linalg.norm(offset))
    if d_o == 0.0:
        raise DegenerateGeometryError("robot is in contact with the obstacle surface")
    if d_o > rho:
        return ZERO.copy()
    return eta * (1.0 / d_o - 1.0 / rho) * offset / d_o**3


def inter_robot_force(p_i: np.ndarray, neighbor_positions: np.ndarray, lam: float) -> np.ndarray:
    neighbors = np.asarray(neighbor_positions, dtype=float).reshape(-1, 2)
    if len(neighbors) == 0:
        return ZERO.copy()
    offsets = neighbors - np.asarray(p_i, dtype=float)
    distances = np.linalg.norm(offsets, axis=1)
    if np.any(distances == 0.0):
        raise DegenerateGeometryError("neighbor position coincides with the robot")
    coefficients = (0.5 - lam / distances) / distances
    return (coefficients[:, None] * offsets).sum(axis=0)


def tangent_directions(p_i: np.ndarray, center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(counterclockwise, clockwise) unit tangents of the obstacle boundary seen from p_i"""
    radial = np.asarray(p_i, dtype=float) - np.asarray(center, dtype=float)
    if float(np.linalg.norm(radial)) == 0.0:
        raise DegenerateGeometryError("robot sits at the obstacle center")
    n1 = rotate_ccw(normalize(radial, "radial direction"))
    return n1, -n1


def select_wall_direction(
    n1: np.ndarray,
    n2: np.ndarray,
    f_in: np.ndarray,
    current_heading: np.ndarray,
    threshold: float,
) -> np.ndarray:
    """Strong inter-robot force decides the tangent, otherwise the current heading does"""
    reference = f_in if float(np.linalg.norm(f_in)) > threshold else current_heading
    return n1 if float(n1 @ reference) >= float(n2 @ reference) else n2


def soft_force(f_ar: np.ndarray, f_r: np.ndarray, n: np.ndarray) -> np.ndarray:
    blend = f_ar + 2.0 * float(np.linalg.norm(f_r)) * n
    return normalize(blend, "soft wall-following blend")


def resolve_direction(
    p_i: np.ndarray,
    p_g: np.ndarray,
    nearest_obstacle: tuple[np.ndarray, float] | None,
    neighbors: np.ndarray,
    heading: float,
    params: ApfParams,
    config: ApfConfig,
) -> ForceBreakdown:
    """
    Compose the forces acting on one robot and pick its heading

    Args:
        nearest_obstacle: (center, radius) of the nearest obstacle, or None
        neighbors: (K, 2) positions of the detected neighbors
        heading: Current heading angle in radians
    """
    p_i = np.asarray(p_i, dtype=float)
    f_a = attractive_force(p_i, p_g)
    f_in = inter_robot_force(p_i, neighbors, params.lam)

    f_r = ZERO.copy()
    n1 = n2 = None
    if nearest_obstacle is not None:
        center, radius = np.asarray(nearest_obstacle[0], dtype=float), float(nearest_obstacle[1])
        radial = p_i - center
        d_center = float(np.linalg.norm(radial))
        if d_center <= radius:
            raise DegenerateGeometryError("robot is inside or on the obstacle boundary")
        if d_center - radius <= config.influence_range:
            surface_point = center + radius * radial / d_center
            f_r = repulsive_force(p_i, surface_point, params.eta, config.influence_range)
            n1, n2 = tangent_directions(p_i, center)

    f_ar = f_a + f_r

    if n1 is not None and config.wall_following:
        heading_vec = heading_vector(heading)
        # exact cancellation is the stuck case wall following exists to break
        if float(f_ar @ f_a) < 0.0 or not np.any(f_ar):
            chosen = select_wall_direction(n1, n2, f_in, heading_vec, config.wall_follow_threshold)
            return ForceBreakdown(f_a, f_r, f_in, f_ar, n1, n2, None, chosen, Regime.WALL_FOLLOW)

        if float(f_r @ f_a) < 0.0 and config.soft_rule:
            chosen = select_wall_direction(n1, n2, f_in, heading_vec, config.wall_follow_threshold)
            try:
                f_soft = soft_force(f_ar, f_r, chosen)
            except DegenerateGeometryError:
                f_soft = chosen
            return ForceBreakdown(f_a, f_r, f_in, f_ar, n1, n2, f_soft, f_soft, Regime.SOFT)

    total = f_a + f_r + f_in
    if not np.any(total):
        total = f_a
    return ForceBreakdown(f_a, f_r, f_in, f_ar, n1, n2, None, normalize(total), Regime.FREE)
