import math

import numpy as np

from src.utils.errors import DegenerateGeometryError


def wrap_angle(angle: float) -> float:
    """Map an angle into (-pi, pi]"""
    wrapped = math.atan2(math.sin(angle), math.cos(angle))
    return math.pi if wrapped == -math.pi else wrapped


def heading_vector(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def vector_angle(vector: np.ndarray) -> float:
    return wrap_angle(math.atan2(vector[1], vector[0]))


def normalize(vector: np.ndarray, what: str = "vector") -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise DegenerateGeometryError(f"cannot normalize a zero-length {what}")
    return vector / norm


def rotate_ccw(vector: np.ndarray) -> np.ndarray:
    """Rotate a 2-vector by +90 degrees"""
    return np.array([-vector[1], vector[0]])


def local_azimuth(origin: np.ndarray, target: np.ndarray, heading: float) -> float:
    """Bearing of target seen from origin, in the frame rotated by -heading"""
    offset = target - origin
    return wrap_angle(math.atan2(offset[1], offset[0]) - heading)
