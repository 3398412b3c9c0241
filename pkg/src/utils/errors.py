"""
Domain exceptions raised by the simulator, the force field, the learner and the
evaluation bench. The HTTP layer and the CLI translate them in
src/utils/error_handlers.py.
"""


class PlannerError(Exception):
    """Base class for every error raised by the planning stack"""


class ConfigError(PlannerError):
    """A configuration value violates its declared invariants"""


class MalformedScenarioError(PlannerError):
    """Scenario violates the start/goal separation or obstacle clearance rules"""


class OvercrowdedArenaError(PlannerError):
    """Rejection sampling could not place every robot within its attempt budget"""


class DegenerateGeometryError(PlannerError):
    """Coincident points, contact with an obstacle surface or a zero-length blend"""


class InactiveRobotError(PlannerError):
    """A command or observation was requested for a robot that already finished"""


class MalformedCommandError(PlannerError):
    """A step was requested with missing or non-unit heading commands"""


class UnsupportedNodeError(PlannerError):
    """The loss was not produced through recorded differentiable operations"""


class NumericalDivergenceError(PlannerError):
    """A non-finite ratio, loss or gradient norm appeared during an update"""


class CheckpointError(PlannerError):
    """Base class for checkpoint persistence failures"""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint header or payload cannot be parsed"""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written with an unsupported format version"""


class ArchMismatchError(CheckpointError):
    """Checkpoint network architecture differs from the requested one"""


class TraceFormatError(PlannerError):
    """Episode trace file is unreadable, or too short for the requested metric"""
