"""
Validated configuration models. Defaults are the published training setup.
"""

import json
import math
from pathlib import Path
from typing import Any, Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.utils.errors import ConfigError

PlannerKind = Literal["rpf_attention", "rpf_mean_embed", "vanilla_apf", "ppo_steer"]
LearnedKind = Literal["rpf_attention", "rpf_mean_embed", "ppo_steer"]

# (eta, lambda) box for the force-field gains, steering bound for the baseline
GAIN_LOW = (0.0, 0.0)
GAIN_HIGH = (0.1, 5.0)
STEER_BOUND = 2.5


class WorldConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    desired_speed: float = Field(0.5, gt=0)
    safe_radius: float = Field(0.1, gt=0)
    detection_range: float = Field(6.0, gt=0)
    timestep: float = Field(0.1, gt=0)
    max_steps: int = Field(1000, ge=1)
    reward_range: float = Field(10.0, gt=0)

    @model_validator(mode="after")
    def _range_covers_robot(self):
        if self.detection_range <= 2 * self.safe_radius:
            raise ValueError("detection_range must exceed twice the safe radius")
        return self

    @property
    def step_length(self) -> float:
        return self.desired_speed * self.timestep


class ApfConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    influence_range: float = Field(10.0, gt=0)
    wall_follow_threshold: float = Field(1.0, ge=0)
    wall_following: bool = True
    soft_rule: bool = True


class NetArch(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: LearnedKind = "rpf_attention"
    embed_dim: int = Field(64, ge=1)
    hidden: tuple[int, ...] = (256, 256)
    obs_loc_dim: int = Field(4, ge=1)
    neighbor_dim: int = Field(3, ge=1)
    action_low: tuple[float, ...] = GAIN_LOW
    action_high: tuple[float, ...] = GAIN_HIGH

    @model_validator(mode="after")
    def _check_shapes(self):
        if not self.hidden or any(width < 1 for width in self.hidden):
            raise ValueError("hidden layer widths must all be >= 1")
        if len(self.action_low) != len(self.action_high) or not self.action_low:
            raise ValueError("action bounds must be non-empty and of equal length")
        if any(lo >= hi for lo, hi in zip(self.action_low, self.action_high)):
            raise ValueError("action_low must be below action_high")
        if self.kind == "ppo_steer" and len(self.action_low) != 1:
            raise ValueError("ppo_steer uses a one-dimensional steering action")
        if self.kind != "ppo_steer" and len(self.action_low) != 2:
            raise ValueError("force-field policies output exactly (eta, lambda)")
        return self

    @property
    def action_dim(self) -> int:
        return len(self.action_low)

    @property
    def attention(self) -> bool:
        return self.kind != "rpf_mean_embed"

    @classmethod
    def for_kind(cls, kind: LearnedKind, **overrides: Any) -> "NetArch":
        if kind == "ppo_steer":
            overrides.setdefault("action_low", (-STEER_BOUND,))
            overrides.setdefault("action_high", (STEER_BOUND,))
        return cls(kind=kind, **overrides)


class PpoConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    clip: float = Field(0.2, gt=0, lt=1)
    gamma: float = Field(0.999, gt=0, lt=1)
    gae_tau: float = Field(0.9, gt=0, lt=1)
    value_coef: float = Field(0.5, ge=0)
    entropy_coef: float = Field(0.001, ge=0)
    lr_initial: float = Field(0.0003, ge=0)
    lr_decay: float = Field(0.999, gt=0, le=1)
    batch_interval: int = Field(100, ge=1)
    epochs: int = Field(1, ge=1)
    episodes: int = Field(1000, ge=1)
    max_grad_norm: float = Field(0.5, gt=0)
    checkpoint_interval: int = Field(100, ge=1)


class RunConfig(BaseModel):
    """Everything one CLI invocation needs; flags override file values"""

    model_config = ConfigDict(frozen=True)

    command: Literal["train", "eval", "replay", "plot"]
    seed: int = 0
    output_dir: str = "runs"
    scenario: str | None = None
    scenario_kind: Literal["cluttered", "circle_swap"] = "circle_swap"
    n_robots: int | None = Field(None, ge=1)
    obstacle_radius: float | None = None
    planner: LearnedKind = "rpf_attention"
    planners: tuple[PlannerKind, ...] = ("vanilla_apf",)
    checkpoints: dict[str, str] = Field(default_factory=dict)
    seeds: int = Field(1, ge=1)
    input_path: str | None = None
    world: WorldConfig = WorldConfig()
    apf: ApfConfig = ApfConfig()
    ppo: PpoConfig = PpoConfig()
    arch: dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def resolve(
        cls, command: str, file_values: dict[str, Any] | None, flag_values: dict[str, Any]
    ) -> "RunConfig":
        """Merge built-in defaults < config file < flags (None flags are ignored)"""
        merged: dict[str, Any] = dict(file_values or {})
        for section in ("world", "apf", "ppo", "arch"):
            merged[section] = dict(merged.get(section) or {})

        for key, value in flag_values.items():
            if value is None:
                continue
            section, _, field = key.partition(".")
            if field:
                merged[section][field] = value
            else:
                merged[key] = value

        merged["command"] = command
        return parse_config(cls, merged)

    def net_arch(self) -> NetArch:
        return parse_config(NetArch, {**NetArch.for_kind(self.planner).model_dump(), **self.arch})


ModelT = TypeVar("ModelT", bound=BaseModel)


def parse_config(model: type[ModelT], values: dict[str, Any]) -> ModelT:
    """Validate a mapping, converting pydantic errors into ConfigError"""
    try:
        return model.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid {model.__name__}: {e.errors(include_url=False)}") from e


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} does not exist")
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return values


def half_range_log_std(low: tuple[float, ...], high: tuple[float, ...]) -> list[float]:
    """Initial log-std per action dimension: log(0.5 * half-range)"""
    return [math.log(0.25 * (hi - lo)) for lo, hi in zip(low, high)]
