"""
Experiment configuration models.

Values resolve as model defaults < environment < JSON config file < command-line flags.
Unknown keys are rejected and every document carries ``schema_version``.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ictd.cartpole import DEFAULT_TILE_WIDTHS
from ictd.constants import EQUIVALENCE_TOL, INVARIANT_SET_MIN_SAMPLES, SCHEMA_VERSION
from ictd.env_variables import ICTD_WORKERS
from ictd.exception import ConfigError


class _Config(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = Field(SCHEMA_VERSION, description="Configuration schema version")

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}, expected {SCHEMA_VERSION}")
        return value


class TrainConfig(_Config):
    n: int = Field(30, ge=1, description="Context length")
    tau: int = Field(347, description="Trajectory length per task")
    k: int = Field(4000, ge=1, description="Number of training tasks")
    alpha: float = Field(0.001, ge=0.0, description="Adam learning rate")
    gamma: float = Field(0.9, ge=0.0, lt=1.0, description="Discount factor")
    L: int = Field(3, ge=1, description="Transformer layers")
    shared: bool = Field(True, description="Apply one (P, Q) pair at every layer")
    attn: Literal["linear", "softmax"] = Field("linear", description="Attention kind")
    d: int = Field(4, ge=1, description="Feature dimension")
    weight_decay: float = Field(1e-6, ge=0.0, description="Decoupled weight decay rate")
    seed: int = Field(0, description="Base seed of the run")
    task_source: Literal["boyan", "boyan-representable", "cartpole"] = Field("boyan", description="Task generator")
    log_every: int = Field(1000, ge=1, description="Updates between metric records")
    states: int = Field(10, ge=3, description="Boyan chain size")
    snapshot_every: int = Field(40, ge=1, description="Tasks between parameter snapshots")
    vtd_fit_tasks: int = Field(200, ge=1, description="Tasks used to fit the batch TD learning rate")
    comparison_metrics: bool = Field(True, description="Compute VD, IWS and SS against fitted batch TD")
    freeze_task: bool = Field(False, description="Train on one frozen task")
    tile_widths: List[float] = Field(list(DEFAULT_TILE_WIDTHS), description="CartPole tile widths")
    seeds: Optional[List[int]] = Field(None, description="Seed sweep; defaults to [seed]")
    workers: int = Field(1, ge=1, description="Worker processes for a seed sweep (env ICTD_WORKERS)")

    @model_validator(mode="after")
    def _long_enough(self) -> "TrainConfig":
        if self.tau < self.n + 2:
            raise ValueError(f"tau={self.tau} is too short for context length n={self.n} (need tau >= n + 2)")
        return self

    def seed_list(self) -> List[int]:
        return list(self.seeds) if self.seeds else [self.seed]


class VerifyConfig(_Config):
    kind: Literal["td0", "td0-onelayer", "rg", "td-lambda", "avg", "all"] = Field("td0", description="Construction, or all of them")
    layers: int = Field(40, ge=0, description="Maximum depth L")
    n: int = Field(20, ge=1, description="Context length")
    d: int = Field(4, ge=1, description="Feature dimension")
    seeds: int = Field(30, ge=1, description="Number of random prompts")
    lam: float = Field(0.0, description="TD(lambda) decay")
    seed: int = Field(0, description="Base seed")
    tolerance: float = Field(EQUIVALENCE_TOL, gt=0.0, description="Absolute tolerance per layer")

    @field_validator("lam")
    @classmethod
    def _lambda_range(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {value}")
        return value


class InvariantSetConfig(_Config):
    eta: float = Field(1.0, description="P bottom-right entry")
    c: float = Field(-1.0, description="Scale of the Q top-left block")
    c_prime: float = Field(0.0, description="Scale of the Q middle-left block")
    n: int = Field(30, ge=1, description="Context length")
    d: int = Field(4, ge=1, description="Feature dimension")
    samples: int = Field(10_000, ge=INVARIANT_SET_MIN_SAMPLES, description="Monte-Carlo task count")
    states: int = Field(10, ge=3, description="Boyan chain size")
    gamma: float = Field(0.9, ge=0.0, lt=1.0, description="Discount factor")
    seed: int = Field(0, description="Base seed")
    negative_control: bool = Field(True, description="Also run the perturbed control, which must fail")


class DemoConfig(_Config):
    tasks: int = Field(300, ge=1, description="Representable tasks")
    states_min: int = Field(5, ge=3, description="Smallest chain size")
    states_max: int = Field(10, ge=3, description="Largest chain size")
    d: int = Field(5, ge=1, description="Feature dimension")
    gamma: float = Field(0.9, ge=0.0, lt=1.0, description="Discount factor")
    L: int = Field(15, ge=1, description="Transformer layers")
    context_max: int = Field(40, ge=1, description="Grid runs over context lengths 1..context_max")
    alpha: float = Field(1.0, gt=0.0, description="Step size of the construction, C = alpha I")
    seed: int = Field(0, description="Base seed")

    @model_validator(mode="after")
    def _state_range(self) -> "DemoConfig":
        if self.states_min > self.states_max:
            raise ValueError(f"states_min={self.states_min} exceeds states_max={self.states_max}")
        return self

#--------------------------------------------------

ConfigT = TypeVar("ConfigT", bound=_Config)

# Raw strings; pydantic parses them so a malformed value fails like any other config error.
ENV_DEFAULTS: Dict[str, Optional[str]] = {"workers": ICTD_WORKERS}


def read_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def resolve_config(model: Type[ConfigT], path: Optional[Path] = None,
                   overrides: Optional[Mapping[str, Any]] = None) -> ConfigT:
    """Defaults, then the environment, then the file, then every override that is not None."""
    values = {key: value for key, value in ENV_DEFAULTS.items() if key in model.model_fields and value is not None}
    values.update(read_config_file(path))
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    try:
        config = model.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid {model.__name__}: {e}")
    logging.debug({"event": "config_resolved", "model": model.__name__, "config": config.model_dump()})
    return config
