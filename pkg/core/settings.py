"""
Swarm Scaling - Shared Parameter Models and YAML Loading

Pydantic models used by more than one scenario, plus the helpers that turn
YAML documents and dotted override names into validated parameter sets.
"""

from pathlib import Path
from typing import Any, Dict, Mapping, Type, TypeVar, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

ModelT = TypeVar("ModelT", bound=BaseModel)


class ParamModel(BaseModel):
    """Base for every parameter set: immutable, no unknown fields"""

    model_config = ConfigDict(extra="forbid", frozen=True)


class DynamicsParams(ParamModel):
    """Mass, thrust and damping of one agent class plus the integration step"""

    mass: float = Field(1.0, gt=0)
    thrust: float = Field(1.0, ge=0)
    damping: float = Field(1.0, gt=0)
    dt: float = Field(0.01, gt=0)

    @property
    def speed_scale(self) -> float:
        """V = K/B"""
        return self.thrust / self.damping

    @property
    def time_scale(self) -> float:
        """tau = m/B"""
        return self.mass / self.damping


class ForceLawParams(ParamModel):
    """Leonard spacing d0, cutoff d1 and avoidance radius dr"""

    d0: float = Field(2.0, gt=0)
    d1: float = Field(3.0, gt=0)
    dr: float = Field(6.0, gt=0)

    @model_validator(mode="after")
    def _check_ordering(self) -> "ForceLawParams":
        if not self.d0 < self.d1:
            raise ValueError(f"d0 ({self.d0}) must be smaller than d1 ({self.d1})")
        return self


class WeaponParams(ParamModel):
    """Rate of fire and range of a Gaussian-CDF weapon"""

    rate: float = Field(1.0, ge=0)
    range: float = Field(1.0, gt=0)


def config_error_from(exc: ValidationError) -> ConfigError:
    """Translate a pydantic ValidationError into a ConfigError naming the field"""
    first = exc.errors()[0]
    field = ".".join(str(part) for part in first.get("loc", ())) or None
    return ConfigError(first.get("msg", str(exc)), field=field)


def build_params(model: Type[ModelT], values: Mapping[str, Any]) -> ModelT:
    """Validate a nested mapping into ``model``, raising ConfigError on failure"""
    try:
        return model.model_validate(dict(values))
    except ValidationError as exc:
        raise config_error_from(exc) from exc


def set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    """Assign ``value`` at a dotted path inside a nested dict, creating levels"""
    parts = dotted.split(".")
    node = target
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value


def flatten(values: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Flatten nested mappings into dotted keys (inverse of set_dotted)"""
    flat: Dict[str, Any] = {}
    for key, value in values.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def has_field(model: Type[BaseModel], dotted: str) -> bool:
    """True when ``dotted`` addresses a field of ``model`` or of its nested models"""
    current: Any = model
    for part in dotted.split("."):
        fields = getattr(current, "model_fields", None)
        if fields is None or part not in fields:
            return False
        current = fields[part].annotation
    return True


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML mapping, raising ConfigError for missing or malformed files"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as handle:
            document = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigError(f"top level of {path} must be a mapping")
    return document
