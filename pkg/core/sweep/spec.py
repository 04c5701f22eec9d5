"""
Swarm Scaling - Sweep Specifications

A SweepSpec names a scenario, a cartesian grid over (dotted) parameter
names, fixed base overrides, the ensemble size and the base seed. The
scenario registry maps each scenario to its parameter model and to the
function that turns one validated parameter set plus a seed into a metric.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Type, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import ConfigError
from ..settings import ParamModel, config_error_from, has_field, load_yaml
from ..swarm.battle import BattleParams, run_battle
from ..swarm.planner import PlannerInstance, run_planner_instance
from ..swarm.pursuit import PursuitParams, run_pursuit
from ..swarm.search import SearchParams, run_search


class Scenario(str, Enum):
    """Scenarios a sweep can drive"""
    BATTLE = "battle"
    SEARCH = "search"
    PURSUIT = "pursuit"
    PLANNER = "planner"


@dataclass
class RunResult:
    metric_value: float
    flags: List[str] = field(default_factory=list)


def _battle(params: BattleParams, seed: int) -> RunResult:
    outcome = run_battle(params, seed)
    return RunResult(outcome.attacker_survival, outcome.flags)


def _search(params: SearchParams, seed: int) -> RunResult:
    outcome = run_search(params, seed)
    return RunResult(outcome.coverage, list(outcome.flags))


def _pursuit(params: PursuitParams, seed: int) -> RunResult:
    outcome = run_pursuit(params, seed)
    return RunResult(outcome.kill_time, outcome.flags)


def _planner(params: PlannerInstance, seed: int) -> RunResult:
    plan = run_planner_instance(params, seed)
    flags = [] if plan.solution.converged else ["not_converged"]
    return RunResult(float(plan.deployed), flags)


@dataclass
class ScenarioRunner:
    model: Type[ParamModel]
    run: Callable[[Any, int], RunResult]
    metric_name: str


SCENARIOS: Dict[Scenario, ScenarioRunner] = {
    Scenario.BATTLE: ScenarioRunner(BattleParams, _battle, "attacker_survival"),
    Scenario.SEARCH: ScenarioRunner(SearchParams, _search, "coverage"),
    Scenario.PURSUIT: ScenarioRunner(PursuitParams, _pursuit, "kill_time"),
    Scenario.PLANNER: ScenarioRunner(PlannerInstance, _planner, "deployed"),
}


class SweepSpec(BaseModel):
    """Cartesian sweep over one scenario's parameters"""

    model_config = ConfigDict(extra="forbid")

    scenario: Scenario
    grid: Dict[str, List[Any]]
    base: Dict[str, Any] = Field(default_factory=dict)
    ensemble: int = Field(1, ge=1)
    base_seed: int = Field(0, ge=0)
    output: str = "results/records.csv"
    max_failure_fraction: float = Field(0.1, ge=0, le=1)

    @property
    def runner(self) -> ScenarioRunner:
        return SCENARIOS[self.scenario]

    def check(self) -> "SweepSpec":
        """Raise ConfigError for an empty grid or names the scenario does not know"""
        if not self.grid:
            raise ConfigError("grid must name at least one parameter", field="grid")
        model = self.runner.model
        for name, values in self.grid.items():
            if not has_field(model, name):
                raise ConfigError(f"unknown parameter for scenario {self.scenario.value}", field=f"grid.{name}")
            if not values:
                raise ConfigError("value list is empty", field=f"grid.{name}")
        return self


def load_sweep_spec(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> SweepSpec:
    """Read and validate a YAML sweep spec; ``overrides`` replace top-level keys"""
    document = load_yaml(path)
    document.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        spec = SweepSpec.model_validate(document)
    except ValidationError as exc:
        raise config_error_from(exc) from exc
    return spec.check()
