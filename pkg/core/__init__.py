"""
Swarm Scaling - Core Module

Swarm engagement simulators (battle, search, pursuit), the trajectory
planner, the scaling-analysis toolkit and the sweep orchestrator.
"""

__version__ = "1.0.0"

# Errors and logging
from .errors import (
    SwarmScalingError,
    ConfigError,
    SimulationDivergedError,
    FitError,
    CollapseError,
    RecordSchemaError,
    SweepAbortedError,
    PlannerInfeasibleError
)
from .logging_config import configure_logging

# Scenarios
from .swarm.battle import BattleParams, BattleOutcome, run_battle, ensemble_pa
from .swarm.search import SearchParams, SearchOutcome, run_search, simulate_search, ensemble_coverage
from .swarm.pursuit import PursuitParams, PursuitOutcome, run_pursuit, ensemble_tk
from .swarm.planner import (
    PlannerSettings,
    PlannerProblem,
    PlannerSolution,
    PlannerInstance,
    solve,
    plan_minimum_deployment,
    scaling_exponent_study
)

# Analysis
from .analysis.scaling import (
    PerformanceCurve,
    ScalingFit,
    fit_tanh_threshold,
    fit_breakpoint,
    fit_powerlaw,
    predict_na_eff,
    predict_nd_eff,
    compute_neff_search,
    collapse_score
)

# Sweeps
from .sweep.spec import Scenario, SweepSpec, load_sweep_spec
from .sweep.records import RunRecord, load_records, save_records
from .sweep.runner import run_sweep, expand_grid

__all__ = [
    'SwarmScalingError',
    'ConfigError',
    'SimulationDivergedError',
    'FitError',
    'CollapseError',
    'RecordSchemaError',
    'SweepAbortedError',
    'PlannerInfeasibleError',
    'configure_logging',
    'BattleParams',
    'BattleOutcome',
    'run_battle',
    'ensemble_pa',
    'SearchParams',
    'SearchOutcome',
    'run_search',
    'simulate_search',
    'ensemble_coverage',
    'PursuitParams',
    'PursuitOutcome',
    'run_pursuit',
    'ensemble_tk',
    'PlannerSettings',
    'PlannerProblem',
    'PlannerSolution',
    'PlannerInstance',
    'solve',
    'plan_minimum_deployment',
    'scaling_exponent_study',
    'PerformanceCurve',
    'ScalingFit',
    'fit_tanh_threshold',
    'fit_breakpoint',
    'fit_powerlaw',
    'predict_na_eff',
    'predict_nd_eff',
    'compute_neff_search',
    'collapse_score',
    'Scenario',
    'SweepSpec',
    'load_sweep_spec',
    'RunRecord',
    'load_records',
    'save_records',
    'run_sweep',
    'expand_grid'
]
