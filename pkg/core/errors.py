"""
Swarm Scaling - Exception Hierarchy

All errors raised by the simulator, the fitting pipeline and the sweep
orchestrator derive from SwarmScalingError so callers (and the CLI) can
separate configuration problems from runtime failures.
"""

from typing import Any, Dict, Optional


class SwarmScalingError(Exception):
    """Base class for all package errors"""


class ConfigError(SwarmScalingError):
    """Invalid sweep spec, instance file or parameter set"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class SimulationDivergedError(SwarmScalingError, RuntimeError):
    """Non-finite force or state encountered while integrating"""


class FitError(SwarmScalingError, ValueError):
    """A scaling fit could not be computed from the supplied data"""


class CollapseError(SwarmScalingError, ValueError):
    """Rescaled curves share no common support"""


class RecordSchemaError(SwarmScalingError):
    """Record file written with an incompatible schema version"""


class SweepAbortedError(SwarmScalingError, RuntimeError):
    """Too many runs in a sweep failed"""

    def __init__(self, message: str, summary: Optional[Dict[str, Any]] = None):
        self.summary = summary or {}
        super().__init__(message)


class PlannerInfeasibleError(SwarmScalingError, RuntimeError):
    """Survival caps cannot be met under the kinematic bounds"""

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        self.report = report or {}
        super().__init__(message)
