"""
Swarm Scaling - Sweep Runner

Expands a SweepSpec into seeded run tasks, executes them on a process pool
and appends one record per finished run. The parent process is the only
writer, runs already on disk are skipped, and every run's seed comes from
its index, so the record set does not depend on the worker count or on
completion order.
"""

import copy
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import structlog

from ..errors import SwarmScalingError, SweepAbortedError
from ..settings import ParamModel, build_params, flatten, set_dotted
from ..swarm.attrition import derive_seed
from .records import RecordStore, RunRecord, load_records
from .spec import SCENARIOS, Scenario, SweepSpec

logger = structlog.get_logger(__name__)


@dataclass
class RunTask:
    """One run of a sweep"""
    run_index: int
    scenario: Scenario
    params: ParamModel
    seed: int
    point: Dict[str, Any]  # grid values of this run


def expand_grid(spec: SweepSpec) -> List[RunTask]:
    """
    Cartesian product of the grid times the ensemble, in a fixed order:
    grid names in spec order, the last name varying fastest, ensemble
    members innermost.
    """
    spec.check()
    model = spec.runner.model
    names = list(spec.grid)
    tasks: List[RunTask] = []
    run_index = 0
    for values in itertools.product(*(spec.grid[name] for name in names)):
        document = copy.deepcopy(spec.base)
        point = dict(zip(names, values))
        for name, value in point.items():
            set_dotted(document, name, value)
        params = build_params(model, document)
        for _ in range(spec.ensemble):
            tasks.append(RunTask(run_index, spec.scenario, params, derive_seed(spec.base_seed, run_index), point))
            run_index += 1
    return tasks


def execute_task(scenario: str, params: Dict[str, Any], seed: int, run_index: int) -> RunRecord:
    """Worker entry point; failures become flagged records"""
    runner = SCENARIOS[Scenario(scenario)]
    start = time.perf_counter()
    try:
        result = runner.run(runner.model.model_validate(params), seed)
        value, flags = float(result.metric_value), list(result.flags)
    except (SwarmScalingError, ArithmeticError, ValueError, RuntimeError) as exc:
        logger.error("sweep.run_failed", run_index=run_index, seed=seed, error=str(exc))
        value, flags = math.nan, ["failed", type(exc).__name__]
    return RunRecord(
        run_index=run_index,
        scenario=scenario,
        seed=seed,
        metric_name=runner.metric_name,
        metric_value=value,
        wall_time=time.perf_counter() - start,
        flags=flags,
        params=flatten(params),
    )


def run_sweep(spec: SweepSpec, workers: int = 1) -> List[RunRecord]:
    """
    Execute every pending run of ``spec`` and return the full record set.

    Raises:
        SweepAbortedError: more than ``spec.max_failure_fraction`` of the
            runs failed
    """
    tasks = expand_grid(spec)
    if not tasks:
        return []
    param_names = list(flatten(tasks[0].params.model_dump()))
    store = RecordStore(spec.output)
    done = store.open(param_names, meta={"spec": spec.model_dump(mode="json")})
    pending = [t for t in tasks if t.run_index not in done]
    failures = sum(1 for r in load_records(spec.output) if r.failed) if done else 0
    allowed = spec.max_failure_fraction * len(tasks)

    logger.info(
        "sweep.started",
        scenario=spec.scenario.value,
        runs=len(tasks),
        pending=len(pending),
        workers=workers,
    )

    def record(result: RunRecord) -> None:
        nonlocal failures
        store.append(result)
        if result.failed:
            failures += 1
            if failures > allowed:
                summary = {"failed": failures, "runs": len(tasks), "last_error": result.flags[-1]}
                raise SweepAbortedError(
                    f"{failures} of {len(tasks)} runs failed (limit {spec.max_failure_fraction:.0%})",
                    summary=summary,
                )

    payloads = [(t.scenario.value, t.params.model_dump(), t.seed, t.run_index) for t in pending]
    if workers <= 1:
        for payload in payloads:
            record(execute_task(*payload))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(execute_task, *payload) for payload in payloads]
            try:
                for future in as_completed(futures):
                    record(future.result())
            except SweepAbortedError:
                for future in futures:
                    future.cancel()
                raise

    logger.info("sweep.finished", scenario=spec.scenario.value, runs=len(tasks), failed=failures)
    return load_records(spec.output)


def run_single(scenario: Scenario, params: Dict[str, Any], seed: int) -> RunRecord:
    """One instance outside any sweep (the ``run`` subcommand)"""
    model = SCENARIOS[scenario].model
    validated = build_params(model, params)
    return execute_task(scenario.value, validated.model_dump(), seed, 0)
