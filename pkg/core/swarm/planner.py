"""
Swarm Scaling - Optimal Defender Path Planning

Direct transcription of the minimum-path-length engagement: defender
waypoints on a uniform time grid plus per-interval speed slacks, subject to
speed and acceleration bounds and a cap on every attacker's survival
probability. The nonlinear program is solved with a PHR augmented
Lagrangian whose inner problems go to L-BFGS-B; the final time is handled
by an outer bounded scalar search.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import Field
from scipy.optimize import minimize, minimize_scalar
from scipy.special import ndtr

from ..analysis.scaling import fit_powerlaw
from ..errors import FitError, PlannerInfeasibleError
from ..settings import ParamModel
from .pursuit import PursuitParams, PursuitTrace, run_pursuit

logger = structlog.get_logger(__name__)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class WeaponShape(ParamModel):
    """
    Kill-rate profile rho(r) = rate * Phi((offset - gain r^2) / spread).

    The rate halves where gain * r^2 = offset.
    """

    rate: float = Field(10.0, ge=0)
    offset: float = Field(1.44)  # F
    gain: float = Field(1.0, gt=0)  # a
    spread: float = Field(1.44, gt=0)  # sigma

    @classmethod
    def for_kill_radius(cls, radius: float, rate: float = 10.0) -> "WeaponShape":
        """Half-rate radius equal to ``radius``"""
        return cls(rate=rate, offset=radius**2, gain=1.0, spread=radius**2)

    def kill_rate(self, dist_sq):
        return self.rate * ndtr((self.offset - self.gain * np.asarray(dist_sq)) / self.spread)


class PlannerSettings(ParamModel):
    """Discretization, caps and solver controls"""

    n_intervals: int = Field(40, ge=2)
    p_surv_max: float = Field(0.05, gt=0, lt=1)
    weapon_rate: float = Field(10.0, ge=0)
    accel_factor: float = Field(2.0, gt=0)  # a_max = factor * V_d / tau
    tolerance: float = Field(1e-4, gt=0)
    slack_tolerance: float = Field(1e-3, gt=0)  # max |s - |v|| / v_max accepted at convergence
    penalty_init: float = Field(10.0, gt=0)
    penalty_growth: float = Field(10.0, gt=1)
    penalty_max: float = Field(1e8, gt=0)
    max_outer: int = Field(40, ge=1)
    inner_maxiter: int = Field(500, ge=1)
    optimize_horizon: bool = True
    horizon_evaluations: int = Field(10, ge=1)
    deploy_threshold: float = Field(0.01, gt=0, lt=1)


@dataclass
class PlannerProblem:
    """One engagement to plan; attackers fly straight lines for the whole horizon"""
    defender_start: np.ndarray  # (N_d, 2)
    attacker_start: np.ndarray  # (N_a, 2)
    attacker_velocity: np.ndarray  # (N_a, 2)
    horizon: float  # initial T_final
    n_intervals: int = 40
    v_max: float = 1.0
    a_max: float = 0.4
    p_surv_max: float = 0.05
    weapon: WeaponShape = field(default_factory=WeaponShape)

    def __post_init__(self):
        self.defender_start = np.asarray(self.defender_start, dtype=float).reshape(-1, 2)
        self.attacker_start = np.asarray(self.attacker_start, dtype=float).reshape(-1, 2)
        self.attacker_velocity = np.asarray(self.attacker_velocity, dtype=float).reshape(-1, 2)
        if self.n_intervals < 2:
            raise ValueError("n_intervals must be at least 2")
        if not 0 < self.p_surv_max < 1:
            raise ValueError("p_surv_max must lie in (0, 1)")
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("v_max and a_max must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if len(self.attacker_start) != len(self.attacker_velocity):
            raise ValueError("attacker start and velocity counts differ")

    @property
    def n_defenders(self) -> int:
        return len(self.defender_start)

    @property
    def n_attackers(self) -> int:
        return len(self.attacker_start)

    def attacker_paths(self, horizon: float) -> np.ndarray:
        """(N_a, N_T + 1, 2) attacker positions on the grid"""
        times = np.linspace(0.0, horizon, self.n_intervals + 1)
        return self.attacker_start[:, None, :] + self.attacker_velocity[:, None, :] * times[None, :, None]

    def static_init(self) -> np.ndarray:
        return np.repeat(self.defender_start[:, None, :], self.n_intervals + 1, axis=1)


@dataclass
class FeasibilityReport:
    speed_excess: float
    accel_excess: float
    survival_excess: float
    worst_attacker: int
    tolerance: float

    @property
    def max_violation(self) -> float:
        return max(self.speed_excess, self.accel_excess, self.survival_excess)

    @property
    def feasible(self) -> bool:
        return self.max_violation <= self.tolerance

    def as_dict(self) -> Dict[str, Any]:
        return {
            "speed_excess": self.speed_excess,
            "accel_excess": self.accel_excess,
            "survival_excess": self.survival_excess,
            "worst_attacker": self.worst_attacker,
            "max_violation": self.max_violation,
        }


@dataclass
class PlannerSolution:
    """Planned trajectories and their certificate values"""
    horizon: float  # T_final
    positions: np.ndarray  # (N_d, N_T + 1, 2)
    slacks: np.ndarray  # (N_d, N_T)
    log_survival: np.ndarray  # (N_a,)
    cost: float  # J
    path_lengths: np.ndarray  # (N_d,)
    converged: bool = True
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.horizon / (self.positions.shape[1] - 1)


def survival_log(defender_trajs: np.ndarray, attacker_traj: np.ndarray, weapon: WeaponShape, dt: float) -> float:
    """
    log p_surv of one attacker: -dt sum_j sum_k rho(|r_i - r_j|^2), left
    Riemann sum over every grid point but the last.

    Args:
        defender_trajs: (N_d, K, 2) defender positions
        attacker_traj: (K, 2) attacker positions on the same grid
        weapon: kill-rate profile
        dt: grid spacing
    """
    defender_trajs = np.asarray(defender_trajs, dtype=float).reshape(-1, len(attacker_traj), 2)
    rel = np.asarray(attacker_traj, dtype=float)[None, :-1, :] - defender_trajs[:, :-1, :]
    dist_sq = np.sum(rel**2, axis=-1)
    return float(-dt * weapon.kill_rate(dist_sq).sum())


def path_length(traj: np.ndarray, dt: float) -> float:
    """sum_k |(r_{k+1} - r_k) / dt| dt with forward differences"""
    traj = np.asarray(traj, dtype=float)
    if len(traj) < 2:
        raise ValueError("a path needs at least two waypoints")
    velocity = np.diff(traj, axis=0) / dt
    return float(np.hypot(velocity[:, 0], velocity[:, 1]).sum() * dt)


def _log_survival_all(positions: np.ndarray, attackers: np.ndarray, weapon: WeaponShape, dt: float) -> np.ndarray:
    rel = attackers[:, None, :-1, :] - positions[None, :, :-1, :]
    dist_sq = np.sum(rel**2, axis=-1)
    return -dt * weapon.kill_rate(dist_sq).sum(axis=(1, 2))


def _kinematics(positions: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    velocity = np.diff(positions, axis=1) / dt
    # defenders start at rest
    padded = np.concatenate((np.zeros_like(velocity[:, :1]), velocity), axis=1)
    accel = np.diff(padded, axis=1) / dt
    return velocity, accel


def check_feasibility(
    problem: PlannerProblem,
    positions: np.ndarray,
    horizon: float,
    tolerance: float = 1e-4,
) -> FeasibilityReport:
    """Re-evaluate every constraint of a trajectory set from scratch"""
    dt = horizon / problem.n_intervals
    velocity, accel = _kinematics(positions, dt)
    speed = np.hypot(velocity[..., 0], velocity[..., 1])
    acc = np.hypot(accel[..., 0], accel[..., 1])
    if problem.n_attackers:
        logp = _log_survival_all(positions, problem.attacker_paths(horizon), problem.weapon, dt)
        survival_excess = logp - math.log(problem.p_surv_max)
        worst = int(np.argmax(survival_excess))
        survival_max = float(max(survival_excess.max(), 0.0))
    else:
        worst, survival_max = -1, 0.0
    return FeasibilityReport(
        speed_excess=float(max((speed - problem.v_max).max(initial=0.0), 0.0)),
        accel_excess=float(max((acc - problem.a_max).max(initial=0.0), 0.0)),
        survival_excess=survival_max,
        worst_attacker=worst,
        tolerance=tolerance,
    )


class TrajectoryPlanner:
    """Augmented-Lagrangian solver for one PlannerProblem"""

    def __init__(self, problem: PlannerProblem, settings: Optional[PlannerSettings] = None):
        self.problem = problem
        self.settings = settings or PlannerSettings()
        self.n_d = problem.n_defenders
        self.n_t = problem.n_intervals
        self.log_cap = math.log(problem.p_surv_max)
        logger.debug("planner.initialized", defenders=self.n_d, attackers=problem.n_attackers, intervals=self.n_t)

    # decision vector: free waypoints k = 1..N_T, then slacks k = 0..N_T-1
    def _split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n_pos = self.n_d * self.n_t * 2
        free = z[:n_pos].reshape(self.n_d, self.n_t, 2)
        positions = np.concatenate((self.problem.defender_start[:, None, :], free), axis=1)
        return positions, z[n_pos:].reshape(self.n_d, self.n_t)

    @staticmethod
    def _pack(positions: np.ndarray, slacks: np.ndarray) -> np.ndarray:
        return np.concatenate((positions[:, 1:, :].ravel(), slacks.ravel()))

    def _constraints(self, positions, slacks, horizon, attackers):
        p = self.problem
        dt = horizon / self.n_t
        velocity, accel = _kinematics(positions, dt)
        v_sq = np.sum(velocity**2, axis=-1)
        a_sq = np.sum(accel**2, axis=-1)
        g_speed = (v_sq - p.v_max**2) / p.v_max**2
        g_accel = (a_sq - p.a_max**2) / p.a_max**2
        g_slack = (v_sq - slacks**2) / p.v_max**2
        if p.n_attackers:
            rel = attackers[:, None, :-1, :] - positions[None, :, :-1, :]
            dist_sq = np.sum(rel**2, axis=-1)
            logp = -dt * p.weapon.kill_rate(dist_sq).sum(axis=(1, 2))
        else:
            rel = dist_sq = None
            logp = np.zeros(0)
        g_surv = (logp - self.log_cap) / abs(self.log_cap)
        return (g_speed, g_accel, g_slack, g_surv), (velocity, accel, rel, dist_sq, dt)

    def _lagrangian(self, z, horizon, attackers, mults, mu, cost_scale):
        p = self.problem
        positions, slacks = self._split(z)
        (g_speed, g_accel, g_slack, g_surv), (velocity, accel, rel, dist_sq, dt) = self._constraints(
            positions, slacks, horizon, attackers
        )

        value = dt * slacks.sum() / cost_scale
        shifted = []
        for g, m in zip((g_speed, g_accel, g_slack, g_surv), mults):
            s = np.maximum(0.0, m + mu * g)
            value += float(np.sum(s**2 - m**2)) / (2.0 * mu)
            shifted.append(s)
        s_speed, s_accel, s_slack, s_surv = shifted

        grad_slack = np.full_like(slacks, dt / cost_scale) - s_slack * 2.0 * slacks / p.v_max**2
        grad_vel = (s_speed + s_slack)[..., None] * 2.0 * velocity / p.v_max**2

        grad_acc = s_accel[..., None] * 2.0 * accel / p.a_max**2
        grad_vel += grad_acc / dt
        grad_vel[:, :-1, :] -= grad_acc[:, 1:, :] / dt

        grad_pos = np.zeros_like(positions)
        grad_pos[:, 1:, :] += grad_vel / dt
        grad_pos[:, :-1, :] -= grad_vel / dt

        if p.n_attackers and np.any(s_surv > 0):
            w = p.weapon
            z_arg = (w.offset - w.gain * dist_sq) / w.spread
            density = w.rate * _INV_SQRT_2PI * np.exp(-0.5 * z_arg**2)
            # d logp_i / d r_jk = -dt * density * (2 a / sigma) * (r_i - r_jk)
            coef = (s_surv / abs(self.log_cap))[:, None, None] * (-dt) * density * (2.0 * w.gain / w.spread)
            grad_pos[:, :-1, :] += np.einsum("ijk,ijkc->jkc", coef, rel)

        grad = np.concatenate((grad_pos[:, 1:, :].ravel(), grad_slack.ravel()))
        return float(value), grad

    def _finish(self, positions, slacks, horizon, converged, diagnostics) -> PlannerSolution:
        dt = horizon / self.n_t
        velocity, _ = _kinematics(positions, dt)
        speed = np.hypot(velocity[..., 0], velocity[..., 1])
        lengths = speed.sum(axis=1) * dt
        logp = (
            _log_survival_all(positions, self.problem.attacker_paths(horizon), self.problem.weapon, dt)
            if self.problem.n_attackers else np.zeros(0)
        )
        return PlannerSolution(
            horizon=horizon,
            positions=positions,
            slacks=slacks,
            log_survival=logp,
            cost=float(lengths.sum()),
            path_lengths=lengths,
            converged=converged,
            diagnostics=diagnostics,
        )

    def solve_at(self, horizon: float, init: Optional[np.ndarray] = None) -> PlannerSolution:
        """
        Solve with the final time held at ``horizon``.

        Raises:
            PlannerInfeasibleError: no iterate met every constraint
        """
        s = self.settings
        p = self.problem
        positions = p.static_init() if init is None else np.array(init, dtype=float)
        positions[:, 0, :] = p.defender_start
        dt = horizon / self.n_t
        velocity, _ = _kinematics(positions, dt)
        slacks = np.hypot(velocity[..., 0], velocity[..., 1])
        z = self._pack(positions, slacks)
        attackers = p.attacker_paths(horizon) if p.n_attackers else np.zeros((0, self.n_t + 1, 2))

        n_pos = self.n_d * self.n_t * 2
        bounds = [(None, None)] * n_pos + [(0.0, None)] * (self.n_d * self.n_t)
        cost_scale = p.v_max * horizon * max(self.n_d, 1)
        mults = [
            np.zeros((self.n_d, self.n_t)),
            np.zeros((self.n_d, self.n_t)),
            np.zeros((self.n_d, self.n_t)),
            np.zeros(p.n_attackers),
        ]
        mu = s.penalty_init

        init_report = check_feasibility(p, positions, horizon, s.tolerance)
        init_cost = float(slacks.sum() * dt)
        best: Optional[Tuple[float, np.ndarray, np.ndarray]] = (
            (init_cost, positions.copy(), slacks.copy()) if init_report.feasible else None
        )
        last_report = init_report
        previous_violation = math.inf
        previous_cost = math.inf
        converged = False
        outer = 0

        for outer in range(1, s.max_outer + 1):
            result = minimize(
                self._lagrangian,
                z,
                args=(horizon, attackers, mults, mu, cost_scale),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": s.inner_maxiter},
            )
            z = result.x
            trial, trial_slacks = self._split(z)
            constraints, _ = self._constraints(trial, trial_slacks, horizon, attackers)
            last_report = check_feasibility(p, trial, horizon, s.tolerance)
            violation = max(float(np.max(g, initial=0.0)) for g in constraints)
            violation = max(violation, 0.0)

            cost = float(sum(path_length(trial[j], dt) for j in range(self.n_d)))
            if last_report.feasible and (best is None or cost < best[0]):
                best = (cost, trial.copy(), trial_slacks.copy())

            mults = [np.maximum(0.0, m + mu * g) for m, g in zip(mults, constraints)]
            if last_report.feasible and abs(cost - previous_cost) <= 1e-6 * (1.0 + cost):
                converged = True
                break
            if violation > 0.25 * previous_violation:
                mu = min(mu * s.penalty_growth, s.penalty_max)
            previous_violation = violation
            previous_cost = cost

        diagnostics = {
            "outer_iterations": outer,
            "penalty": mu,
            "init_cost": init_cost,
            "init_feasible": init_report.feasible,
        }
        if best is None:
            report = last_report.as_dict()
            logger.warning("planner.infeasible", horizon=horizon, **report)
            raise PlannerInfeasibleError(
                f"no feasible trajectory at T_final={horizon:.3f}; "
                f"worst attacker {report['worst_attacker']} exceeds the survival cap by {report['survival_excess']:.3g}",
                report=report,
            )
        _, best_positions, best_slacks = best
        best_speed = np.hypot(*np.moveaxis(_kinematics(best_positions, dt)[0], -1, 0))
        slack_gap = float(np.max(np.abs(best_slacks - best_speed), initial=0.0))
        diagnostics["slack_gap"] = slack_gap
        if converged and slack_gap > s.slack_tolerance * p.v_max:
            logger.warning("planner.slack_gap", horizon=horizon, slack_gap=slack_gap)
            converged = False
        if not converged:
            logger.warning("planner.not_converged", horizon=horizon, outer_iterations=outer)

        solution = self._finish(best_positions, best_slacks, horizon, converged, diagnostics)
        solution.diagnostics["max_violation"] = check_feasibility(p, best_positions, horizon, s.tolerance).max_violation
        return solution


def solve(
    problem: PlannerProblem,
    init: Optional[np.ndarray] = None,
    settings: Optional[PlannerSettings] = None,
) -> PlannerSolution:
    """
    Minimize the total defender path length.

    ``init`` holds (N_d, N_T + 1, 2) waypoints, typically resampled from a
    pursuit run. The final time is searched over [T/2, 2T] around
    ``problem.horizon`` when ``settings.optimize_horizon`` is set; the
    returned solution never costs more than a feasible initialization.
    """
    settings = settings or PlannerSettings()
    planner = TrajectoryPlanner(problem, settings)
    base_horizon = problem.horizon

    solutions: Dict[float, PlannerSolution] = {}
    first_error: Optional[PlannerInfeasibleError] = None

    def attempt(horizon: float) -> float:
        nonlocal first_error
        try:
            solution = planner.solve_at(horizon, init)
        except PlannerInfeasibleError as exc:
            first_error = first_error or exc
            return 1e6 * (1.0 + exc.report.get("max_violation", 1.0))
        solutions[horizon] = solution
        return solution.cost

    attempt(base_horizon)
    if settings.optimize_horizon:
        minimize_scalar(
            attempt,
            bounds=(0.5 * base_horizon, 2.0 * base_horizon),
            method="bounded",
            options={"maxiter": settings.horizon_evaluations, "xatol": 0.01 * base_horizon},
        )

    if not solutions:
        assert first_error is not None
        raise first_error
    best_horizon = min(solutions, key=lambda h: solutions[h].cost)
    best = solutions[best_horizon]
    logger.info(
        "planner.solved",
        horizon=best_horizon,
        cost=best.cost,
        deployed=count_deployed(best, settings.deploy_threshold),
        evaluations=len(solutions),
    )
    return best


def count_deployed(solution: PlannerSolution, threshold: float = 0.01) -> int:
    """
    Defenders whose path is longer than ``threshold`` times the mean path
    length of the defenders that moved at all.
    """
    lengths = np.asarray(solution.path_lengths, dtype=float)
    moving = lengths[lengths > 1e-9]
    if len(moving) == 0:
        return 0
    return int(np.count_nonzero(lengths > threshold * moving.mean()))


def deployment_scaling_variable(n_attackers: float, attacker_speed: float, kill_radius: float) -> float:
    """N_a v_a^1.4 / R, the combined variable deployed counts line up against"""
    return n_attackers * attacker_speed**1.4 / kill_radius


# ---------------------------------------------------------------------------
# Problems built from pursuit runs
# ---------------------------------------------------------------------------

def resample_trace(trace: PursuitTrace, horizon: float, n_intervals: int, rows: Optional[np.ndarray] = None) -> np.ndarray:
    """Defender positions of a pursuit trace at the planner's grid times"""
    times = np.linspace(0.0, horizon, n_intervals + 1)
    frames = trace.defender_positions if rows is None else trace.defender_positions[:, rows, :]
    out = np.empty((frames.shape[1], n_intervals + 1, 2))
    for j in range(frames.shape[1]):
        for c in range(2):
            out[j, :, c] = np.interp(times, trace.times, frames[:, j, c])
    return out


def problem_from_pursuit(
    p: PursuitParams,
    seed: int,
    settings: Optional[PlannerSettings] = None,
    active: Optional[Sequence[bool]] = None,
    attacker_velocities: Optional[np.ndarray] = None,
) -> Tuple[PlannerProblem, np.ndarray, PursuitTrace]:
    """
    Run one pursuit and turn it into a planning problem plus an initial guess.

    Only the ``active`` defenders become decision variables.
    """
    settings = settings or PlannerSettings()
    outcome = run_pursuit(p, seed, attacker_velocities=attacker_velocities, active=active, record_trace=True)
    trace = outcome.trace
    rows = np.flatnonzero(trace.active)
    horizon = max(outcome.kill_time, p.dt * settings.n_intervals)
    problem = PlannerProblem(
        defender_start=trace.defender_positions[0, rows, :],
        attacker_start=np.repeat(trace.attacker_origin[None, :], p.n_attackers, axis=0),
        attacker_velocity=trace.attacker_velocities,
        horizon=horizon,
        n_intervals=settings.n_intervals,
        v_max=p.defender_speed,
        a_max=settings.accel_factor * p.defender_speed / p.tau,
        p_surv_max=settings.p_surv_max,
        weapon=WeaponShape.for_kill_radius(p.kill_radius, settings.weapon_rate),
    )
    init = resample_trace(trace, horizon, settings.n_intervals, rows)
    return problem, init, trace


@dataclass
class DeploymentPlan:
    """Minimum-deployment result for one pursuit instance"""
    solution: PlannerSolution  # covers every defender; parked ones stay at their start
    active: np.ndarray
    deployed: int
    initial_cost: float
    history: List[Dict[str, Any]] = field(default_factory=list)


def _embed(solution: PlannerSolution, active: np.ndarray, starts: np.ndarray) -> PlannerSolution:
    n_points = solution.positions.shape[1]
    positions = np.repeat(starts[:, None, :], n_points, axis=1)
    positions[active] = solution.positions
    slacks = np.zeros((len(starts), n_points - 1))
    slacks[active] = solution.slacks
    lengths = np.zeros(len(starts))
    lengths[active] = solution.path_lengths
    return PlannerSolution(
        horizon=solution.horizon,
        positions=positions,
        slacks=slacks,
        log_survival=solution.log_survival,
        cost=solution.cost,
        path_lengths=lengths,
        converged=solution.converged,
        diagnostics=dict(solution.diagnostics),
    )


def plan_minimum_deployment(
    p: PursuitParams,
    seed: int,
    settings: Optional[PlannerSettings] = None,
    attacker_velocities: Optional[np.ndarray] = None,
) -> DeploymentPlan:
    """
    Solve the full problem, then greedily park the shortest-path defenders.

    Each round parks a batch of the least-used active defenders, re-runs the
    pursuit with the rest to get a fresh initial guess and re-solves. A
    feasible round is kept; an infeasible one halves the batch. Stops when
    a single-defender batch fails.
    """
    settings = settings or PlannerSettings()
    problem, init, trace = problem_from_pursuit(p, seed, settings, attacker_velocities=attacker_velocities)
    starts = trace.defender_positions[0]
    active = np.ones(p.n_defenders, dtype=bool)
    solution = _embed(solve(problem, init, settings), active, starts)
    initial_cost = solution.diagnostics.get("init_cost", solution.cost)
    history = [{"active": int(active.sum()), "cost": solution.cost, "feasible": True}]

    batch = max(1, int(active.sum()) // 2)
    while batch >= 1 and active.sum() > 1:
        order = [j for j in np.argsort(solution.path_lengths, kind="stable") if active[j]]
        batch = min(batch, len(order) - 1)
        if batch < 1:
            break
        candidate = active.copy()
        candidate[order[:batch]] = False
        try:
            sub_problem, sub_init, _ = problem_from_pursuit(
                p, seed, settings, active=candidate, attacker_velocities=trace.attacker_velocities
            )
            sub_solution = solve(sub_problem, sub_init, settings)
        except PlannerInfeasibleError:
            history.append({"active": int(candidate.sum()), "cost": math.nan, "feasible": False})
            batch //= 2
            continue
        active = candidate
        solution = _embed(sub_solution, active, starts)
        history.append({"active": int(active.sum()), "cost": solution.cost, "feasible": True})

    deployed = count_deployed(solution, settings.deploy_threshold)
    logger.info("planner.minimum_deployment", deployed=deployed, active=int(active.sum()), pool=p.n_defenders)
    return DeploymentPlan(
        solution=solution,
        active=active,
        deployed=deployed,
        initial_cost=initial_cost,
        history=history,
    )


# ---------------------------------------------------------------------------
# Deployment scaling
# ---------------------------------------------------------------------------

def off_the_shelf_min_defenders(
    n_attackers: float,
    kill_radius: float,
    unit_length: float,
    velocity_ratio: float,
    tau: float,
    attacker_speed: float,
) -> float:
    """N_d at which N_a / N_d,eff = 1 for auction-plus-intercept defenders"""
    per_defender = (
        (kill_radius / unit_length)
        * math.exp(0.8 * velocity_ratio)
        * math.exp(tau * attacker_speed / (8.0 * unit_length))
    )
    return (n_attackers / per_defender) ** (2.0 / 3.0)


@dataclass
class ScalingStudy:
    n_attackers: List[int]
    optimized: List[int]
    off_the_shelf: List[float]
    optimized_exponent: float
    off_the_shelf_exponent: float
    optimized_stderr: float = 0.0
    off_the_shelf_stderr: float = 0.0


def scaling_exponent_study(
    n_attackers: Sequence[int],
    params: PursuitParams,
    settings: Optional[PlannerSettings] = None,
    seed: int = 0,
) -> ScalingStudy:
    """
    Exponents of N_d^min against N_a for planned and off-the-shelf defenders.

    Each planned instance starts from a pool of N_a defenders.
    """
    if len(n_attackers) < 4:
        raise FitError("exponent study needs at least 4 attacker counts (insufficient points)")
    settings = settings or PlannerSettings()
    optimized, shelf = [], []
    for n_a in n_attackers:
        instance = params.resized(n_attackers=int(n_a), n_defenders=int(n_a))
        plan = plan_minimum_deployment(instance, seed, settings)
        optimized.append(max(plan.deployed, 1))
        shelf.append(
            off_the_shelf_min_defenders(
                n_a,
                params.kill_radius,
                params.unit_length,
                params.velocity_ratio,
                params.tau,
                params.attacker_speed,
            )
        )
        logger.info("planner.study_point", n_attackers=int(n_a), deployed=optimized[-1], off_the_shelf=shelf[-1])

    fit_opt = fit_powerlaw(n_attackers, optimized)
    fit_shelf = fit_powerlaw(n_attackers, shelf)
    return ScalingStudy(
        n_attackers=[int(n) for n in n_attackers],
        optimized=optimized,
        off_the_shelf=shelf,
        optimized_exponent=fit_opt.exponent,
        off_the_shelf_exponent=fit_shelf.exponent,
        optimized_stderr=fit_opt.exponent_stderr,
        off_the_shelf_stderr=fit_shelf.exponent_stderr,
    )


class PlannerInstance(ParamModel):
    """A planning run as the sweep and CLI see it: a pursuit instance plus solver settings"""

    pursuit: PursuitParams = PursuitParams(n_attackers=10, n_defenders=10)
    settings: PlannerSettings = PlannerSettings()
    minimize_deployment: bool = True


def run_planner_instance(instance: PlannerInstance, seed: int) -> DeploymentPlan:
    """Plan one instance; without deployment minimization every defender stays active"""
    if instance.minimize_deployment:
        return plan_minimum_deployment(instance.pursuit, seed, instance.settings)
    problem, init, trace = problem_from_pursuit(instance.pursuit, seed, instance.settings)
    active = np.ones(instance.pursuit.n_defenders, dtype=bool)
    solution = _embed(solve(problem, init, instance.settings), active, trace.defender_positions[0])
    return DeploymentPlan(
        solution=solution,
        active=active,
        deployed=count_deployed(solution, instance.settings.deploy_threshold),
        initial_cost=solution.diagnostics.get("init_cost", solution.cost),
    )


# ---------------------------------------------------------------------------
# Instance files and solution export
# ---------------------------------------------------------------------------

class ProblemDocument(ParamModel):
    """Explicit initial states for the ``plan`` command"""

    defender_start: List[Tuple[float, float]]
    attacker_start: List[Tuple[float, float]]
    attacker_velocity: List[Tuple[float, float]]
    horizon: float = Field(gt=0)
    v_max: float = Field(1.0, gt=0)
    a_max: float = Field(0.4, gt=0)
    weapon: WeaponShape = WeaponShape()
    settings: PlannerSettings = PlannerSettings()

    def problem(self) -> PlannerProblem:
        return PlannerProblem(
            defender_start=np.array(self.defender_start),
            attacker_start=np.array(self.attacker_start),
            attacker_velocity=np.array(self.attacker_velocity),
            horizon=self.horizon,
            n_intervals=self.settings.n_intervals,
            v_max=self.v_max,
            a_max=self.a_max,
            p_surv_max=self.settings.p_surv_max,
            weapon=self.weapon,
        )


def trajectory_frame(solution: PlannerSolution) -> pd.DataFrame:
    """Long-form waypoints: one row per (defender, grid point)"""
    n_d, n_points, _ = solution.positions.shape
    times = np.linspace(0.0, solution.horizon, n_points)
    return pd.DataFrame({
        "defender": np.repeat(np.arange(n_d), n_points),
        "step": np.tile(np.arange(n_points), n_d),
        "time": np.tile(times, n_d),
        "x": solution.positions[:, :, 0].ravel(),
        "y": solution.positions[:, :, 1].ravel(),
    })


def solution_summary(solution: PlannerSolution, deploy_threshold: float = 0.01) -> Dict[str, Any]:
    """JSON-ready certificate of a solution"""
    return {
        "horizon": float(solution.horizon),
        "cost": float(solution.cost),
        "converged": bool(solution.converged),
        "deployed": count_deployed(solution, deploy_threshold),
        "path_lengths": [float(v) for v in solution.path_lengths],
        "survival": [float(v) for v in np.exp(solution.log_survival)],
        "diagnostics": {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v) for k, v in solution.diagnostics.items()},
    }
