#!/usr/bin/env python3
"""
Swarm Scaling - Trajectory Planner Tests

Certificates (survival, path length, feasibility), a small solved
instance, deployment counting and the instance/export helpers.
"""

import math
import os
import sys
import unittest
from unittest import mock

import numpy as np
from scipy.special import ndtr

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from core.errors import PlannerInfeasibleError
from core.analysis.scaling import predict_nd_eff
from core.swarm.attrition import RngStream, draw_kills, survival_product
from core.swarm.planner import (
    PlannerProblem,
    PlannerSettings,
    PlannerSolution,
    ProblemDocument,
    WeaponShape,
    check_feasibility,
    count_deployed,
    deployment_scaling_variable,
    off_the_shelf_min_defenders,
    path_length,
    plan_minimum_deployment,
    problem_from_pursuit,
    scaling_exponent_study,
    solution_summary,
    solve,
    survival_log,
    trajectory_frame,
)
from core.swarm.pursuit import PursuitParams


def _parked_attacker_problem(p_surv_max: float = 0.05) -> PlannerProblem:
    """One defender at the origin, one attacker parked at (3, 0)"""
    return PlannerProblem(
        defender_start=[[0.0, 0.0]],
        attacker_start=[[3.0, 0.0]],
        attacker_velocity=[[0.0, 0.0]],
        horizon=10.0,
        n_intervals=20,
        v_max=1.0,
        a_max=1.0,
        p_surv_max=p_surv_max,
        weapon=WeaponShape.for_kill_radius(1.0),
    )


def _approach_init() -> np.ndarray:
    """Accelerate, cruise and stop 1.6 along x, within both bounds"""
    speeds = np.array([0.4, 0.8, 0.8, 0.8, 0.4] + [0.0] * 15)
    x = np.concatenate(([0.0], np.cumsum(speeds * 0.5)))
    return np.stack((x, np.zeros_like(x)), axis=-1)[None, :, :]


class TestCertificates(unittest.TestCase):
    """Survival, path length and constraint checks"""

    def test_weapon_half_rate_at_kill_radius(self):
        weapon = WeaponShape.for_kill_radius(1.2, rate=10.0)
        self.assertAlmostEqual(float(weapon.kill_rate(1.44)), 5.0)
        self.assertAlmostEqual(float(weapon.kill_rate(0.0)), 10.0 * float(ndtr(1.0)))

    def test_survival_left_riemann_sum(self):
        """Co-located pair over three grid points counts the first two"""
        weapon = WeaponShape.for_kill_radius(1.0)
        defender = np.zeros((1, 3, 2))
        attacker = np.zeros((3, 2))
        expected = -0.5 * 2 * 10.0 * float(ndtr(1.0))
        self.assertAlmostEqual(survival_log(defender, attacker, weapon, 0.5), expected)

    def test_survival_far_apart(self):
        weapon = WeaponShape.for_kill_radius(1.0)
        defender = np.zeros((1, 5, 2))
        attacker = np.full((5, 2), 50.0)
        self.assertGreater(survival_log(defender, attacker, weapon, 0.1), -1e-12)

    def test_path_length(self):
        traj = np.array([[0.0, 0.0], [1.5, 2.0], [3.0, 4.0]])
        self.assertAlmostEqual(path_length(traj, 0.7), 5.0)
        with self.assertRaises(ValueError):
            path_length(traj[:1], 0.7)

    def test_static_defender_is_infeasible(self):
        """Staying put never brings the attacker's survival under the cap"""
        problem = _parked_attacker_problem()
        report = check_feasibility(problem, problem.static_init(), problem.horizon)
        self.assertFalse(report.feasible)
        self.assertEqual(report.speed_excess, 0.0)
        self.assertEqual(report.worst_attacker, 0)
        self.assertAlmostEqual(report.survival_excess, -math.log(0.05), delta=1e-6)

    def test_approach_is_feasible(self):
        problem = _parked_attacker_problem()
        report = check_feasibility(problem, _approach_init(), problem.horizon)
        self.assertTrue(report.feasible, report.as_dict())

    def test_problem_validation(self):
        with self.assertRaises(ValueError):
            PlannerProblem([[0.0, 0.0]], [[1.0, 0.0]], [[0.0, 0.0], [1.0, 1.0]], horizon=5.0)
        with self.assertRaises(ValueError):
            PlannerProblem([[0.0, 0.0]], [[1.0, 0.0]], [[0.0, 0.0]], horizon=0.0)

    def test_survival_matches_sampled_attrition(self):
        """exp(log p_surv) agrees with per-step kill draws along a fly-by"""
        weapon = WeaponShape.for_kill_radius(1.0, rate=0.5)
        steps, dt, trials = 600, 0.01, 10000
        attacker = np.stack((np.linspace(-3.0, 3.0, steps + 1), np.zeros(steps + 1)), axis=-1)
        defender = np.zeros((1, steps + 1, 2))
        rates = weapon.kill_rate(np.sum(attacker**2, axis=-1))
        rng = RngStream(seed=11)
        alive = np.ones(trials, dtype=bool)
        for k in range(steps):
            factor, clamped = survival_product([rates[k]], dt)
            self.assertFalse(clamped)
            alive &= ~draw_kills(np.full(trials, factor), rng)
        expected = math.exp(survival_log(defender, attacker, weapon, dt))
        self.assertAlmostEqual(float(alive.mean()), expected, delta=0.02)


class TestSolve(unittest.TestCase):
    """Augmented-Lagrangian solve of a small engagement"""

    def setUp(self):
        self.problem = _parked_attacker_problem()
        self.init = _approach_init()
        self.settings = PlannerSettings(n_intervals=20, optimize_horizon=False)

    def test_solution_is_certified(self):
        """The returned trajectory passes an independent constraint check"""
        solution = solve(self.problem, self.init, self.settings)
        report = check_feasibility(self.problem, solution.positions, solution.horizon, self.settings.tolerance)
        self.assertTrue(report.feasible, report.as_dict())
        self.assertLessEqual(float(np.exp(solution.log_survival[0])), 0.05 * math.exp(self.settings.tolerance))
        np.testing.assert_allclose(solution.positions[:, 0, :], self.problem.defender_start)

    def test_never_worse_than_initialization(self):
        solution = solve(self.problem, self.init, self.settings)
        init_cost = path_length(self.init[0], self.problem.horizon / 20)
        self.assertLessEqual(solution.cost, init_cost + 1e-9)
        self.assertAlmostEqual(solution.cost, float(solution.path_lengths.sum()))
        self.assertGreater(solution.cost, 0.5)

    def test_unreachable_attacker(self):
        """An attacker out of reach for the whole horizon yields an infeasibility report"""
        problem = PlannerProblem(
            defender_start=[[0.0, 0.0]],
            attacker_start=[[500.0, 0.0]],
            attacker_velocity=[[0.0, 0.0]],
            horizon=4.0,
            n_intervals=8,
            weapon=WeaponShape.for_kill_radius(1.0),
        )
        settings = PlannerSettings(n_intervals=8, optimize_horizon=False, max_outer=4)
        with self.assertRaises(PlannerInfeasibleError) as ctx:
            solve(problem, settings=settings)
        self.assertEqual(ctx.exception.report["worst_attacker"], 0)

    def test_tighter_cap_costs_more(self):
        """Lowering p_surv_max never makes the certified path shorter"""
        costs = []
        for cap in (0.2, 0.05, 0.01):
            problem = _parked_attacker_problem(p_surv_max=cap)
            settings = PlannerSettings(n_intervals=20, optimize_horizon=False, p_surv_max=cap)
            solution = solve(problem, self.init, settings)
            report = check_feasibility(problem, solution.positions, solution.horizon, settings.tolerance)
            self.assertTrue(report.feasible, report.as_dict())
            self.assertLessEqual(float(solution.log_survival[0]), math.log(cap) + settings.tolerance)
            costs.append(solution.cost)
        self.assertLessEqual(costs[0], costs[1] + 0.02)
        self.assertLessEqual(costs[1], costs[2] + 0.02)

    def test_slack_gap_reported_for_returned_path(self):
        """slack_gap measures the returned slacks against the returned speeds"""
        solution = solve(self.problem, self.init, self.settings)
        dt = solution.horizon / 20
        velocity = np.diff(solution.positions, axis=1) / dt
        speed = np.hypot(velocity[..., 0], velocity[..., 1])
        self.assertEqual(solution.slacks.shape, speed.shape)
        gap = float(np.max(np.abs(solution.slacks - speed)))
        self.assertAlmostEqual(solution.diagnostics["slack_gap"], gap, delta=1e-9)
        if solution.converged:
            self.assertLessEqual(gap, self.settings.slack_tolerance * self.problem.v_max)

    def test_loose_slacks_are_not_converged(self):
        """A slack tolerance no solve can meet leaves the solution unconverged"""
        settings = PlannerSettings(n_intervals=20, optimize_horizon=False, slack_tolerance=1e-300)
        solution = solve(self.problem, self.init, settings)
        if solution.diagnostics["slack_gap"] > 1e-300:
            self.assertFalse(solution.converged)


class TestDeployment(unittest.TestCase):
    """Deployment counting and scaling helpers"""

    def test_count_deployed(self):
        solution = PlannerSolution(
            horizon=1.0,
            positions=np.zeros((4, 3, 2)),
            slacks=np.zeros((4, 2)),
            log_survival=np.zeros(1),
            cost=10.01,
            path_lengths=np.array([0.0, 5.0, 5.0, 0.01]),
        )
        self.assertEqual(count_deployed(solution, 0.01), 2)
        self.assertEqual(count_deployed(solution, 0.001), 3)

    def test_nobody_moves(self):
        solution = PlannerSolution(1.0, np.zeros((2, 3, 2)), np.zeros((2, 2)), np.zeros(0), 0.0, np.zeros(2))
        self.assertEqual(count_deployed(solution), 0)

    def test_off_the_shelf_balances_effective_size(self):
        """N_d^min makes N_a / N_d,eff equal one"""
        n_d = off_the_shelf_min_defenders(100, 1.2, 1.0, 2.5, 5.0, 0.4)
        self.assertAlmostEqual(predict_nd_eff(n_d, 1.2, 1.0, 2.5, 5.0, 0.4), 100.0, delta=1e-9)
        ratio = off_the_shelf_min_defenders(200, 1.2, 1.0, 2.5, 5.0, 0.4) / n_d
        self.assertAlmostEqual(ratio, 2 ** (2.0 / 3.0))

    def test_scaling_variable(self):
        self.assertAlmostEqual(deployment_scaling_variable(10, 1.0, 2.0), 5.0)

    def test_exponent_study_resizes_instances(self):
        """Every study point plans N_a defenders spread as a fresh instance would be"""
        seen = []

        def fake_plan(instance, seed, settings):
            seen.append(instance)
            return mock.Mock(deployed=max(instance.n_attackers // 2, 1))

        base = PursuitParams(n_attackers=4, n_defenders=4)
        with mock.patch("core.swarm.planner.plan_minimum_deployment", side_effect=fake_plan):
            study = scaling_exponent_study([4, 8, 16, 32], base, PlannerSettings(n_intervals=10))
        self.assertEqual([p.n_defenders for p in seen], [4, 8, 16, 32])
        for instance in seen:
            fresh = PursuitParams(n_attackers=instance.n_attackers, n_defenders=instance.n_defenders)
            self.assertAlmostEqual(instance.defender_spread, fresh.defender_spread)
        self.assertAlmostEqual(study.optimized_exponent, 1.0, delta=1e-9)

    def test_minimum_deployment_parks_least_used(self):
        """Batches halve after an infeasible round; parked defenders stay at their start"""

        def fake_solve(problem, init=None, settings=None):
            n = problem.n_defenders
            if n < 2:
                raise PlannerInfeasibleError("one defender is not enough", report={"worst_attacker": 0})
            return PlannerSolution(
                horizon=problem.horizon,
                positions=np.array(init, dtype=float),
                slacks=np.zeros((n, problem.n_intervals)),
                log_survival=np.zeros(problem.n_attackers),
                cost=float(n * (n + 1) / 2),
                path_lengths=np.arange(1.0, n + 1.0),
            )

        p = PursuitParams(n_attackers=2, n_defenders=4)
        with mock.patch("core.swarm.planner.solve", side_effect=fake_solve):
            plan = plan_minimum_deployment(p, seed=8, settings=PlannerSettings(n_intervals=10))
        self.assertEqual(plan.active.tolist(), [False, False, True, True])
        self.assertEqual(plan.deployed, 2)
        self.assertEqual([h["active"] for h in plan.history], [4, 2, 1])
        self.assertEqual([h["feasible"] for h in plan.history], [True, True, False])
        self.assertEqual(plan.solution.positions.shape, (4, 11, 2))
        np.testing.assert_allclose(plan.solution.positions[0], plan.solution.positions[0, :1].repeat(11, axis=0))


class TestInstances(unittest.TestCase):
    """Problem construction and export"""

    def test_problem_from_pursuit(self):
        p = PursuitParams(n_attackers=2, n_defenders=3)
        settings = PlannerSettings(n_intervals=10)
        problem, init, trace = problem_from_pursuit(p, seed=3, settings=settings)
        self.assertEqual(problem.n_defenders, 3)
        self.assertEqual(problem.n_attackers, 2)
        self.assertEqual(init.shape, (3, 11, 2))
        np.testing.assert_allclose(init[:, 0, :], problem.defender_start)
        self.assertAlmostEqual(problem.a_max, 2.0 * p.defender_speed / p.tau)
        self.assertAlmostEqual(float(problem.weapon.kill_rate(p.kill_radius**2)), 5.0)

    def test_problem_document(self):
        document = ProblemDocument.model_validate({
            "defender_start": [[0, 0], [1, 0]],
            "attacker_start": [[10, 0]],
            "attacker_velocity": [[-0.4, 0]],
            "horizon": 20,
            "settings": {"n_intervals": 16},
        })
        problem = document.problem()
        self.assertEqual(problem.defender_start.shape, (2, 2))
        self.assertEqual(problem.n_intervals, 16)
        np.testing.assert_allclose(problem.attacker_paths(20.0)[0, -1], [2.0, 0.0])

    def test_export(self):
        positions = np.zeros((2, 4, 2))
        positions[1, :, 0] = [0.0, 1.0, 2.0, 3.0]
        solution = PlannerSolution(
            horizon=3.0,
            positions=positions,
            slacks=np.zeros((2, 3)),
            log_survival=np.array([math.log(0.04)]),
            cost=3.0,
            path_lengths=np.array([0.0, 3.0]),
            diagnostics={"penalty": np.float64(10.0)},
        )
        frame = trajectory_frame(solution)
        self.assertEqual(len(frame), 8)
        self.assertEqual(list(frame.columns), ["defender", "step", "time", "x", "y"])
        self.assertEqual(frame[frame["defender"] == 1]["x"].tolist(), [0.0, 1.0, 2.0, 3.0])
        summary = solution_summary(solution)
        self.assertEqual(summary["deployed"], 1)
        self.assertAlmostEqual(summary["survival"][0], 0.04)
        self.assertIsInstance(summary["diagnostics"]["penalty"], float)


if __name__ == "__main__":
    unittest.main(verbosity=2)
