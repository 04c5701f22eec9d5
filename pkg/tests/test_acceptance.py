#!/usr/bin/env python3
"""
Swarm Scaling - Acceptance Suite

Scaled-down reproduction sweeps. They take minutes to hours, so they only
run with SWARM_SLOW_TESTS=1; SWARM_WORKERS sets the process count.
"""

import math
import os
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from core.analysis.curves import collapse_curves, curves_from_records, merge_curves, pursuit_nd_eff
from core.analysis.scaling import (
    PerformanceCurve,
    collapse_score,
    fit_breakpoint,
    fit_na_eff_exponent,
    fit_powerlaw,
    fit_tanh_threshold,
)
from core.settings import build_params, load_yaml
from core.swarm.planner import (
    PlannerInstance,
    check_feasibility,
    path_length,
    problem_from_pursuit,
    run_planner_instance,
    scaling_exponent_study,
    solve,
)
from core.swarm.pursuit import PursuitParams
from core.swarm.search import SearchParams, ensemble_coverage
from core.sweep.records import load_frame
from core.sweep.runner import run_sweep
from core.sweep.spec import SweepSpec, load_sweep_spec

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SLOW = os.environ.get("SWARM_SLOW_TESTS") == "1"
WORKERS = int(os.environ.get("SWARM_WORKERS", os.cpu_count() or 1))


@unittest.skipUnless(SLOW, "set SWARM_SLOW_TESTS=1 to run the acceptance sweeps")
class TestAcceptance(unittest.TestCase):
    """Reproduction sweeps at desk scale"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _sweep(self, config: str) -> pd.DataFrame:
        spec = load_sweep_spec(CONFIGS / config, overrides={"output": str(self.dir / Path(config).stem) + ".csv"})
        run_sweep(spec, workers=WORKERS)
        return load_frame(spec.output)

    def _assert_knee_near_prediction(self, curve: PerformanceCurve) -> None:
        per_attacker = PerformanceCurve(curve.x, curve.y / curve.x, dict(curve.fixed))
        fit = fit_breakpoint(per_attacker)
        predicted = pursuit_nd_eff(curve.fixed)
        self.assertGreaterEqual(fit.n_eff / predicted, 0.5, (curve.fixed, fit.n_eff, predicted))
        self.assertLessEqual(fit.n_eff / predicted, 2.0, (curve.fixed, fit.n_eff, predicted))

    def test_battle_threshold_shape(self):
        """P_a falls from above 0.8 to below 0.2 and the tanh fit explains each curve"""
        frame = self._sweep("battle_threshold.yaml")
        curves = curves_from_records(frame, "n_defenders")
        self.assertEqual(len(curves), 2)
        for curve in curves:
            self.assertGreater(curve.y[0], 0.8)
            self.assertLess(curve.y[-1], 0.2)
            self.assertGreater(fit_tanh_threshold(curve).r_squared, 0.9)
        rho, p_value = stats.spearmanr(frame["param.n_defenders"], frame["metric_value"])
        self.assertLess(rho, 0)
        self.assertLess(p_value, 0.01)

    def test_rate_ratio_exponent(self):
        """alpha within [0.4, 0.8] and N_a,eff increasing in lambda_a / lambda_d"""
        frame = self._sweep("battle_rate_ratio.yaml")
        fits = [fit_tanh_threshold(c) for c in curves_from_records(frame, "n_defenders")]
        alpha = fit_na_eff_exponent(fits).exponent
        self.assertGreaterEqual(alpha, 0.4)
        self.assertLessEqual(alpha, 0.8)
        for range_d in (4.0, 6.0):
            family = sorted(
                (f for f in fits if float(f.fixed["defender_weapon.range"]) == range_d),
                key=lambda f: float(f.fixed["attacker_weapon.rate"]),
            )
            sizes = [f.n_eff for f in family]
            self.assertTrue(all(a < b for a, b in zip(sizes, sizes[1:])), sizes)

    def test_search_collapse_and_dominance(self):
        """Curves collapse within each comms class and sharing dominates pointwise"""
        frame = self._sweep("search_collapse.yaml")
        curves = curves_from_records(frame, "n_auv")
        for comms in (True, False):
            family = [c for c in curves if str(c.fixed["comms"]).lower() == str(comms).lower()]
            collapsed = collapse_curves(family, "search")
            self.assertLess(collapse_score(collapsed, scale="linear", statistic="max"), 0.05)

        keys = [c for c in frame.columns if c.startswith("param.") and c != "param.comms"]
        means = frame.groupby(keys + ["param.comms"])["metric_value"].mean().unstack("param.comms")
        with_comms = means[[c for c in means.columns if str(c).lower() == "true"][0]]
        without = means[[c for c in means.columns if str(c).lower() == "false"][0]]
        self.assertTrue(bool((with_comms >= without).all()))

    def test_comm_range_insensitivity(self):
        """Paired ensembles at R_c = 1 and 4 differ by less than 0.01"""
        for sensor_range in (5.0, 10.0, 20.0):
            for per_length in (4e-5, 1e-4):
                for n_auv in (4, 12, 20):
                    base = dict(
                        n_auv=n_auv,
                        sensor_range=sensor_range,
                        attrition_per_length=per_length,
                        ensemble=1000,
                        base_seed=17,
                    )
                    near = ensemble_coverage(SearchParams(comm_range=1.0, **base))
                    far = ensemble_coverage(SearchParams(comm_range=4.0, **base))
                    self.assertLess(abs(near - far), 0.01)

    def test_pursuit_collapse(self):
        """Falling branch near slope -0.75 once N_a is divided by N_d,eff"""
        frame = self._sweep("pursuit_collapse.yaml")
        collapsed = collapse_curves(curves_from_records(frame, "n_attackers"), "pursuit")
        master = merge_curves(collapsed)
        falling = master.x < 1.0
        slope = fit_powerlaw(master.x[falling], master.y[falling]).exponent
        self.assertAlmostEqual(slope, -0.75, delta=0.2)
        plateau = ~falling
        if plateau.sum() >= 3:
            self.assertAlmostEqual(fit_powerlaw(master.x[plateau], master.y[plateau]).exponent, 0.0, delta=0.1)
        for curve in curves_from_records(frame, "n_attackers"):
            # a knee needs a point on either side of it
            if len(curve) >= 6 and curve.x[1] < pursuit_nd_eff(curve.fixed) < curve.x[-2]:
                self._assert_knee_near_prediction(curve)

    def test_pursuit_breakpoint(self):
        """Knee of t_k / N_a within a factor 2 of the predicted N_d,eff"""
        frame = self._sweep("pursuit_breakpoint.yaml")
        curves = curves_from_records(frame, "n_attackers")
        self.assertEqual(len(curves), 4)
        for curve in curves:
            self._assert_knee_near_prediction(curve)

    def test_planner_reference_instance(self):
        """Certified solution, no worse than the pursuit initialization, fewer than 10 deployed"""
        document = load_yaml(CONFIGS / "planner_reference.yaml")
        seed = int(document.pop("seed"))
        instance = build_params(PlannerInstance, document)

        problem, init, _ = problem_from_pursuit(instance.pursuit, seed, instance.settings)
        solution = solve(problem, init, instance.settings)
        report = check_feasibility(problem, solution.positions, solution.horizon, 1e-4)
        self.assertTrue(report.feasible, report.as_dict())
        init_cost = sum(path_length(traj, 1.0) for traj in init)
        if check_feasibility(problem, init, problem.horizon, 1e-4).feasible:
            self.assertLessEqual(solution.cost, init_cost + 1e-9)

        plan = run_planner_instance(instance, seed)
        final = check_feasibility(problem, plan.solution.positions, plan.solution.horizon, 1e-4)
        self.assertTrue(final.feasible, final.as_dict())
        self.assertLess(plan.deployed, 10)

    def test_exponent_regime_separation(self):
        """Planned defenders scale with a smaller exponent than off-the-shelf ones"""
        study = scaling_exponent_study([4, 8, 16, 32], PursuitParams(), seed=5)
        self.assertLess(study.optimized_exponent, study.off_the_shelf_exponent)
        self.assertGreaterEqual(study.off_the_shelf_exponent, 0.5)
        self.assertLessEqual(study.off_the_shelf_exponent, 0.85)
        self.assertGreaterEqual(study.optimized_exponent, 0.15)
        self.assertLessEqual(study.optimized_exponent, 0.55)

    def test_parallel_soundness(self):
        """1 vs 8 workers: identical sorted record sets"""
        document = {
            "scenario": "battle",
            "grid": {"n_defenders": [10, 20, 40]},
            "base": {"n_attackers": 10, "start_distance": 15.0},
            "ensemble": 4,
            "base_seed": 99,
        }
        frames = []
        for workers in (1, 8):
            spec = SweepSpec.model_validate({**document, "output": str(self.dir / f"w{workers}.csv")})
            run_sweep(spec, workers=workers)
            frames.append(load_frame(spec.output).drop(columns="wall_time"))
        pd.testing.assert_frame_equal(frames[0], frames[1])
        self.assertFalse(np.isnan(frames[0]["metric_value"]).any())
        self.assertTrue(math.isfinite(float(frames[0]["metric_value"].sum())))


if __name__ == "__main__":
    unittest.main(verbosity=2)
