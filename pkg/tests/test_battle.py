#!/usr/bin/env python3
"""
Swarm Scaling - Battle Scenario Tests
"""

import unittest
import sys
import os

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from core.swarm.attrition import RngStream
from core.swarm.battle import (
    BattleEngine,
    BattleParams,
    battle_forces,
    ensemble_pa,
    init_battle,
    run_battle,
)
from core.swarm.dynamics import AgentState, Side, SwarmState


class TestBattleSetup(unittest.TestCase):
    """Parameter defaults and initial layout"""

    def test_resolved_defaults(self):
        """t_max = 10 L / V and scatter radii 0.5 sqrt(N) d0"""
        p = BattleParams(n_attackers=16, n_defenders=4, start_distance=20.0)
        self.assertAlmostEqual(p.t_max, 200.0)
        self.assertAlmostEqual(p.attacker_scatter, 0.5 * 4.0 * 2.0)
        self.assertAlmostEqual(p.defender_scatter, 0.5 * 2.0 * 2.0)

    def test_single_attacker_no_defenders(self):
        """One attacker near (L, 0) and an empty defender set"""
        p = BattleParams(n_attackers=1, n_defenders=0)
        state = init_battle(p, RngStream(1))
        self.assertEqual(len(state.attackers), 1)
        self.assertEqual(len(state.defenders), 0)
        self.assertLessEqual(np.hypot(*(state.pos[0] - [p.start_distance, 0.0])), p.attacker_scatter)

    def test_layout_reproducible(self):
        """Same seed, same layout"""
        p = BattleParams(n_attackers=40, n_defenders=40)
        a = init_battle(p, RngStream(17))
        b = init_battle(p, RngStream(17))
        np.testing.assert_array_equal(a.pos, b.pos)
        self.assertTrue(np.all(a.side[:40]) and not np.any(a.side[40:]))

    def test_centroid_near_start_point(self):
        """Mean attacker position over many layouts approaches (L, 0)"""
        p = BattleParams(n_attackers=20, n_defenders=0)
        centroids = np.array([init_battle(p, RngStream(k)).pos.mean(axis=0) for k in range(200)])
        mean = centroids.mean(axis=0)
        sigma = centroids.std(axis=0) / np.sqrt(len(centroids))
        self.assertTrue(np.all(np.abs(mean - [p.start_distance, 0.0]) < 3 * sigma + 1e-9))


class TestBattleForces(unittest.TestCase):
    """Force composition for the two sides"""

    def setUp(self):
        self.params = BattleParams(n_attackers=2, n_defenders=1)

    def test_attackers_at_equilibrium_spacing(self):
        """Two attackers d0 apart feel only thrust toward the HVU"""
        state = SwarmState.from_agents([
            AgentState(0, Side.ATTACKER, (20.0, 0.0), (0.0, 0.0)),
            AgentState(1, Side.ATTACKER, (20.0, 2.0), (0.0, 0.0)),
        ])
        forces = battle_forces(state, self.params)
        np.testing.assert_allclose(forces[0], [-1.0, 0.0], atol=1e-12)
        expected = -np.array([20.0, 2.0]) / np.hypot(20.0, 2.0)
        np.testing.assert_allclose(forces[1], expected, atol=1e-12)

    def test_defenders_do_not_avoid_attackers(self):
        """Attacker is pushed off the defender; the defender only feels thrust"""
        state = SwarmState.from_agents([
            AgentState(0, Side.ATTACKER, (3.0, 0.0), (0.0, 0.0)),
            AgentState(1, Side.DEFENDER, (0.0, 0.0), (0.0, 0.0)),
        ])
        forces = battle_forces(state, self.params)
        # thrust -1 toward the HVU plus avoidance +1/9 along +x
        np.testing.assert_allclose(forces[0], [-1.0 + 1.0 / 9.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(forces[1], [1.0, 0.0], atol=1e-12)

    def test_defender_heads_for_attacker_centroid(self):
        """A defender at rest is pulled toward the attacker centroid with magnitude K"""
        state = SwarmState.from_agents([
            AgentState(0, Side.ATTACKER, (10.0, 5.0), (0.0, 0.0)),
            AgentState(1, Side.ATTACKER, (10.0, -5.0), (0.0, 0.0)),
            AgentState(2, Side.DEFENDER, (0.0, 0.0), (0.0, 0.0)),
        ])
        forces = battle_forces(state, self.params)
        np.testing.assert_allclose(forces[2], [1.0, 0.0], atol=1e-12)

    def test_swapping_labels_is_not_symmetric(self):
        """Exchanging the roles of two agents does not exchange their forces"""
        original = battle_forces(SwarmState.from_agents([
            AgentState(0, Side.ATTACKER, (10.0, 0.0), (0.0, 0.0)),
            AgentState(1, Side.DEFENDER, (6.0, 0.0), (0.0, 0.0)),
        ]), self.params)
        swapped = battle_forces(SwarmState.from_agents([
            AgentState(0, Side.DEFENDER, (10.0, 0.0), (0.0, 0.0)),
            AgentState(1, Side.ATTACKER, (6.0, 0.0), (0.0, 0.0)),
        ]), self.params)
        # avoidance at r = 4 with dr = 6 is 1/32, felt by the attacker only
        np.testing.assert_allclose(original[0], [-1.0 + 1.0 / 32.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(original[1], [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(swapped[0], [-1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(swapped[1], [-1.0 - 1.0 / 32.0, 0.0], atol=1e-12)
        self.assertFalse(np.allclose(original[::-1], -swapped))
        self.assertFalse(np.allclose(original, swapped))


class TestRunBattle(unittest.TestCase):
    """Termination conditions and ensemble behaviour"""

    def test_unopposed_attackers_win(self):
        """N_d = 0 gives P_a = 1 and the HVU is reached"""
        p = BattleParams(n_attackers=4, n_defenders=0, start_distance=10.0)
        outcome = run_battle(p, seed=3)
        self.assertEqual(outcome.attacker_survival, 1.0)
        self.assertTrue(outcome.hvu_destroyed)
        self.assertFalse(outcome.stalemate)

    def test_no_weapons_no_kills(self):
        """lambda_a = lambda_d = 0 leaves every attacker alive"""
        p = BattleParams(
            n_attackers=4,
            n_defenders=4,
            start_distance=12.0,
            attacker_weapon={"rate": 0.0, "range": 6.0},
            defender_weapon={"rate": 0.0, "range": 4.0},
        )
        outcome = run_battle(p, seed=5)
        self.assertEqual(outcome.attacker_survival, 1.0)
        self.assertEqual(outcome.defenders_alive, 4)

    def test_overwhelming_defense(self):
        """Many strong defenders destroy a small weak swarm"""
        p = BattleParams(
            n_attackers=3,
            n_defenders=30,
            start_distance=15.0,
            attacker_weapon={"rate": 0.05, "range": 1.0},
            defender_weapon={"rate": 10.0, "range": 6.0},
            ensemble=3,
        )
        self.assertEqual(ensemble_pa(p), 0.0)

    def test_timeout_without_defenders(self):
        """With no defenders left, reaching t_max is a timeout, not a stalemate"""
        p = BattleParams(
            n_attackers=2,
            n_defenders=0,
            dynamics={"thrust": 0.0, "dt": 0.05},
            t_max=1.0,
        )
        outcome = run_battle(p, seed=1)
        self.assertFalse(outcome.stalemate)
        self.assertTrue(outcome.timed_out)
        self.assertIn("timeout", outcome.flags)
        self.assertNotIn("stalemate", outcome.flags)
        self.assertAlmostEqual(outcome.t_end, 1.0, places=9)
        self.assertEqual(outcome.attacker_survival, 1.0)

    def test_stalemate_flagged(self):
        """Both sides alive and nobody closing in: t_max ends the run as a stalemate"""
        p = BattleParams(
            n_attackers=1,
            n_defenders=1,
            attacker_weapon={"rate": 0.0, "range": 6.0},
            defender_weapon={"rate": 0.0, "range": 4.0},
            dynamics={"thrust": 0.0, "dt": 0.05},
            t_max=1.0,
        )
        outcome = run_battle(p, seed=1)
        self.assertTrue(outcome.stalemate)
        self.assertIn("stalemate", outcome.flags)
        self.assertNotIn("timeout", outcome.flags)
        self.assertEqual(outcome.defenders_alive, 1)

    def test_slow_approach_is_timeout(self):
        """Attackers still closing on the HVU at t_max are not a stalemate"""
        p = BattleParams(
            n_attackers=1,
            n_defenders=1,
            attacker_weapon={"rate": 0.0, "range": 6.0},
            defender_weapon={"rate": 0.0, "range": 4.0},
            dynamics={"thrust": 0.1, "dt": 0.05},
            t_max=2.0,
        )
        outcome = run_battle(p, seed=1)
        self.assertFalse(outcome.stalemate)
        self.assertIn("timeout", outcome.flags)
        self.assertFalse(outcome.hvu_destroyed)

    def test_scale_covariance(self):
        """Lengths x4 with times x8 leave the ensemble P_a unchanged"""
        base = BattleParams(n_attackers=6, n_defenders=6, start_distance=12.0, ensemble=4, base_seed=21)
        scaled = BattleParams(
            n_attackers=6,
            n_defenders=6,
            start_distance=48.0,
            hvu_radius=4.0,
            attacker_weapon={"rate": 1.0 / 8.0, "range": 24.0},
            defender_weapon={"rate": 1.0 / 8.0, "range": 16.0},
            force_law={"d0": 8.0, "d1": 12.0, "dr": 24.0},
            dynamics={"mass": 1.0, "thrust": 1.0 / 16.0, "damping": 1.0 / 8.0, "dt": 0.08},
            ensemble=4,
            base_seed=21,
        )
        self.assertAlmostEqual(scaled.t_max, 8.0 * base.t_max)
        self.assertAlmostEqual(ensemble_pa(scaled), ensemble_pa(base), delta=0.15)

    def test_ensemble_reproducible(self):
        """Mean P_a over derived seeds is bit-identical across calls"""
        p = BattleParams(n_attackers=5, n_defenders=5, start_distance=12.0, ensemble=2, base_seed=9)
        self.assertEqual(ensemble_pa(p), ensemble_pa(p))

    def test_survival_in_unit_interval(self):
        """P_a stays within [0, 1] and the engine records its end time"""
        p = BattleParams(n_attackers=6, n_defenders=6, start_distance=12.0)
        engine = BattleEngine(p, seed=2)
        outcome = engine.run()
        self.assertGreaterEqual(outcome.attacker_survival, 0.0)
        self.assertLessEqual(outcome.attacker_survival, 1.0)
        self.assertGreater(outcome.t_end, 0.0)


if __name__ == "__main__":
    unittest.main(verbosity=2)
