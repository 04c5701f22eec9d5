#!/usr/bin/env python3
"""
Swarm Scaling - Dynamics Tests

Force laws, thrust and the velocity-Verlet integrator.
"""

import unittest
import sys
import os

import numpy as np

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from core.errors import SimulationDivergedError
from core.settings import DynamicsParams, ForceLawParams
from core.swarm.dynamics import (
    FORCE_CAP,
    AgentState,
    Side,
    SwarmState,
    avoidance_force,
    leonard_pair_force,
    pairwise_sum,
    thrust_force,
    verlet_step,
)


def _single(pos, vel):
    return SwarmState.from_agents([AgentState(0, Side.ATTACKER, pos, vel)])


class TestForceLaws(unittest.TestCase):
    """Thrust, Leonard cohesion and enemy avoidance"""

    def setUp(self):
        self.law = ForceLawParams(d0=2.0, d1=3.0, dr=6.0)

    def test_thrust_points_toward_leader(self):
        """Thrust is K times the unit vector toward the virtual leader"""
        np.testing.assert_allclose(thrust_force((0, 0), (5, 0), 1.0), [1.0, 0.0])
        np.testing.assert_allclose(thrust_force((3, 4), (0, 0), 1.0), [-0.6, -0.8])

    def test_thrust_at_goal_is_zero(self):
        """An agent sitting on its leader feels no thrust"""
        np.testing.assert_array_equal(thrust_force((1, 1), (1, 1), 1.0), [0.0, 0.0])

    def test_leonard_zero_at_equilibrium_and_cutoff(self):
        """Zero force at d0 and at or beyond d1"""
        np.testing.assert_allclose(leonard_pair_force(np.array([2.0, 0.0]), self.law), [0.0, 0.0], atol=1e-15)
        np.testing.assert_array_equal(leonard_pair_force(np.array([3.0, 0.0]), self.law), [0.0, 0.0])
        np.testing.assert_array_equal(leonard_pair_force(np.array([0.0, 7.0]), self.law), [0.0, 0.0])

    def test_leonard_attraction_value(self):
        """rel=(2.5,0) gives (-0.032, 0), pulling toward the other agent"""
        force = leonard_pair_force(np.array([2.5, 0.0]), self.law)
        np.testing.assert_allclose(force, [-0.032, 0.0], rtol=1e-12)

    def test_leonard_repulsion_inside_d0(self):
        """Below d0 the force points along +rel"""
        force = leonard_pair_force(np.array([1.0, 0.0]), self.law)
        self.assertGreater(force[0], 0.0)

    def test_leonard_antisymmetric(self):
        """F(rel) = -F(-rel)"""
        rng = np.random.default_rng(4)
        for _ in range(50):
            rel = rng.uniform(-3, 3, size=2)
            np.testing.assert_allclose(
                leonard_pair_force(rel, self.law), -leonard_pair_force(-rel, self.law), atol=1e-15
            )

    def test_avoidance_values(self):
        """Repulsive inside dr with magnitude (1/r^2)(dr/r - 1), zero at and beyond dr"""
        np.testing.assert_allclose(avoidance_force(np.array([3.0, 0.0]), 6.0), [1.0 / 9.0, 0.0], rtol=1e-12)
        np.testing.assert_array_equal(avoidance_force(np.array([6.0, 0.0]), 6.0), [0.0, 0.0])
        np.testing.assert_array_equal(avoidance_force(np.array([0.0, 10.0]), 6.0), [0.0, 0.0])

    def test_overlap_is_capped(self):
        """Near-coincident agents get a capped repulsion"""
        force = leonard_pair_force(np.array([1e-4, 0.0]), self.law)
        self.assertAlmostEqual(float(np.hypot(*force)), FORCE_CAP)
        self.assertGreater(force[0], 0.0)

    def test_pairwise_sum_matches_scalar_law(self):
        """The vectorized sum equals the sum of scalar pair forces"""
        pos = np.array([[0.0, 0.0], [2.5, 0.0], [0.5, 1.5], [10.0, 10.0]])
        summed = pairwise_sum(pos, pos, self.law.d0, self.law.d1, same_set=True)
        for i in range(len(pos)):
            expected = sum(
                (leonard_pair_force(pos[i] - pos[j], self.law) for j in range(len(pos)) if j != i),
                np.zeros(2),
            )
            np.testing.assert_allclose(summed[i], expected, atol=1e-12)

    def test_force_law_rejects_bad_ordering(self):
        """d0 must be smaller than d1"""
        with self.assertRaises(ValueError):
            ForceLawParams(d0=3.0, d1=2.0)


class TestVerletStep(unittest.TestCase):
    """Integrator behaviour"""

    def test_free_flight(self):
        """Zero force and negligible damping: position advances by v dt"""
        params = DynamicsParams(mass=1.0, thrust=0.0, damping=1e-12, dt=0.1)
        state = _single((0.0, 0.0), (1.0, 0.0))
        nxt = verlet_step(state, lambda s: np.zeros_like(s.pos), params)
        np.testing.assert_allclose(nxt.pos[0], [0.1, 0.0], atol=1e-12)
        np.testing.assert_allclose(nxt.vel[0], [1.0, 0.0], atol=1e-12)

    def test_terminal_speed(self):
        """Thrust plus damping converges to K/B within 1% after 5 tau"""
        params = DynamicsParams(mass=1.0, thrust=1.0, damping=1.0, dt=0.01)
        state = _single((0.0, 0.0), (0.0, 0.0))
        leader = np.array([1e6, 0.0])
        field = lambda s: np.array([thrust_force(p, leader, params.thrust) for p in s.pos])
        for _ in range(int(5.0 / params.dt)):
            state = verlet_step(state, field, params)
        self.assertLess(abs(np.hypot(*state.vel[0]) - 1.0), 0.01)
        for _ in range(int(10.0 / params.dt)):
            state = verlet_step(state, field, params)
        self.assertLess(float(np.hypot(*(state.vel[0] - [1.0, 0.0]))), 0.01)

    def test_dead_agents_untouched(self):
        """A dead agent keeps its position and velocity"""
        params = DynamicsParams(dt=0.05)
        state = SwarmState.from_agents([
            AgentState(0, Side.ATTACKER, (0.0, 0.0), (1.0, 0.0)),
            AgentState(1, Side.DEFENDER, (5.0, 0.0), (0.0, 1.0), alive=False),
        ])
        nxt = verlet_step(state, lambda s: np.ones_like(s.pos), params)
        np.testing.assert_array_equal(nxt.pos[1], [5.0, 0.0])
        np.testing.assert_array_equal(nxt.vel[1], [0.0, 1.0])

    def test_deterministic(self):
        """Identical inputs give bit-identical outputs"""
        law = ForceLawParams()
        params = DynamicsParams(dt=0.01)
        pos = np.random.default_rng(1).uniform(-3, 3, size=(6, 2))
        agents = [AgentState(k, Side.ATTACKER, pos[k], (0.0, 0.0)) for k in range(6)]
        field = lambda s: pairwise_sum(s.pos, s.pos, law.d0, law.d1, same_set=True)
        a = b = SwarmState.from_agents(agents)
        for _ in range(100):
            a = verlet_step(a, field, params)
        for _ in range(100):
            b = verlet_step(b, field, params)
        np.testing.assert_array_equal(a.pos, b.pos)
        np.testing.assert_array_equal(a.vel, b.vel)

    def test_bound_pair_converges_with_dt(self):
        """Halving dt moves the final positions of a bound pair by less than 1%"""
        law = ForceLawParams()
        field = lambda s: pairwise_sum(s.pos, s.pos, law.d0, law.d1, same_set=True)

        def final_separation(dt):
            params = DynamicsParams(mass=1.0, thrust=0.0, damping=0.2, dt=dt)
            state = SwarmState.from_agents([
                AgentState(0, Side.ATTACKER, (0.0, 0.0), (0.0, 0.0)),
                AgentState(1, Side.ATTACKER, (2.6, 0.0), (0.0, 0.0)),
            ])
            for _ in range(int(round(20.0 / dt))):
                state = verlet_step(state, field, params)
            return state.pos[1] - state.pos[0]

        coarse, fine = final_separation(0.01), final_separation(0.005)
        self.assertLess(float(np.hypot(*(coarse - fine))) / float(np.hypot(*fine)), 0.01)

    def test_undamped_pair_amplitude_stable(self):
        """A bound pair without damping keeps its oscillation amplitude within 2%"""
        law = ForceLawParams()
        params = DynamicsParams(mass=1.0, thrust=0.0, damping=1e-12, dt=0.01)
        field = lambda s: pairwise_sum(s.pos, s.pos, law.d0, law.d1, same_set=True)
        state = SwarmState.from_agents([
            AgentState(0, Side.ATTACKER, (0.0, 0.0), (0.0, 0.0)),
            AgentState(1, Side.ATTACKER, (2.4, 0.0), (0.0, 0.0)),
        ])
        separations = []
        for _ in range(10_000):
            state = verlet_step(state, field, params)
            separations.append(state.pos[1, 0] - state.pos[0, 0])
        separations = np.array(separations)
        first, last = separations[:2000], separations[-2000:]
        self.assertLess(abs(last.max() - first.max()) / 2.4, 0.02)
        self.assertLess(abs(last.min() - first.min()) / 2.4, 0.02)

    def test_non_finite_force_raises(self):
        """A NaN force aborts the step"""
        state = _single((0.0, 0.0), (0.0, 0.0))
        with self.assertRaises(SimulationDivergedError):
            verlet_step(state, lambda s: np.full_like(s.pos, np.nan), DynamicsParams())


if __name__ == "__main__":
    unittest.main(verbosity=2)
