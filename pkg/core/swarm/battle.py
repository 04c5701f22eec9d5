"""
Swarm Scaling - Swarm Battle Scenario

A red swarm starts a distance L from a high-value unit (HVU) at the origin
and flies toward it; a blue swarm starts at the HVU and chases the red
centroid. Both sides fire Gaussian-CDF weapons at their closest enemy.
The metric is the attacker survival fraction P_a at termination.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import structlog
from pydantic import Field, model_validator

from ..settings import DynamicsParams, ForceLawParams, ParamModel, WeaponParams
from .attrition import RngStream, derive_seed, draw_kills, engagement_survival
from .dynamics import EPS_VL, SwarmState, pairwise_sum, verlet_step

logger = structlog.get_logger(__name__)


class BattleParams(ParamModel):
    """Full parameter set of one battle instance"""

    n_attackers: int = Field(50, ge=1)
    n_defenders: int = Field(50, ge=0)
    attacker_weapon: WeaponParams = WeaponParams(rate=1.0, range=6.0)
    defender_weapon: WeaponParams = WeaponParams(rate=1.0, range=4.0)
    force_law: ForceLawParams = ForceLawParams()
    dynamics: DynamicsParams = DynamicsParams()
    start_distance: float = Field(50.0, gt=0)
    hvu_radius: float = Field(1.0, gt=0)
    t_max: Optional[float] = Field(None, gt=0)  # default 10 L / V
    attacker_scatter: Optional[float] = Field(None, gt=0)  # default 0.5 sqrt(N_a) d0
    defender_scatter: Optional[float] = Field(None, gt=0)  # default 0.5 sqrt(N_d) d0
    ensemble: int = Field(5, ge=1)
    base_seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _resolve_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        dynamics = data.get("dynamics", DynamicsParams())
        if isinstance(dynamics, dict):
            dynamics = DynamicsParams(**dynamics)
        force_law = data.get("force_law", ForceLawParams())
        if isinstance(force_law, dict):
            force_law = ForceLawParams(**force_law)
        if data.get("t_max") is None:
            speed = dynamics.speed_scale
            if speed > 0:
                data["t_max"] = 10.0 * float(data.get("start_distance", 50.0)) / speed
            else:
                raise ValueError("t_max is required when the thrust is zero")
        if data.get("attacker_scatter") is None:
            data["attacker_scatter"] = 0.5 * np.sqrt(int(data.get("n_attackers", 50))) * force_law.d0
        if data.get("defender_scatter") is None:
            n_def = max(int(data.get("n_defenders", 50)), 1)
            data["defender_scatter"] = 0.5 * np.sqrt(n_def) * force_law.d0
        return data


@dataclass
class BattleOutcome:
    """Result of one battle run"""
    attacker_survival: float  # alive attackers / N_a at termination
    hvu_destroyed: bool
    t_end: float
    stalemate: bool = False  # t_max with both sides alive and no approach progress
    timed_out: bool = False
    attackers_alive: int = 0
    defenders_alive: int = 0
    clamped_factors: int = 0  # survival factors clamped because rate * dt >= 1

    @property
    def flags(self) -> List[str]:
        flags = []
        if self.stalemate:
            flags.append("stalemate")
        elif self.timed_out:
            flags.append("timeout")
        if self.clamped_factors:
            flags.append("dt_too_coarse")
        return flags


def _disk(rng: RngStream, center: np.ndarray, radius: float, count: int) -> np.ndarray:
    if count == 0:
        return np.zeros((0, 2))
    radii = radius * np.sqrt(rng.uniform(size=count))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return center + np.column_stack((radii * np.cos(angles), radii * np.sin(angles)))


def init_battle(p: BattleParams, rng: RngStream) -> SwarmState:
    """
    Scatter N_a attackers uniformly over a disk around (L, 0) and N_d
    defenders over a disk around the HVU. Attackers get ids 0..N_a-1 and
    defenders the ids after them; everyone starts at rest.
    """
    attackers = _disk(rng, np.array([p.start_distance, 0.0]), p.attacker_scatter, p.n_attackers)
    defenders = _disk(rng, np.zeros(2), p.defender_scatter, p.n_defenders)
    total = p.n_attackers + p.n_defenders
    return SwarmState(
        ids=np.arange(total),
        side=np.arange(total) < p.n_attackers,
        pos=np.vstack((attackers, defenders)),
        vel=np.zeros((total, 2)),
        alive=np.ones(total, dtype=bool),
    )


def _thrust_toward(pos: np.ndarray, leader: np.ndarray, K: float) -> np.ndarray:
    diff = leader - pos
    dist = np.hypot(diff[:, 0], diff[:, 1])
    out = np.zeros_like(pos)
    moving = dist >= EPS_VL
    out[moving] = K * diff[moving] / dist[moving, None]
    return out


def battle_forces(
    state: SwarmState,
    p: BattleParams,
    defender_leader: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Non-damping force on every agent.

    Attackers: thrust toward the HVU, Leonard forces from other attackers
    and avoidance of defenders inside dr. Defenders: thrust toward the
    attacker centroid and Leonard forces from other defenders; defenders
    do not avoid attackers.

    Args:
        state: current swarm state
        p: battle parameters
        defender_leader: leader used when no attacker is alive (last centroid)
    """
    forces = np.zeros_like(state.pos)
    att = state.attackers
    dfn = state.defenders
    K = p.dynamics.thrust
    law = p.force_law

    if len(att):
        a_pos = state.pos[att]
        forces[att] = (
            _thrust_toward(a_pos, np.zeros(2), K)
            + pairwise_sum(a_pos, a_pos, law.d0, law.d1, same_set=True)
            + pairwise_sum(a_pos, state.pos[dfn], law.dr, law.dr)
        )
    if len(dfn):
        if len(att):
            leader = state.pos[att].mean(axis=0)
        elif defender_leader is not None:
            leader = np.asarray(defender_leader, dtype=float)
        else:
            leader = np.zeros(2)
        d_pos = state.pos[dfn]
        forces[dfn] = _thrust_toward(d_pos, leader, K) + pairwise_sum(
            d_pos, d_pos, law.d0, law.d1, same_set=True
        )
    return forces


class BattleEngine:
    """Steps one battle: attrition at current positions, integrate, resolve kills"""

    def __init__(self, p: BattleParams, seed: int):
        self.params = p
        self.seed = seed
        self.rng = RngStream(seed=seed)
        self.state = init_battle(p, self.rng)
        self.last_centroid = self._centroid()
        self.clamped = 0

    def _centroid(self) -> np.ndarray:
        att = self.state.attackers
        if len(att) == 0:
            return np.zeros(2)
        return self.state.pos[att].mean(axis=0)

    def _forces(self, state: SwarmState) -> np.ndarray:
        return battle_forces(state, self.params, self.last_centroid)

    def _attrition(self) -> np.ndarray:
        state, p = self.state, self.params
        att, dfn = state.attackers, state.defenders
        dt = p.dynamics.dt
        att_surv, c1 = engagement_survival(state.pos[dfn], state.pos[att], p.defender_weapon, dt)
        def_surv, c2 = engagement_survival(state.pos[att], state.pos[dfn], p.attacker_weapon, dt)
        self.clamped += c1 + c2
        # ids ascend with attackers first, so this is the draw order
        killed = draw_kills(np.concatenate((att_surv, def_surv)), self.rng)
        return np.concatenate((att, dfn))[killed]

    def step(self) -> None:
        doomed = self._attrition()
        self.state = verlet_step(self.state, self._forces, self.params.dynamics)
        self.state.kill(doomed)
        if len(self.state.attackers):
            self.last_centroid = self._centroid()

    def hvu_reached(self) -> bool:
        att = self.state.attackers
        if len(att) == 0:
            return False
        pos = self.state.pos[att]
        return bool(np.any(np.hypot(pos[:, 0], pos[:, 1]) < self.params.hvu_radius))

    def nearest_approach(self) -> float:
        """Distance of the closest alive attacker to the HVU"""
        att = self.state.attackers
        if len(att) == 0:
            return float("inf")
        pos = self.state.pos[att]
        return float(np.hypot(pos[:, 0], pos[:, 1]).min())

    def run(self) -> BattleOutcome:
        p = self.params
        hvu_destroyed = self.hvu_reached()
        timed_out = False
        # progress is judged over the last tenth of t_max
        window_start = 0.9 * p.t_max
        window_distance: Optional[float] = None
        while not hvu_destroyed and len(self.state.attackers):
            if window_distance is None and self.state.time >= window_start - 1e-12:
                window_distance = self.nearest_approach()
            if self.state.time >= p.t_max - 1e-12:
                timed_out = True
                break
            self.step()
            hvu_destroyed = self.hvu_reached()

        stalemate = False
        if timed_out and len(self.state.defenders):
            closing = window_distance - self.nearest_approach() if window_distance is not None else 0.0
            stalemate = closing <= 1e-6 * p.start_distance

        alive_att = len(self.state.attackers)
        outcome = BattleOutcome(
            attacker_survival=alive_att / p.n_attackers,
            hvu_destroyed=hvu_destroyed,
            t_end=float(self.state.time),
            stalemate=stalemate,
            timed_out=timed_out,
            attackers_alive=alive_att,
            defenders_alive=len(self.state.defenders),
            clamped_factors=self.clamped,
        )
        if self.clamped:
            logger.warning("attrition.dt_too_coarse", seed=self.seed, clamped=self.clamped, dt=p.dynamics.dt)
        if stalemate:
            logger.info("battle.stalemate", seed=self.seed, t_end=outcome.t_end)
        elif timed_out:
            logger.info("battle.timeout", seed=self.seed, t_end=outcome.t_end)
        logger.debug(
            "battle.run.finished",
            seed=self.seed,
            attacker_survival=outcome.attacker_survival,
            hvu_destroyed=hvu_destroyed,
            t_end=outcome.t_end,
        )
        return outcome


def run_battle(p: BattleParams, seed: int) -> BattleOutcome:
    """Integrate one battle to termination and report P_a"""
    return BattleEngine(p, seed).run()


def ensemble_seeds(p: BattleParams) -> List[int]:
    return [derive_seed(p.base_seed, k) for k in range(p.ensemble)]


def ensemble_pa(p: BattleParams) -> float:
    """Mean P_a over ``p.ensemble`` runs with seeds derived from ``p.base_seed``"""
    outcomes = [run_battle(p, seed) for seed in ensemble_seeds(p)]
    return float(np.mean([o.attacker_survival for o in outcomes]))


def battle_metrics(outcome: BattleOutcome) -> Dict[str, Any]:
    return {
        "attacker_survival": outcome.attacker_survival,
        "hvu_destroyed": outcome.hvu_destroyed,
        "t_end": outcome.t_end,
    }
