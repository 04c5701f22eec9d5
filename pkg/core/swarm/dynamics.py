"""
Swarm Scaling - Agent Dynamics

Second-order point-mass dynamics: thrust toward a virtual leader, linear
velocity damping and Leonard-type pair pseudo-forces, advanced with a
velocity-Verlet step whose damping term is treated implicitly at the
half step.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, List, Optional

import numpy as np
import structlog

from ..errors import SimulationDivergedError
from ..settings import DynamicsParams, ForceLawParams

logger = structlog.get_logger(__name__)

Vec2 = np.ndarray

EPS_VL = 1e-6
EPS_PAIR = 1e-3
FORCE_CAP = 1e3


class Side(Enum):
    """Which swarm an agent belongs to"""
    ATTACKER = "attacker"
    DEFENDER = "defender"


@dataclass
class AgentState:
    """Position, velocity and status of one agent"""
    id: int
    side: Side
    pos: Vec2
    vel: Vec2
    alive: bool = True

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)


def _cap(vector: np.ndarray) -> np.ndarray:
    norm = float(np.hypot(vector[0], vector[1]))
    if norm > FORCE_CAP:
        return vector * (FORCE_CAP / norm)
    return vector


def thrust_force(pos: Vec2, vl: Vec2, K: float) -> Vec2:
    """Thrust of magnitude K pointing from ``pos`` toward the virtual leader ``vl``"""
    diff = np.asarray(vl, dtype=float) - np.asarray(pos, dtype=float)
    dist = float(np.hypot(diff[0], diff[1]))
    if dist < EPS_VL:
        return np.zeros(2)
    return K * diff / dist


def _pair_law(rel: Vec2, d_eq: float, cutoff: float) -> Vec2:
    rel = np.asarray(rel, dtype=float)
    r = float(np.hypot(rel[0], rel[1]))
    if r >= cutoff:
        return np.zeros(2)
    if r < EPS_PAIR:
        direction = rel / r if r > 0 else np.array([1.0, 0.0])
        return FORCE_CAP * direction
    unit = rel / r
    return _cap(-unit / r**2 * (1.0 - d_eq / r))


def leonard_pair_force(rel: Vec2, p: ForceLawParams) -> Vec2:
    """
    Cohesion/repulsion between two same-side agents.

    ``rel`` is r_self - r_other. Attractive for d0 < |rel| < d1, repulsive
    below d0, zero at d0 and at or beyond d1.
    """
    return _pair_law(rel, p.d0, p.d1)


def avoidance_force(rel: Vec2, dr: float) -> Vec2:
    """Repulsion of an agent away from an enemy closer than ``dr``"""
    return _pair_law(rel, dr, dr)


def pairwise_sum(
    pos_self: np.ndarray,
    pos_other: np.ndarray,
    d_eq: float,
    cutoff: float,
    same_set: bool = False,
) -> np.ndarray:
    """
    Vectorized sum of the pair law over all (self, other) pairs.

    Args:
        pos_self: (n, 2) positions receiving the force
        pos_other: (m, 2) positions exerting it
        d_eq: zero-force distance of the law
        cutoff: range beyond which the law vanishes
        same_set: both arrays are the same agents; self-pairs are skipped

    Returns:
        (n, 2) array of summed forces
    """
    n = len(pos_self)
    if n == 0 or len(pos_other) == 0:
        return np.zeros((n, 2))

    rel = pos_self[:, None, :] - pos_other[None, :, :]
    r = np.hypot(rel[..., 0], rel[..., 1])

    active = r < cutoff
    if same_set:
        np.fill_diagonal(active, False)

    close = active & (r < EPS_PAIR)
    regular = active & ~close

    with np.errstate(divide="ignore", invalid="ignore"):
        rr = np.where(regular, r, 1.0)
        raw = -(1.0 - d_eq / rr) / rr**3
        magnitude = np.abs(raw) * rr
        scale = np.where(magnitude > FORCE_CAP, FORCE_CAP / np.where(magnitude > 0, magnitude, 1.0), 1.0)
        coef = np.where(regular, raw * scale, 0.0)
    forces = coef[..., None] * rel

    if close.any():
        idx_i, idx_j = np.nonzero(close)
        for i, j in zip(idx_i, idx_j):
            dist = r[i, j]
            if dist > 0:
                direction = rel[i, j] / dist
            else:
                # coincident agents: push apart along x, ordered by index
                direction = np.array([-1.0, 0.0]) if i < j else np.array([1.0, 0.0])
            forces[i, j] = FORCE_CAP * direction

    return forces.sum(axis=1)


@dataclass
class SwarmState:
    """
    Array form of a population of agents.

    ``forces`` caches the non-damping force evaluated at the current
    positions; it is cleared whenever the alive set changes.
    """
    ids: np.ndarray
    side: np.ndarray  # True for attackers
    pos: np.ndarray
    vel: np.ndarray
    alive: np.ndarray
    time: float = 0.0
    forces: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_agents(cls, agents: Iterable[AgentState], time: float = 0.0) -> "SwarmState":
        agents = sorted(agents, key=lambda a: a.id)
        ids = [a.id for a in agents]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        return cls(
            ids=np.array(ids, dtype=int),
            side=np.array([a.side is Side.ATTACKER for a in agents], dtype=bool),
            pos=np.array([a.pos for a in agents], dtype=float).reshape(-1, 2),
            vel=np.array([a.vel for a in agents], dtype=float).reshape(-1, 2),
            alive=np.array([a.alive for a in agents], dtype=bool),
            time=time,
        )

    def agents(self) -> List[AgentState]:
        return [
            AgentState(
                id=int(self.ids[k]),
                side=Side.ATTACKER if self.side[k] else Side.DEFENDER,
                pos=self.pos[k].copy(),
                vel=self.vel[k].copy(),
                alive=bool(self.alive[k]),
            )
            for k in range(len(self.ids))
        ]

    def copy(self) -> "SwarmState":
        return replace(
            self,
            pos=self.pos.copy(),
            vel=self.vel.copy(),
            alive=self.alive.copy(),
            forces=None if self.forces is None else self.forces.copy(),
        )

    def kill(self, indices: Iterable[int]) -> None:
        indices = list(indices)
        if not indices:
            return
        self.alive[indices] = False
        self.forces = None

    @property
    def attackers(self) -> np.ndarray:
        return np.flatnonzero(self.side & self.alive)

    @property
    def defenders(self) -> np.ndarray:
        return np.flatnonzero(~self.side & self.alive)


ForceField = Callable[[SwarmState], np.ndarray]


def _evaluate(force_field: ForceField, state: SwarmState) -> np.ndarray:
    forces = np.asarray(force_field(state), dtype=float)
    if forces.shape != state.pos.shape:
        raise ValueError(f"force field returned shape {forces.shape}, expected {state.pos.shape}")
    live = forces[state.alive]
    if not np.all(np.isfinite(live)):
        bad = state.ids[state.alive][~np.all(np.isfinite(live), axis=1)]
        logger.error("dynamics.force_not_finite", time=state.time, agents=bad.tolist())
        raise SimulationDivergedError(
            f"non-finite force at t={state.time:.4f} on agents {bad.tolist()}; reduce dt"
        )
    forces[~state.alive] = 0.0
    return forces


def verlet_step(state: SwarmState, force_field: ForceField, p: DynamicsParams) -> SwarmState:
    """
    Advance every alive agent by one step of size ``p.dt``.

    ``force_field`` returns the thrust plus pair forces for all agents
    (rows of dead agents are ignored). Damping -B v is added here, with the
    end-of-step velocity solved implicitly so that the scheme stays second
    order and reproduces the terminal speed K/B exactly.

    Returns:
        a new SwarmState at time + dt with the end-of-step forces cached
    """
    dt, m, B = p.dt, p.mass, p.damping
    forces = state.forces if state.forces is not None else _evaluate(force_field, state)

    nxt = state.copy()
    alive = state.alive
    accel = (forces[alive] - B * state.vel[alive]) / m
    nxt.pos[alive] = state.pos[alive] + state.vel[alive] * dt + 0.5 * accel * dt**2
    v_half = state.vel[alive] + 0.5 * accel * dt
    nxt.time = state.time + dt
    nxt.forces = None

    new_forces = _evaluate(force_field, nxt)
    nxt.vel[alive] = (v_half + 0.5 * dt * new_forces[alive] / m) / (1.0 + 0.5 * dt * B / m)
    nxt.forces = new_forces

    if not (np.all(np.isfinite(nxt.pos[alive])) and np.all(np.isfinite(nxt.vel[alive]))):
        raise SimulationDivergedError(f"non-finite state at t={nxt.time:.4f}; reduce dt")
    return nxt
