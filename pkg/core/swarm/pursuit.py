"""
Swarm Scaling - Pursuit of Scattering Attackers

Attackers scatter from a point a distance D from the HVU with constant random
velocities. Defenders are re-assigned every step by a global, priority-ordered
auction and steer toward the intercept point of their target. Any attacker
inside a defender's kill radius is destroyed at once. The metric is the total
kill time t_k.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import Field, model_validator

from ..settings import DynamicsParams, ForceLawParams, ParamModel
from .attrition import RngStream, derive_seed
from .dynamics import EPS_VL, AgentState, Side, SwarmState, pairwise_sum, verlet_step

logger = structlog.get_logger(__name__)


class PursuitParams(ParamModel):
    """Full parameter set of one pursuit instance"""

    n_attackers: int = Field(16, ge=1)
    n_defenders: int = Field(24, ge=1)
    attacker_speed: float = Field(0.4, gt=0)  # V_a
    defender_speed: float = Field(1.0, gt=0)  # V_d
    kill_radius: float = Field(1.2, gt=0)  # R
    tau: float = Field(5.0, gt=0)  # m / B of the defenders
    separation: Optional[float] = Field(None, gt=0)  # D, default 40 d
    unit_length: float = Field(1.0, gt=0)  # d
    defender_spread: Optional[float] = Field(None, ge=0)  # default 0.5 sqrt(N_d) d0
    dt: float = Field(0.05, gt=0)
    t_max: Optional[float] = Field(None, gt=0)
    defender_cohesion: bool = False
    force_law: ForceLawParams = ForceLawParams()
    ensemble: int = Field(10, ge=1)
    base_seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _resolve_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        d = float(data.get("unit_length", 1.0))
        if data.get("separation") is None:
            data["separation"] = 40.0 * d
        if data.get("defender_spread") is None:
            law = data.get("force_law", ForceLawParams())
            d0 = law.d0 if isinstance(law, ForceLawParams) else float(dict(law).get("d0", 2.0))
            data["defender_spread"] = 0.5 * math.sqrt(int(data.get("n_defenders", 24))) * d0
        if data.get("t_max") is None:
            closing = float(data.get("defender_speed", 1.0)) - float(data.get("attacker_speed", 0.4))
            reference = closing if closing > 0 else float(data.get("defender_speed", 1.0))
            data["t_max"] = 100.0 * float(data["separation"]) / reference
        return data

    def resized(self, n_attackers: int, n_defenders: int) -> "PursuitParams":
        """Copy with new swarm sizes; the defender spread is re-derived from N_d"""
        data = self.model_dump(exclude={"defender_spread"})
        data.update(n_attackers=int(n_attackers), n_defenders=int(n_defenders))
        return PursuitParams(**data)

    @property
    def velocity_ratio(self) -> float:
        """v = V_d / V_a"""
        return self.defender_speed / self.attacker_speed

    @property
    def scatter_origin(self) -> np.ndarray:
        return np.array([self.separation, 0.0])

    def defender_dynamics(self) -> DynamicsParams:
        """m = 1, B = 1/tau, K = V_d/tau so that K/B = V_d and m/B = tau"""
        return DynamicsParams(
            mass=1.0,
            damping=1.0 / self.tau,
            thrust=self.defender_speed / self.tau,
            dt=self.dt,
        )


@dataclass
class Assignment:
    """Defender id -> attacker id"""
    targets: Dict[int, int] = field(default_factory=dict)

    def defenders_on(self, attacker_id: int) -> List[int]:
        return [d for d, a in self.targets.items() if a == attacker_id]

    def is_valid(self, n_attackers: int) -> bool:
        """No attacker has two defenders while some attacker has none"""
        counts: Dict[int, int] = {}
        for attacker in self.targets.values():
            counts[attacker] = counts.get(attacker, 0) + 1
        doubled = any(c > 1 for c in counts.values())
        return not (doubled and len(counts) < n_attackers)


@dataclass
class InterceptSolution:
    point: np.ndarray
    time: float
    fallback: bool = False


@dataclass
class PursuitTrace:
    """Sampled trajectories of one pursuit run"""
    times: np.ndarray  # (T,)
    defender_positions: np.ndarray  # (T, N_d, 2)
    attacker_origin: np.ndarray
    attacker_velocities: np.ndarray  # (N_a, 2)
    kill_times: np.ndarray  # (N_a,), inf if never killed
    active: np.ndarray  # (N_d,)


@dataclass
class PursuitOutcome:
    """Result of one pursuit run"""
    kill_time: float  # t_k
    attackers_remaining: int
    intercept_fallbacks: int
    timed_out: bool = False
    trace: Optional[PursuitTrace] = None

    @property
    def flags(self) -> List[str]:
        flags = []
        if self.intercept_fallbacks:
            flags.append("intercept_fallback")
        if self.timed_out:
            flags.append("timeout")
        return flags


def scatter_attackers(p: PursuitParams, rng: RngStream) -> List[AgentState]:
    """
    Attackers at the scatter origin with constant velocity: speed U(0, V_a),
    bearing U(-pi/4, pi/4) about the direction of the HVU.
    """
    speeds = rng.uniform(0.0, p.attacker_speed, size=p.n_attackers)
    angles = rng.uniform(-math.pi / 4, math.pi / 4, size=p.n_attackers)
    heading = math.pi + angles
    velocities = np.column_stack((speeds * np.cos(heading), speeds * np.sin(heading)))
    return [
        AgentState(id=i, side=Side.ATTACKER, pos=p.scatter_origin.copy(), vel=velocities[i])
        for i in range(p.n_attackers)
    ]


def attacker_positions(origin: np.ndarray, velocities: np.ndarray, t: float) -> np.ndarray:
    """Constant-bearing kinematics: origin + v t"""
    return origin + velocities * t


def auction_indices(attacker_pos: np.ndarray, defender_pos: np.ndarray, origin: np.ndarray) -> np.ndarray:
    """
    Attacker index targeted by each defender (-1 if none).

    Attackers are served in order of distance from ``origin``, farthest first,
    each taking its closest free defender. Defenders left over once every
    attacker is served go after their closest attacker.
    """
    n_att, n_def = len(attacker_pos), len(defender_pos)
    target = np.full(n_def, -1, dtype=int)
    if n_att == 0 or n_def == 0:
        return target

    offset = attacker_pos - origin
    priority = np.argsort(-np.hypot(offset[:, 0], offset[:, 1]), kind="stable")
    rel = attacker_pos[:, None, :] - defender_pos[None, :, :]
    dist = np.hypot(rel[..., 0], rel[..., 1])

    free = np.ones(n_def, dtype=bool)
    for a in priority:
        if not free.any():
            break
        candidates = np.where(free, dist[a], np.inf)
        chosen = int(np.argmin(candidates))
        target[chosen] = a
        free[chosen] = False
    if free.any():
        target[free] = np.argmin(dist[:, free], axis=0)
    return target


def auction_assign(
    attackers: Sequence[AgentState],
    defenders: Sequence[AgentState],
    scatter_origin: np.ndarray,
) -> Assignment:
    """Global priority auction over the alive agents"""
    live_att = sorted((a for a in attackers if a.alive), key=lambda a: a.id)
    live_def = sorted((d for d in defenders if d.alive), key=lambda d: d.id)
    if not live_att or not live_def:
        return Assignment()
    target = auction_indices(
        np.array([a.pos for a in live_att]),
        np.array([d.pos for d in live_def]),
        np.asarray(scatter_origin, dtype=float),
    )
    return Assignment({live_def[j].id: live_att[t].id for j, t in enumerate(target) if t >= 0})


def solve_intercept(
    target_pos: np.ndarray,
    target_vel: np.ndarray,
    pursuer_pos: np.ndarray,
    speed: float,
) -> InterceptSolution:
    """
    Earliest t > 0 with |target_pos + target_vel t - pursuer_pos| = speed t.

    Falls back to the target's current position (pure pursuit) when the
    target cannot be caught in a straight line.
    """
    if speed <= 0:
        raise ValueError("pursuer speed must be positive")
    target_pos = np.asarray(target_pos, dtype=float)
    target_vel = np.asarray(target_vel, dtype=float)
    w = target_pos - np.asarray(pursuer_pos, dtype=float)
    c = float(w @ w)
    if c < EPS_VL**2:
        return InterceptSolution(point=target_pos.copy(), time=0.0)

    a = float(target_vel @ target_vel) - speed**2
    b = 2.0 * float(w @ target_vel)
    roots: List[float] = []
    if abs(a) < 1e-12:
        if b < 0:
            roots.append(-c / b)
    else:
        disc = b * b - 4.0 * a * c
        if disc >= 0:
            q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
            roots.extend(r for r in (q / a, c / q if q != 0 else math.inf) if math.isfinite(r))
    positive = [r for r in roots if r > 0]
    if not positive:
        return InterceptSolution(point=target_pos.copy(), time=math.inf, fallback=True)
    t = min(positive)
    return InterceptSolution(point=target_pos + target_vel * t, time=t)


def intercept_point(
    target_pos: np.ndarray,
    target_vel: np.ndarray,
    pursuer_pos: np.ndarray,
    speed: float,
) -> np.ndarray:
    """Point where a straight-line pursuer at ``speed`` meets the target"""
    return solve_intercept(target_pos, target_vel, pursuer_pos, speed).point


class PursuitEngine:
    """Integrates the defenders while attackers follow fixed straight lines"""

    def __init__(
        self,
        p: PursuitParams,
        seed: int,
        attacker_velocities: Optional[np.ndarray] = None,
        defender_positions: Optional[np.ndarray] = None,
        active: Optional[Sequence[bool]] = None,
    ):
        self.params = p
        self.seed = seed
        self.rng = RngStream(seed=seed)
        self.dynamics = p.defender_dynamics()
        self.origin = p.scatter_origin

        scattered = scatter_attackers(p, self.rng)
        if attacker_velocities is None:
            self.attacker_vel = np.array([a.vel for a in scattered])
        else:
            self.attacker_vel = np.asarray(attacker_velocities, dtype=float).reshape(p.n_attackers, 2)

        if defender_positions is None:
            radii = p.defender_spread * np.sqrt(self.rng.uniform(size=p.n_defenders))
            angles = self.rng.uniform(0.0, 2.0 * math.pi, size=p.n_defenders)
            start = np.column_stack((radii * np.cos(angles), radii * np.sin(angles)))
        else:
            start = np.asarray(defender_positions, dtype=float).reshape(p.n_defenders, 2)

        self.active = np.ones(p.n_defenders, dtype=bool) if active is None else np.asarray(active, dtype=bool)
        self.state = SwarmState(
            ids=np.arange(p.n_attackers, p.n_attackers + p.n_defenders),
            side=np.zeros(p.n_defenders, dtype=bool),
            pos=start,
            vel=np.zeros((p.n_defenders, 2)),
            alive=self.active.copy(),
        )
        self.attacker_alive = np.ones(p.n_attackers, dtype=bool)
        self.kill_times = np.full(p.n_attackers, math.inf)
        self.fallbacks = 0

        if p.attacker_speed >= p.defender_speed:
            logger.warning(
                "pursuit.defenders_not_faster",
                seed=seed,
                attacker_speed=p.attacker_speed,
                defender_speed=p.defender_speed,
            )

    def _forces(self, state: SwarmState) -> np.ndarray:
        p = self.params
        forces = np.zeros_like(state.pos)
        live_def = np.flatnonzero(state.alive)
        live_att = np.flatnonzero(self.attacker_alive)
        if len(live_def) == 0 or len(live_att) == 0:
            return forces

        att_pos = attacker_positions(self.origin, self.attacker_vel[live_att], state.time)
        def_pos = state.pos[live_def]
        target = auction_indices(att_pos, def_pos, self.origin)

        K = self.dynamics.thrust
        for row, j in enumerate(live_def):
            a = target[row]
            solution = solve_intercept(att_pos[a], self.attacker_vel[live_att[a]], def_pos[row], p.defender_speed)
            if solution.fallback:
                self.fallbacks += 1
            diff = solution.point - def_pos[row]
            dist = math.hypot(diff[0], diff[1])
            if dist >= EPS_VL:
                forces[j] = K * diff / dist

        if p.defender_cohesion and len(live_def) > 1:
            law = p.force_law
            forces[live_def] += pairwise_sum(def_pos, def_pos, law.d0, law.d1, same_set=True)
        return forces

    def _resolve_kills(self) -> None:
        live_att = np.flatnonzero(self.attacker_alive)
        live_def = np.flatnonzero(self.state.alive)
        if len(live_att) == 0 or len(live_def) == 0:
            return
        att_pos = attacker_positions(self.origin, self.attacker_vel[live_att], self.state.time)
        rel = att_pos[:, None, :] - self.state.pos[live_def][None, :, :]
        in_range = (np.hypot(rel[..., 0], rel[..., 1]) <= self.params.kill_radius).any(axis=1)
        if in_range.any():
            killed = live_att[in_range]
            self.attacker_alive[killed] = False
            self.kill_times[killed] = self.state.time
            self.state.forces = None

    def run(self, record_trace: bool = False) -> PursuitOutcome:
        p = self.params
        times: List[float] = []
        frames: List[np.ndarray] = []

        self._resolve_kills()
        if record_trace:
            times.append(self.state.time)
            frames.append(self.state.pos.copy())

        timed_out = False
        while self.attacker_alive.any():
            if self.state.time >= p.t_max:
                timed_out = True
                break
            self.state = verlet_step(self.state, self._forces, self.dynamics)
            self._resolve_kills()
            if record_trace:
                times.append(self.state.time)
                frames.append(self.state.pos.copy())

        remaining = int(self.attacker_alive.sum())
        if timed_out:
            kill_time = float(self.state.time)
            logger.warning("pursuit.timeout", seed=self.seed, remaining=remaining, t_max=p.t_max)
        else:
            kill_time = float(self.kill_times.max())
        if self.fallbacks:
            logger.debug("pursuit.intercept_fallback", seed=self.seed, count=self.fallbacks)

        trace = None
        if record_trace:
            trace = PursuitTrace(
                times=np.array(times),
                defender_positions=np.array(frames),
                attacker_origin=self.origin.copy(),
                attacker_velocities=self.attacker_vel.copy(),
                kill_times=self.kill_times.copy(),
                active=self.active.copy(),
            )
        return PursuitOutcome(
            kill_time=kill_time,
            attackers_remaining=remaining,
            intercept_fallbacks=self.fallbacks,
            timed_out=timed_out,
            trace=trace,
        )


def run_pursuit(
    p: PursuitParams,
    seed: int,
    attacker_velocities: Optional[np.ndarray] = None,
    defender_positions: Optional[np.ndarray] = None,
    active: Optional[Sequence[bool]] = None,
    record_trace: bool = False,
) -> PursuitOutcome:
    """
    Run one pursuit until every attacker is destroyed (or t_max).

    Args:
        p: pursuit parameters
        seed: stream seed for the scatter and defender layout
        attacker_velocities: optional (N_a, 2) velocities replacing the scatter draw
        defender_positions: optional (N_d, 2) starting positions
        active: optional mask; inactive defenders stay parked and never kill
        record_trace: keep per-step defender positions for the planner
    """
    return PursuitEngine(p, seed, attacker_velocities, defender_positions, active).run(record_trace)


def ensemble_tk(p: PursuitParams, attacker_velocities: Optional[np.ndarray] = None) -> float:
    """Mean t_k over ``p.ensemble`` runs seeded from ``p.base_seed``"""
    values = [
        run_pursuit(p, derive_seed(p.base_seed, k), attacker_velocities=attacker_velocities).kill_time
        for k in range(p.ensemble)
    ]
    return float(np.mean(values))
