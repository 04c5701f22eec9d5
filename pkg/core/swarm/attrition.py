"""
Swarm Scaling - Attrition Model

Per-step survival products from attrition rates, the Gaussian-CDF weapon
and closest-enemy targeting, and the seeded random streams that drive
every kill decision.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy.special import ndtr

from ..settings import WeaponParams
from .dynamics import AgentState

logger = structlog.get_logger(__name__)

ArrayLike = Union[float, np.ndarray]


def derive_seed(base_seed: int, run_index: int) -> int:
    """
    Seed for run ``run_index`` of a sweep rooted at ``base_seed``.

    Keyed on the index, not on draw order, so any worker can derive any
    run's stream independently.
    """
    sequence = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(run_index),))
    # kept below 2**63 to fit int64 record columns
    return int(sequence.generate_state(1, dtype=np.uint64)[0]) >> 1


@dataclass
class RngStream:
    """Seeded PCG64 stream that counts the variates it has produced"""
    seed: int
    position: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.generator = np.random.Generator(np.random.PCG64(int(self.seed)))
        if self.position:
            self.generator.bit_generator.advance(self.position)

    @classmethod
    def for_run(cls, base_seed: int, run_index: int) -> "RngStream":
        return cls(seed=derive_seed(base_seed, run_index))

    def _count(self, size) -> None:
        self.position += 1 if size is None else int(np.prod(size))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        self._count(size)
        return self.generator.uniform(low, high, size)

    def exponential(self, scale: float = 1.0, size=None):
        self._count(size)
        return self.generator.exponential(scale, size)

    def child(self, key: int) -> "RngStream":
        """Independent sub-stream, e.g. one per ensemble member"""
        return RngStream(seed=derive_seed(self.seed, key))


def std_normal_cdf(z: ArrayLike) -> ArrayLike:
    """Standard normal CDF, accurate to double precision in both tails"""
    result = ndtr(z)
    return float(result) if np.ndim(result) == 0 else result


def gaussian_attrition_rate(dist: ArrayLike, w: WeaponParams) -> ArrayLike:
    """
    Kill rate 2 lambda Phi(-dist/R) of a weapon against a target at ``dist``.

    Equals lambda at zero distance and decays through lambda/2 near one range.
    """
    dist_arr = np.asarray(dist, dtype=float)
    if np.any(dist_arr < 0):
        raise ValueError("distance must be non-negative")
    rate = 2.0 * w.rate * ndtr(-dist_arr / w.range)
    return float(rate) if np.ndim(rate) == 0 else rate


def select_closest_target(shooter: AgentState, enemies: Sequence[AgentState]) -> Optional[int]:
    """Id of the closest alive enemy, lowest id on ties, None if none are alive"""
    candidates = sorted((e for e in enemies if e.alive), key=lambda e: e.id)
    if not candidates:
        return None
    positions = np.array([e.pos for e in candidates], dtype=float)
    diff = positions - shooter.pos
    dist = np.hypot(diff[:, 0], diff[:, 1])
    return candidates[int(np.argmin(dist))].id


def closest_target_indices(shooter_pos: np.ndarray, target_pos: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized closest-target selection.

    ``target_pos`` rows must be in ascending id order; argmin returns the
    first minimum, which is then the lowest id.

    Returns:
        (index of chosen target per shooter, distance to it)
    """
    rel = shooter_pos[:, None, :] - target_pos[None, :, :]
    dist = np.hypot(rel[..., 0], rel[..., 1])
    choice = np.argmin(dist, axis=1)
    return choice, dist[np.arange(len(shooter_pos)), choice]


def survival_product(rates: Sequence[float], dt: float) -> Tuple[float, bool]:
    """
    Per-step survival probability prod(1 - phi_k dt).

    Returns:
        (probability, True if any factor had to be clamped at zero)
    """
    factors = 1.0 - np.asarray(rates, dtype=float) * dt
    clamped = bool(np.any(factors <= 0))
    return float(np.prod(np.clip(factors, 0.0, 1.0))), clamped


def step_survival(agent: AgentState, rates: Sequence[float], dt: float, rng: RngStream) -> bool:
    """
    Draw one uniform for ``agent`` and decide whether it survives the step.

    The agent dies iff the draw exceeds prod(1 - phi_k dt). Factors with
    phi dt >= 1 are clamped to zero and reported as dt-too-coarse.
    """
    if any(rate < 0 for rate in rates):
        raise ValueError("attrition rates must be non-negative")
    ps, clamped = survival_product(rates, dt)
    if clamped:
        logger.warning("attrition.dt_too_coarse", agent=agent.id, dt=dt, max_rate=max(rates))
    return bool(rng.uniform() <= ps)


def engagement_survival(
    shooter_pos: np.ndarray,
    target_pos: np.ndarray,
    weapon: WeaponParams,
    dt: float,
) -> Tuple[np.ndarray, int]:
    """
    Survival probability of every target when each shooter fires on its
    closest target.

    Returns:
        (per-target survival product, number of clamped factors)
    """
    survival = np.ones(len(target_pos))
    if len(shooter_pos) == 0 or len(target_pos) == 0 or weapon.rate == 0:
        return survival, 0
    choice, dist = closest_target_indices(shooter_pos, target_pos)
    factors = 1.0 - gaussian_attrition_rate(dist, weapon) * dt
    clamped = int(np.count_nonzero(factors <= 0))
    np.multiply.at(survival, choice, np.clip(factors, 0.0, 1.0))
    return survival, clamped


def draw_kills(survival: np.ndarray, rng: RngStream) -> np.ndarray:
    """One uniform per entry, in the given order; True where the agent dies"""
    if len(survival) == 0:
        return np.zeros(0, dtype=bool)
    draws = rng.uniform(size=len(survival))
    return draws > survival
