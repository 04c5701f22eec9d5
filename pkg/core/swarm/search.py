"""
Swarm Scaling - Area Search Scenario

N AUVs split a rectangular search area into equal vertical strips and sweep
them with lawnmower paths while being lost to a Poisson attrition process.
Without communication a lost AUV's strip is not reported; with
communication, searched area is shared instantly and survivors re-split
what is left. Paths are preplanned, so runs are event-driven instead of
time-stepped.
"""

import math
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import Field, model_validator

from ..settings import ParamModel
from .attrition import RngStream, derive_seed

logger = structlog.get_logger(__name__)


class SearchParams(ParamModel):
    """
    Full parameter set of one search instance (SI units: m, s).

    The area is a width x height rectangle. When ``area`` is not given, the
    standoff geometry sets it: width is the arc r * theta subtended at the
    standoff distance and height is the depth extent delta.
    """

    n_auv: int = Field(10, ge=1)
    sensor_range: float = Field(10.0, gt=0)  # R_s
    comm_range: float = Field(1.0, gt=0)  # R_c
    area: Optional[float] = Field(None, gt=0)
    aspect: Optional[float] = Field(None, gt=0)  # width / height
    speed: float = Field(1.5, gt=0)  # V
    attrition_rate: Optional[float] = Field(None, ge=0)  # lambda, 1/s
    attrition_per_length: Optional[float] = Field(None, ge=0)  # lambda / V, 1/m
    battery: float = Field(math.inf, gt=0)  # B, seconds of operation
    standoff: float = Field(2000.0, gt=0)  # r
    depth: float = Field(1000.0, gt=0)  # delta
    sector_angle: float = Field(30.0, gt=0, le=360)  # theta, degrees
    comms: bool = True
    attrition_in_transit: bool = False
    ensemble: int = Field(1000, ge=1)
    base_seed: int = 0

    @model_validator(mode="before")
    @classmethod
    def _resolve_geometry(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        speed = float(data.get("speed", 1.5))
        rate, per_length = data.get("attrition_rate"), data.get("attrition_per_length")
        if rate is None and per_length is None:
            per_length = 6e-5
        if rate is None:
            rate = float(per_length) * speed
        elif per_length is None:
            per_length = float(rate) / speed
        elif not math.isclose(float(rate), float(per_length) * speed, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError("attrition_rate and attrition_per_length disagree for this speed")
        data["attrition_rate"], data["attrition_per_length"] = float(rate), float(per_length)

        if data.get("area") is None:
            width = float(data.get("standoff", 2000.0)) * math.radians(float(data.get("sector_angle", 30.0)))
            height = float(data.get("depth", 1000.0))
            data["area"] = width * height
            if data.get("aspect") is None:
                data["aspect"] = width / height
        elif data.get("aspect") is None:
            data["aspect"] = 1.0
        return data

    @property
    def width(self) -> float:
        return math.sqrt(self.area * self.aspect)

    @property
    def height(self) -> float:
        return math.sqrt(self.area / self.aspect)

    @property
    def transit_length(self) -> float:
        """Base to jump point and back"""
        return 2.0 * math.hypot(self.standoff, self.depth)

    @property
    def search_budget(self) -> float:
        """Path length left for searching after the round-trip transit"""
        if math.isinf(self.battery):
            return math.inf
        return max(self.battery * self.speed - self.transit_length, 0.0)


@dataclass
class Strip:
    """One AUV's sub-sector: x0 <= x <= x1, y0 <= y <= y1"""
    index: int
    x0: float
    x1: float
    y0: float
    y1: float
    has_left: bool = False
    has_right: bool = False

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass
class SweepPath:
    """Ordered waypoints of a lawnmower path"""
    waypoints: np.ndarray
    passes: int = 1

    @property
    def length(self) -> float:
        steps = np.diff(self.waypoints, axis=0)
        return float(np.hypot(steps[:, 0], steps[:, 1]).sum())


@dataclass
class SearchOutcome:
    """Result of one search run"""
    coverage: float  # covered-and-reported area / A
    searched_area: float
    reported: bool
    losses: int
    flags: List[str] = field(default_factory=list)


def partition_area(p: SearchParams) -> List[Strip]:
    """Split the search rectangle into N equal-width vertical strips"""
    width, height = p.width, p.height
    edges = np.linspace(0.0, width, p.n_auv + 1)
    return [
        Strip(
            index=i,
            x0=float(edges[i]),
            x1=float(edges[i + 1]),
            y0=0.0,
            y1=height,
            has_left=i > 0,
            has_right=i < p.n_auv - 1,
        )
        for i in range(p.n_auv)
    ]


def lawnmower_path(strip: Strip, sensor_range: float, comm_range: float) -> SweepPath:
    """
    Boustrophedon path over ``strip``.

    Sweep lines are 2 R_s apart and centred in the strip. When the strip
    needs more than one pass, the path jogs out to R_c / 2 from each side
    shared with a neighbour (on the first outermost line reached on that
    side), so neighbouring AUVs come within R_c of each other.
    """
    n = max(1, math.ceil(strip.width / (2.0 * sensor_range) - 1e-12))
    centre = 0.5 * (strip.x0 + strip.x1)
    xs = centre + (np.arange(n) - 0.5 * (n - 1)) * 2.0 * sensor_range

    points: List[List[float]] = []
    for k, x in enumerate(xs):
        start, end = (strip.y0, strip.y1) if k % 2 == 0 else (strip.y1, strip.y0)
        points.append([x, start])
        points.append([x, end])
        if n > 1 and k == 0 and strip.has_left:
            meet = strip.x0 + 0.5 * comm_range
            if meet < x:
                points.extend([[meet, end], [x, end]])
        if n > 1 and k == n - 1 and strip.has_right:
            meet = strip.x1 - 0.5 * comm_range
            if meet > x:
                points.extend([[meet, end], [x, end]])
    return SweepPath(waypoints=np.array(points, dtype=float), passes=n)


def sample_death_distance(rate: float, speed: float, rng: RngStream) -> Optional[float]:
    """
    Distance travelled before loss: exponential with mean V / lambda, or
    None when lambda is zero.
    """
    if rate < 0:
        raise ValueError("attrition rate must be non-negative")
    if rate == 0:
        return None
    return float(rng.exponential(speed / rate))


def _death_distances(p: SearchParams, rng: RngStream, forced: Optional[Sequence[Optional[float]]]) -> np.ndarray:
    if forced is not None:
        if len(forced) != p.n_auv:
            raise ValueError(f"expected {p.n_auv} death distances, got {len(forced)}")
        return np.array([math.inf if d is None else float(d) for d in forced])
    draws = [sample_death_distance(p.attrition_rate, p.speed, rng) for _ in range(p.n_auv)]
    return np.array([math.inf if d is None else d for d in draws])


def _without_comms(p: SearchParams, lengths: np.ndarray, deaths: np.ndarray, outbound: float) -> SearchOutcome:
    searched = np.minimum(lengths, p.search_budget)
    exposure = searched + (2.0 * outbound if p.attrition_in_transit else 0.0)
    survived = deaths > exposure
    fractions = np.where(survived, searched / lengths, 0.0)
    coverage = float(fractions.sum() / p.n_auv)
    return SearchOutcome(
        coverage=coverage,
        searched_area=coverage * p.area,
        reported=bool(survived.any()),
        losses=int((~survived).sum()),
    )


def _with_comms(p: SearchParams, lengths: np.ndarray, deaths: np.ndarray, outbound: float) -> SearchOutcome:
    # area swept per unit distance by one AUV on the planned paths
    rate = p.area / float(lengths.sum())
    remaining = deaths - (outbound if p.attrition_in_transit else 0.0)
    alive = remaining > 0
    unsearched = p.area
    travelled = 0.0
    budget = p.search_budget

    while unsearched > 0 and alive.any() and travelled < budget:
        k = int(alive.sum())
        to_finish = unsearched / (k * rate)
        to_loss = float(remaining[alive].min())
        step = min(to_finish, to_loss, budget - travelled)
        unsearched -= k * rate * step
        travelled += step
        remaining[alive] -= step
        if step == to_finish:
            unsearched = 0.0
        lost = alive & (remaining <= 1e-12 * max(1.0, travelled))
        if step < to_finish and lost.any():
            alive &= ~lost
            logger.debug("search.repartition", survivors=int(alive.sum()), unsearched=unsearched)

    unsearched = max(unsearched, 0.0)
    if p.attrition_in_transit:
        returned = alive & (remaining > outbound)
    else:
        returned = alive
    reported = bool(returned.any())
    searched = p.area - unsearched
    return SearchOutcome(
        coverage=searched / p.area if reported else 0.0,
        searched_area=searched,
        reported=reported,
        losses=int(p.n_auv - returned.sum()),
    )


def run_search(
    p: SearchParams,
    seed: int,
    death_distances: Optional[Sequence[Optional[float]]] = None,
) -> SearchOutcome:
    """
    One search mission.

    Args:
        p: search parameters
        seed: stream seed; one exponential draw per AUV in index order
        death_distances: optional per-AUV loss distance along its mission
            (None entries are immortal); replaces sampling

    Returns:
        SearchOutcome with the covered-and-reported fraction
    """
    strips = partition_area(p)
    paths = [lawnmower_path(s, p.sensor_range, p.comm_range) for s in strips]
    lengths = np.array([path.length for path in paths])
    deaths = _death_distances(p, RngStream(seed=seed), death_distances)
    outbound = 0.5 * p.transit_length

    if p.comms:
        outcome = _with_comms(p, lengths, deaths, outbound)
    else:
        outcome = _without_comms(p, lengths, deaths, outbound)

    if strips[0].width < 2.0 * p.sensor_range:
        outcome.flags.append("single_pass_strip")
    if p.search_budget < lengths.max():
        outcome.flags.append("battery_limited")
    return outcome


def simulate_search(
    p: SearchParams,
    seed: int,
    death_distances: Optional[Sequence[Optional[float]]] = None,
) -> float:
    """Covered-and-reported fraction P_A of one run"""
    return run_search(p, seed, death_distances).coverage


def ensemble_coverage(p: SearchParams) -> float:
    """Mean P_A over ``p.ensemble`` runs seeded from ``p.base_seed``"""
    values = [simulate_search(p, derive_seed(p.base_seed, k)) for k in range(p.ensemble)]
    return float(np.mean(values))
