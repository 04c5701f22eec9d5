"""
Swarm Scaling - Scaling Analysis

Dimensional analysis and the fitting pipeline that turns families of
performance curves into effective swarm sizes: pi-group counting, the tanh
threshold fit, power-law regression, the two-segment log-log breakpoint fit,
effective-size predictors and a collapse-quality score.
"""

import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
import sympy
from scipy import stats
from scipy.optimize import minimize_scalar

from ..errors import CollapseError, FitError

logger = structlog.get_logger(__name__)

# flattened parameter names used to read battle fits back out of records
BATTLE_KEYS = {
    "n_a": "n_attackers",
    "rate_a": "attacker_weapon.rate",
    "rate_d": "defender_weapon.rate",
    "range_a": "attacker_weapon.range",
    "range_d": "defender_weapon.range",
    "dr": "force_law.dr",
}


# ---------------------------------------------------------------------------
# Dimensional analysis
# ---------------------------------------------------------------------------

@dataclass
class DimensionedParam:
    """A named quantity with exponents over (mass, length, time)"""
    name: str
    value: float
    dims: Tuple[Fraction, Fraction, Fraction] = (Fraction(0), Fraction(0), Fraction(0))

    def __post_init__(self):
        if len(self.dims) != 3:
            raise ValueError(f"{self.name}: dims must have three exponents (M, L, T)")
        self.dims = tuple(Fraction(d) for d in self.dims)

    @property
    def dimensionless(self) -> bool:
        return all(d == 0 for d in self.dims)


def dimension_matrix(params: Sequence[DimensionedParam]) -> sympy.Matrix:
    return sympy.Matrix(
        [[sympy.Rational(d.numerator, d.denominator) for d in p.dims] for p in params]
    )


def count_pi_groups(params: Sequence[DimensionedParam]) -> int:
    """k = n - rank of the dimension matrix, rank computed exactly"""
    if not params:
        raise ValueError("at least one parameter is required")
    return len(params) - int(dimension_matrix(params).rank())


# ---------------------------------------------------------------------------
# Curves and fit results
# ---------------------------------------------------------------------------

@dataclass
class PerformanceCurve:
    """Metric y against a swept count x with every other parameter fixed"""
    x: np.ndarray
    y: np.ndarray
    fixed: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if len(self.x) > 1 and not np.all(np.diff(self.x) > 0):
            raise ValueError("x must be strictly increasing")

    def __len__(self) -> int:
        return len(self.x)


@dataclass
class ScalingFit:
    """Outcome of one scaling fit"""
    fit_type: str
    n_eff: float
    parameters: Dict[str, float]
    residual_norm: float
    r_squared: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    fixed: Dict[str, Any] = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PowerLawFit:
    """y = amplitude * x ** exponent with regression standard errors"""
    amplitude: float
    exponent: float
    amplitude_stderr: float
    exponent_stderr: float
    r_squared: float

    def __call__(self, x):
        return self.amplitude * np.power(x, self.exponent)


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def tanh_threshold(x, n_eff: float):
    """P = 1/2 [1 - tanh(ln(x / n_eff))]"""
    return 0.5 * (1.0 - np.tanh(np.log(np.asarray(x, dtype=float) / n_eff)))


def fit_tanh_threshold(curve: PerformanceCurve) -> ScalingFit:
    """
    Least-squares fit of the tanh threshold in ln x.

    The curve must cross the threshold: some y above 0.8 and some below 0.2.
    """
    if len(curve) < 4:
        raise FitError("tanh fit needs at least 4 points")
    x, y = curve.x, curve.y
    if np.any(x <= 0):
        raise FitError("tanh fit needs positive x")
    if np.any((y < 0) | (y > 1)):
        raise FitError("tanh fit needs y within [0, 1]")
    if not (y.max() > 0.8 and y.min() < 0.2):
        raise FitError("threshold not bracketed")

    log_x = np.log(x)

    def sse(log_n: float) -> float:
        return float(np.sum((y - 0.5 * (1.0 - np.tanh(log_x - log_n))) ** 2))

    lo, hi = log_x[0] - 3.0, log_x[-1] + 3.0
    grid = np.linspace(lo, hi, 601)
    best = grid[int(np.argmin([sse(s) for s in grid]))]
    step = grid[1] - grid[0]
    result = minimize_scalar(
        sse,
        bounds=(max(lo, best - 2 * step), min(hi, best + 2 * step)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    n_eff = float(np.exp(result.x))
    fitted = tanh_threshold(x, n_eff)
    return ScalingFit(
        fit_type="tanh_threshold",
        n_eff=n_eff,
        parameters={"log_n_eff": float(result.x)},
        residual_norm=float(np.linalg.norm(y - fitted)),
        r_squared=_r_squared(y, fitted),
        diagnostics={"points": len(curve), "converged": bool(result.success)},
        fixed=dict(curve.fixed),
    )


def fit_powerlaw(x: Sequence[float], y: Sequence[float]) -> PowerLawFit:
    """Linear least squares on (ln x, ln y)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise FitError("x and y differ in length")
    if len(x) < 3:
        raise FitError("power-law fit needs at least 3 points (insufficient points)")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs strictly positive data")
    if np.ptp(np.log(x)) == 0:
        raise FitError("power-law fit needs at least two distinct x values")

    log_x, log_y = np.log(x), np.log(y)
    reg = stats.linregress(log_x, log_y)
    amplitude = float(np.exp(reg.intercept))
    fitted = reg.intercept + reg.slope * log_x
    return PowerLawFit(
        amplitude=amplitude,
        exponent=float(reg.slope),
        amplitude_stderr=float(amplitude * reg.intercept_stderr),
        exponent_stderr=float(reg.stderr),
        r_squared=_r_squared(log_y, fitted),
    )


def _hinge_fit(u: np.ndarray, v: np.ndarray, knee: float) -> Tuple[np.ndarray, float]:
    design = np.column_stack((np.ones_like(u), u, np.maximum(u - knee, 0.0)))
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    residual = v - design @ coef
    return coef, float(residual @ residual)


def fit_breakpoint(curve: PerformanceCurve, min_slope_change: float = 0.15) -> ScalingFit:
    """
    Continuous two-segment fit of ln y against ln x.

    The knee is searched between the second and the second-to-last point;
    N_eff is the x where the segments meet. A knee on the first or last
    admissible interval is reported with ``knee_at_edge`` set.

    Raises:
        FitError: fewer than 6 points, non-positive data, or slopes closer
            than ``min_slope_change`` ("no breakpoint detected")
    """
    if len(curve) < 6:
        raise FitError("breakpoint fit needs at least 6 points")
    if np.any(curve.x <= 0) or np.any(curve.y <= 0):
        raise FitError("breakpoint fit needs strictly positive data")

    u, v = np.log(curve.x), np.log(curve.y)
    lo, hi = u[1], u[-2]
    grid = np.linspace(lo, hi, 401)
    errors = [_hinge_fit(u, v, c)[1] for c in grid]
    best = grid[int(np.argmin(errors))]
    step = grid[1] - grid[0]
    result = minimize_scalar(
        lambda c: _hinge_fit(u, v, c)[1],
        bounds=(max(lo, best - step), min(hi, best + step)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    knee = float(result.x)
    coef, sse = _hinge_fit(u, v, knee)
    slope_before, slope_after = float(coef[1]), float(coef[1] + coef[2])

    if abs(slope_after - slope_before) < min_slope_change:
        raise FitError("no breakpoint detected")

    at_edge = bool(knee <= u[2] or knee >= u[-3])
    if at_edge:
        logger.warning("scaling.breakpoint_at_edge", knee=float(np.exp(knee)), fixed=curve.fixed)

    fitted = coef[0] + coef[1] * u + coef[2] * np.maximum(u - knee, 0.0)
    return ScalingFit(
        fit_type="breakpoint",
        n_eff=float(np.exp(knee)),
        parameters={
            "slope_before": slope_before,
            "slope_after": slope_after,
            "intercept": float(coef[0]),
        },
        residual_norm=math.sqrt(sse),
        r_squared=_r_squared(v, fitted),
        diagnostics={"points": len(curve), "knee_at_edge": at_edge},
        fixed=dict(curve.fixed),
    )


# ---------------------------------------------------------------------------
# Effective-size laws
# ---------------------------------------------------------------------------

@dataclass
class AmplitudeLaw:
    """A(R_d / R_a) = prefactor * exp(rate * R_d / R_a)"""
    prefactor: float = 5.0
    rate: float = -1.8

    def __call__(self, ratio):
        return self.prefactor * np.exp(self.rate * np.asarray(ratio, dtype=float))

    @property
    def decaying(self) -> bool:
        """Amplitude falls as defender range grows against attacker range"""
        return self.rate < 0


Amplitude = Union[float, AmplitudeLaw, Callable[[float], float]]


def predict_na_eff(
    n_attackers: float,
    rate_a: float,
    rate_d: float,
    range_a: float,
    range_d: float,
    alpha: float = 0.6,
    amplitude: Optional[Amplitude] = None,
) -> float:
    """N_a,eff = N_a (lambda_a / lambda_d)^alpha A(R_d / R_a)"""
    if rate_a <= 0 or rate_d <= 0:
        raise ValueError("rates of fire must be positive")
    if amplitude is None:
        amplitude = AmplitudeLaw()
    factor = float(amplitude(range_d / range_a)) if callable(amplitude) else float(amplitude)
    return float(n_attackers * (rate_a / rate_d) ** alpha * factor)


def minimum_defenders(n_a_eff: float) -> float:
    """Defenders needed for mission success, N_d ~ 2 N_a,eff"""
    return 2.0 * n_a_eff


@dataclass
class DefenderOption:
    """A defending platform under consideration"""
    name: str
    rate: float
    range: float
    unit_cost: float = 1.0


def compare_defender_options(
    n_attackers: float,
    rate_a: float,
    range_a: float,
    options: Sequence[DefenderOption],
    alpha: float = 0.6,
    amplitude: Optional[Amplitude] = None,
) -> List[Dict[str, Any]]:
    """Required defenders and total cost per option, cheapest first"""
    rows = []
    for option in options:
        n_eff = predict_na_eff(n_attackers, rate_a, option.rate, range_a, option.range, alpha, amplitude)
        required = minimum_defenders(n_eff)
        rows.append({
            "option": option.name,
            "n_a_eff": n_eff,
            "defenders_required": required,
            "total_cost": required * option.unit_cost,
        })
    return sorted(rows, key=lambda row: row["total_cost"])


def predict_nd_eff(
    n_defenders: float,
    kill_radius: float,
    unit_length: float,
    velocity_ratio: float,
    tau: float,
    attacker_speed: float,
) -> float:
    """N_d,eff = N_d^(3/2) (R/d) exp(4v/5) exp(tau V_a / 8d)"""
    return float(
        n_defenders**1.5
        * (kill_radius / unit_length)
        * math.exp(0.8 * velocity_ratio)
        * math.exp(tau * attacker_speed / (8.0 * unit_length))
    )


def compute_neff_search(
    n_auv: int,
    speed: float,
    sensor_range: float,
    attrition_rate: float,
    area: float,
    comms: bool,
) -> float:
    """(V R_s / lambda A)(N - 1) with communication, (V R_s / lambda A) N without"""
    if area <= 0:
        raise ValueError("area must be positive")
    if attrition_rate < 0:
        raise ValueError("attrition rate must be non-negative")
    count = n_auv - 1 if comms else n_auv
    if attrition_rate == 0:
        return math.inf if count > 0 else 0.0
    return speed * sensor_range / (attrition_rate * area) * count


def battery_coverage_ratio(battery: float, speed: float, sensor_range: float, n_auv: int, area: float) -> float:
    """2 B V R_s N / A: area the swarm can sweep on one charge over the area to search"""
    return 2.0 * battery * speed * sensor_range * n_auv / area


def search_pi_groups(p) -> Dict[str, float]:
    """Dimensionless inputs of a SearchParams instance"""
    return {
        "n_auv": float(p.n_auv),
        "comm_over_sensor": p.comm_range / p.sensor_range,
        "area_over_sensor_sq": p.area / p.sensor_range**2,
        "speed_over_attrition": (
            math.inf if p.attrition_rate == 0 else p.speed / (p.attrition_rate * p.sensor_range)
        ),
    }


def master_curve(u, alpha: float = 0.75, beta: float = 0.0):
    """f(u) = u^-alpha below u = 1 and u^-beta above"""
    u = np.asarray(u, dtype=float)
    return np.where(u < 1.0, u ** (-alpha), u ** (-beta))


def fit_master_curve(curve: PerformanceCurve) -> Dict[str, float]:
    """alpha, beta and knee of collapsed pursuit data via the breakpoint fit"""
    fit = fit_breakpoint(curve)
    return {
        "alpha": -fit.parameters["slope_before"],
        "beta": -fit.parameters["slope_after"],
        "knee": fit.n_eff,
    }


# ---------------------------------------------------------------------------
# Battle amplitude analysis
# ---------------------------------------------------------------------------

def _fixed(fit: ScalingFit, key: str, default: Optional[float] = None) -> float:
    name = BATTLE_KEYS[key]
    if name in fit.fixed:
        return float(fit.fixed[name])
    if default is not None:
        return default
    raise FitError(f"fit is missing fixed parameter {name}")


def fit_na_eff_exponent(fits: Sequence[ScalingFit]) -> PowerLawFit:
    """
    alpha in N_a,eff / N_a ~ (lambda_a / lambda_d)^alpha, pooled over range pairs.

    Each (N_a, R_a, R_d) group gets its own amplitude; the slope is shared.
    """
    rows = pd.DataFrame([
        {
            "group": (_fixed(f, "n_a"), _fixed(f, "range_a"), _fixed(f, "range_d")),
            "log_ratio": math.log(_fixed(f, "rate_a") / _fixed(f, "rate_d")),
            "log_size": math.log(f.n_eff / _fixed(f, "n_a")),
        }
        for f in fits
    ])
    if len(rows) < 3:
        raise FitError("exponent fit needs at least 3 threshold fits (insufficient points)")
    centred = rows.groupby("group")[["log_ratio", "log_size"]].transform(lambda c: c - c.mean())
    sxx = float((centred["log_ratio"] ** 2).sum())
    if sxx == 0:
        raise FitError("rate ratio does not vary within any range group")
    slope = float((centred["log_ratio"] * centred["log_size"]).sum() / sxx)
    residual = centred["log_size"] - slope * centred["log_ratio"]
    dof = max(len(rows) - rows["group"].nunique() - 1, 1)
    stderr = math.sqrt(float((residual**2).sum()) / dof / sxx)
    ss_tot = float((centred["log_size"] ** 2).sum())
    r2 = 1.0 - float((residual**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    intercept = float((rows["log_size"] - slope * rows["log_ratio"]).mean())
    return PowerLawFit(
        amplitude=math.exp(intercept),
        exponent=slope,
        amplitude_stderr=float("nan"),
        exponent_stderr=stderr,
        r_squared=r2,
    )


def amplitude_table(fits: Sequence[ScalingFit], alpha: float = 0.6, avoidance_radius: float = 6.0) -> pd.DataFrame:
    """
    Mean of (N_a,eff / N_a)(lambda_a / lambda_d)^-alpha per (R_a, R_d),
    with the ratios R_d / R_a and R_d / d_r alongside.
    """
    records = []
    for f in fits:
        range_a, range_d = _fixed(f, "range_a"), _fixed(f, "range_d")
        ratio = _fixed(f, "rate_a") / _fixed(f, "rate_d")
        records.append({
            "range_a": range_a,
            "range_d": range_d,
            "amplitude": f.n_eff / _fixed(f, "n_a") * ratio ** (-alpha),
            "dr": _fixed(f, "dr", avoidance_radius),
        })
    if not records:
        raise FitError("no fits supplied")
    frame = pd.DataFrame(records)
    table = (
        frame.groupby(["range_a", "range_d"], as_index=False)
        .agg(amplitude=("amplitude", "mean"), count=("amplitude", "size"), dr=("dr", "first"))
    )
    table["ratio"] = table["range_d"] / table["range_a"]
    table["ratio_dr"] = table["range_d"] / table["dr"]
    return table.drop(columns="dr").sort_values(["range_a", "range_d"]).reset_index(drop=True)


def fit_amplitude_law(table: pd.DataFrame, min_ratio: float = 0.6) -> AmplitudeLaw:
    """Fit A = c exp(k R_d / R_a) over rows with R_d / R_a above ``min_ratio``"""
    rows = table[table["ratio"] > min_ratio]
    if len(rows) < 3 or rows["ratio"].nunique() < 2:
        raise FitError("amplitude fit needs at least 3 rows above the ratio cut (insufficient points)")
    if (rows["amplitude"] <= 0).any():
        raise FitError("amplitude fit needs strictly positive amplitudes")
    reg = stats.linregress(rows["ratio"].to_numpy(), np.log(rows["amplitude"].to_numpy()))
    law = AmplitudeLaw(prefactor=float(np.exp(reg.intercept)), rate=float(reg.slope))
    logger.info("scaling.amplitude_law", prefactor=law.prefactor, rate=law.rate, rows=len(rows))
    if not law.decaying:
        logger.warning("scaling.amplitude_law.not_decaying", rate=law.rate, rows=len(rows))
    return law


# ---------------------------------------------------------------------------
# Collapse quality
# ---------------------------------------------------------------------------

Rescaling = Callable[[PerformanceCurve], Tuple[np.ndarray, np.ndarray]]


def collapse_score(
    curves: Sequence[PerformanceCurve],
    rescaling: Optional[Rescaling] = None,
    scale: str = "log",
    statistic: str = "median",
    n_bins: int = 20,
) -> float:
    """
    Spread of rescaled curves around each other; 0 for a perfect collapse.

    Every curve is interpolated (in ln x) at the centres of ``n_bins`` bins
    spanning all rescaled x. In each bin covered by at least two curves the
    spread is max - min of the interpolated values, taken in ln y when
    ``scale`` is "log" and in y when it is "linear". The score is the median
    (or max) of those spreads.

    Raises:
        CollapseError: no bin is covered by two or more curves
    """
    if len(curves) < 2:
        raise ValueError("collapse score needs at least 2 curves")
    if scale not in ("log", "linear"):
        raise ValueError("scale must be 'log' or 'linear'")
    reducer = {"median": np.median, "max": np.max}.get(statistic)
    if reducer is None:
        raise ValueError("statistic must be 'median' or 'max'")

    transformed = []
    for curve in curves:
        x, y = rescaling(curve) if rescaling else (curve.x, curve.y)
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        keep = (x > 0) & np.isfinite(x) & np.isfinite(y)
        if scale == "log":
            keep &= y > 0
        x, y = x[keep], y[keep]
        if len(x) < 2:
            continue
        order = np.argsort(x)
        lx = np.log(x[order])
        ly = np.log(y[order]) if scale == "log" else y[order]
        transformed.append((lx, ly))

    if len(transformed) < 2:
        raise CollapseError("fewer than two curves have usable support after rescaling")

    lo = min(t[0][0] for t in transformed)
    hi = max(t[0][-1] for t in transformed)
    if hi <= lo:
        raise CollapseError("rescaled curves have no extent")
    edges = np.linspace(lo, hi, n_bins + 1)
    centres = 0.5 * (edges[:-1] + edges[1:])

    spreads = []
    for c in centres:
        values = [np.interp(c, lx, ly) for lx, ly in transformed if lx[0] <= c <= lx[-1]]
        if len(values) >= 2:
            spreads.append(max(values) - min(values))
    if not spreads:
        raise CollapseError("no overlapping support after rescaling")
    return float(reducer(spreads))
