"""
Swarm Scaling - Curves from Records

Groups run records into performance curves, maps curves into the collapse
coordinates of each scenario and writes plot-ready tables.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go
import structlog

from ..errors import ConfigError, FitError
from .scaling import (
    PerformanceCurve,
    ScalingFit,
    compute_neff_search,
    fit_tanh_threshold,
    predict_na_eff,
    predict_nd_eff,
)

logger = structlog.get_logger(__name__)

PARAM_PREFIX = "param."
# parameters that never distinguish one curve from another
IGNORED = {"ensemble", "base_seed"}
# defaults resolved from other parameters (possibly from x itself)
RESOLVED = {"t_max", "attacker_scatter", "defender_scatter", "defender_spread", "separation", "area", "aspect",
            "attrition_rate", "attrition_per_length"}

DEFAULT_X = {
    "battle": "n_defenders",
    "search": "n_auv",
    "pursuit": "n_attackers",
    "planner": "pursuit.n_attackers",
}


def curves_from_records(
    frame: pd.DataFrame,
    x_param: str,
    metric_name: Optional[str] = None,
) -> List[PerformanceCurve]:
    """
    Ensemble-mean metric against ``x_param``, one curve per combination of
    the remaining parameters. Failed runs are skipped.
    """
    if frame.empty:
        return []
    rows = frame
    if "flags" in rows:
        rows = rows[~rows["flags"].fillna("").astype(str).str.contains("failed")]
    if metric_name is not None:
        rows = rows[rows["metric_name"] == metric_name]
    x_col = PARAM_PREFIX + x_param
    if x_col not in rows:
        raise ConfigError(f"records have no parameter {x_param}", field="x")

    group_cols = [
        c for c in rows.columns
        if c.startswith(PARAM_PREFIX) and c != x_col and c[len(PARAM_PREFIX):] not in IGNORED
    ]
    all_cols = group_cols
    group_cols = _drop_resolved(rows, group_cols, x_col)
    dropped = [c for c in all_cols if c not in group_cols]
    rows = rows.assign(metric_value=pd.to_numeric(rows["metric_value"], errors="coerce"))
    curves = []
    groups = rows.groupby(group_cols, dropna=False, sort=True) if group_cols else [((), rows)]
    for key, block in groups:
        means = block.groupby(x_col)["metric_value"].mean().sort_index()
        if not isinstance(key, tuple):
            key = (key,)
        fixed = {c[len(PARAM_PREFIX):]: v for c, v in zip(group_cols, key)}
        for c in dropped:
            if block[c].nunique(dropna=False) == 1:
                fixed[c[len(PARAM_PREFIX):]] = block[c].iloc[0]
        curves.append(PerformanceCurve(x=means.index.to_numpy(dtype=float), y=means.to_numpy(), fixed=fixed))
    return curves


def _drop_resolved(rows: pd.DataFrame, group_cols: List[str], x_col: str) -> List[str]:
    """Resolved defaults that are fixed by x and the other columns do not split curves"""
    resolved = [c for c in group_cols if c.split(".")[-1] in RESOLVED]
    others = [c for c in group_cols if c not in resolved]
    keep = list(others)
    for col in resolved:
        spread = rows.groupby(others + [x_col], dropna=False)[col].nunique(dropna=False)
        if spread.max() > 1:
            keep.append(col)
    return [c for c in group_cols if c in keep]


def _as_bool(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("true", "1", "yes")
    return bool(value)


def battle_coordinates(curve: PerformanceCurve, n_a_eff: float) -> Tuple[np.ndarray, np.ndarray]:
    """x = N_d / N_a,eff, y = P_a"""
    return curve.x / n_a_eff, curve.y


def search_coordinates(curve: PerformanceCurve) -> Tuple[np.ndarray, np.ndarray]:
    """x = N_eff of the search scenario, y = P_A"""
    f = curve.fixed
    x = np.array([
        compute_neff_search(
            int(n),
            float(f["speed"]),
            float(f["sensor_range"]),
            float(f["attrition_rate"]),
            float(f["area"]),
            _as_bool(f["comms"]),
        )
        for n in curve.x
    ])
    return x, curve.y


def pursuit_nd_eff(fixed: Dict[str, float]) -> float:
    speed_a = float(fixed["attacker_speed"])
    return predict_nd_eff(
        float(fixed["n_defenders"]),
        float(fixed["kill_radius"]),
        float(fixed["unit_length"]),
        float(fixed["defender_speed"]) / speed_a,
        float(fixed["tau"]),
        speed_a,
    )


def pursuit_coordinates(curve: PerformanceCurve) -> Tuple[np.ndarray, np.ndarray]:
    """x = N_a / N_d,eff, y = t_k N_d,eff v / (N_a d)"""
    f = curve.fixed
    nd_eff = pursuit_nd_eff(f)
    v = float(f["defender_speed"]) / float(f["attacker_speed"])
    d = float(f["unit_length"])
    return curve.x / nd_eff, curve.y * nd_eff * v / (curve.x * d)


def collapse_curves(
    curves: Sequence[PerformanceCurve],
    scenario: str,
    fits: Optional[Sequence[ScalingFit]] = None,
    alpha: float = 0.6,
) -> List[PerformanceCurve]:
    """
    Map every curve into its scenario's master-curve coordinates.

    Battle curves use their own tanh fit when ``fits`` is None; curves that
    cannot be fitted fall back to the predicted N_a,eff.
    """
    collapsed = []
    for k, curve in enumerate(curves):
        if scenario == "battle":
            if fits is not None:
                n_eff = fits[k].n_eff
            else:
                try:
                    n_eff = fit_tanh_threshold(curve).n_eff
                except FitError:
                    f = curve.fixed
                    n_eff = predict_na_eff(
                        float(f["n_attackers"]),
                        float(f["attacker_weapon.rate"]),
                        float(f["defender_weapon.rate"]),
                        float(f["attacker_weapon.range"]),
                        float(f["defender_weapon.range"]),
                        alpha,
                    )
            x, y = battle_coordinates(curve, n_eff)
        elif scenario == "search":
            x, y = search_coordinates(curve)
        elif scenario == "pursuit":
            x, y = pursuit_coordinates(curve)
        else:
            raise ValueError(f"no collapse coordinates for scenario {scenario}")
        keep = np.isfinite(x) & np.isfinite(y)
        collapsed.append(PerformanceCurve(x=x[keep], y=y[keep], fixed=dict(curve.fixed)))
    return collapsed


def merge_curves(curves: Sequence[PerformanceCurve]) -> PerformanceCurve:
    """All points of several curves as one curve, averaging repeated x"""
    frame = pd.DataFrame({
        "x": np.concatenate([c.x for c in curves]),
        "y": np.concatenate([c.y for c in curves]),
    })
    merged = frame.groupby("x")["y"].mean().sort_index()
    return PerformanceCurve(x=merged.index.to_numpy(), y=merged.to_numpy())


def curve_label(fixed: Dict[str, object], varying: Sequence[str]) -> str:
    return ", ".join(f"{name}={fixed[name]}" for name in varying if name in fixed) or "all"


def plot_table(curves: Sequence[PerformanceCurve]) -> pd.DataFrame:
    """Long-form x/y table with one row per point and the curve's parameters"""
    if not curves:
        return pd.DataFrame(columns=["curve", "x", "y"])
    varying = sorted(
        name for name in curves[0].fixed
        if len({str(c.fixed.get(name)) for c in curves}) > 1
    )
    frames = []
    for k, curve in enumerate(curves):
        block = pd.DataFrame({"curve": k, "x": curve.x, "y": curve.y})
        block["label"] = curve_label(curve.fixed, varying)
        for name in varying:
            block[name] = curve.fixed.get(name)
        frames.append(block)
    return pd.concat(frames, ignore_index=True)


def write_plot_data(
    table: pd.DataFrame,
    path: Union[str, Path],
    title: str = "",
    log_x: bool = True,
    html: bool = False,
) -> Path:
    """Write the table as CSV and, when asked, an interactive plotly figure beside it"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    if html and not table.empty:
        fig = go.Figure()
        for label, block in table.groupby("label", sort=False):
            fig.add_trace(go.Scatter(x=block["x"], y=block["y"], mode="lines+markers", name=str(label)))
        fig.update_layout(title=title)
        if log_x:
            fig.update_xaxes(type="log")
        fig.write_html(str(path.with_suffix(".html")))
    logger.info("curves.plot_data_written", path=str(path), rows=len(table))
    return path

