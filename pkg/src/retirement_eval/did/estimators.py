"""Two-way fixed-effects DiD, the difference of means, and the event study.

All three use a single treated unit against the remaining units in a reversal
design: the controls changed policy while the treated unit kept it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, TextIO, Tuple

import numpy as np
from scipy import stats

from ..errors import DegenerateDesign, MissingBaseYear, RankDeficient
from .design import DesignSpec, PanelLike, as_outcome_panel, resolve_design, resolve_fit_design
from .ols import SE_KINDS, OLSResult, ols


def fe_design(n_units: int, n_years: int) -> Tuple[np.ndarray, List[str]]:
    """Intercept plus unit and year dummies (first of each dropped), unit-major rows."""
    unit = np.repeat(np.arange(n_units), n_years)
    year = np.tile(np.arange(n_years), n_units)
    cols = [np.ones(n_units * n_years)]
    names = ["const"]
    for i in range(1, n_units):
        cols.append((unit == i).astype(float))
        names.append(f"unit[{i}]")
    for t in range(1, n_years):
        cols.append((year == t).astype(float))
        names.append(f"year[{t}]")
    return np.column_stack(cols), names


def two_way_demean(m: np.ndarray) -> np.ndarray:
    """Residual of a balanced units x years matrix on unit and year effects."""
    return m - m.mean(axis=1, keepdims=True) - m.mean(axis=0, keepdims=True) + m.mean()


def _ratio(estimate: float, se: float) -> float:
    # an exact fit has zero standard error; report an infinite (or undefined) t
    if se > 0:
        return estimate / se
    return math.copysign(math.inf, estimate) if estimate != 0 else math.nan


@dataclass
class TwoWayFEFit:
    delta: float
    unit_effects: Dict[str, float]
    time_effects: Dict[int, float]
    residuals: np.ndarray
    se_delta: float
    se_kind: str
    years: np.ndarray
    units: Tuple[str, ...]
    se_all: Dict[str, float] = field(default_factory=dict)
    n_obs: int = 0
    outcome: str = "job_creation_rate"

    @property
    def t_stat(self) -> float:
        return _ratio(self.delta, self.se_delta)

    @property
    def p_value(self) -> float:
        """Two-sided normal p-value for the chosen standard error."""
        return float(2 * stats.norm.sf(abs(self.t_stat)))

    def p_value_for(self, kind: str) -> float:
        return float(2 * stats.norm.sf(abs(_ratio(self.delta, self.se_all[kind]))))


def fit_twfe_did(data: PanelLike, spec: DesignSpec, se_kind: str = "cluster_by_unit") -> TwoWayFEFit:
    """Fit ``y_it = a_i + g_t + delta * D_it + e_it`` by dummy-variable OLS.

    ``D_it`` is one for the treated unit in post-window years. Years outside
    both windows are dropped. Unit effects are reported as levels
    (intercept plus dummy) and year effects relative to the first sample year.
    """
    if se_kind not in SE_KINDS:
        raise DegenerateDesign(f"unknown se_kind {se_kind!r}")
    panel = as_outcome_panel(data, spec)
    design = resolve_fit_design(panel, spec)
    keep = design.sample
    Y = panel.values[:, keep]
    years = panel.years[keep]
    n_units, n_years = Y.shape
    D = np.zeros_like(Y)
    D[design.treated, design.post[keep]] = 1.0
    if np.ptp(two_way_demean(D)) == 0.0:
        raise DegenerateDesign("treatment dummy has no variation net of the fixed effects")

    X, names = fe_design(n_units, n_years)
    X = np.column_stack([X, D.ravel()])
    names.append("delta")
    try:
        res = ols(X, Y.ravel(), names)
    except RankDeficient as exc:
        if "delta" in exc.columns:
            raise DegenerateDesign("treatment dummy is collinear with the fixed effects") from None
        raise
    clusters = np.repeat(np.arange(n_units), n_years)
    se_all = {kind: float(res.se(kind, clusters)[-1]) for kind in SE_KINDS}
    const = res.coef[0]
    unit_effects = {panel.units[0]: float(const)}
    for i in range(1, n_units):
        unit_effects[panel.units[i]] = float(const + res.coef[i])
    time_effects = {int(years[0]): 0.0}
    for t in range(1, n_years):
        time_effects[int(years[t])] = float(res.coef[n_units - 1 + t])
    return TwoWayFEFit(
        delta=float(res.coef[-1]),
        unit_effects=unit_effects,
        time_effects=time_effects,
        residuals=res.resid.reshape(n_units, n_years),
        se_delta=se_all[se_kind],
        se_kind=se_kind,
        years=years,
        units=panel.units,
        se_all=se_all,
        n_obs=res.n,
        outcome=panel.label,
    )


def did_of_means(data: PanelLike, spec: DesignSpec) -> float:
    """(treated post mean - treated pre mean) - (control post - control pre).

    Control means average each unit over time first, then across units.
    """
    panel = as_outcome_panel(data, spec)
    d = resolve_design(panel, spec)
    Y = panel.values
    treated = Y[d.treated, d.post].mean() - Y[d.treated, d.pre].mean()
    ctrl = Y[d.controls]
    control = ctrl[:, d.post].mean(axis=1).mean() - ctrl[:, d.pre].mean(axis=1).mean()
    return float(treated - control)


EVENT_MODES = ("base_year", "pre_mean")


@dataclass
class EventStudySeries:
    years: np.ndarray
    estimates: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    base_year: int
    mode: str
    se_kind: str
    level: float
    notes: List[str] = field(default_factory=list)

    def as_dict(self) -> Dict[int, float]:
        return {int(y): float(v) for y, v in zip(self.years, self.estimates)}

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["year", "estimate", "se", "lower", "upper"])
        for row in zip(self.years, self.estimates, self.se, self.lower, self.upper):
            w.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def event_study(data: PanelLike, spec: DesignSpec, mode: str = "base_year",
                se_kind: str = "cluster_by_unit", level: float = 0.95) -> EventStudySeries:
    """Per-year treated-minus-control contrasts.

    ``mode="base_year"`` pivots on ``spec.base_year``:
    ``(T_t - T_base) - (C_t - C_base)``, with ``C`` the control average; the
    base entry is exactly zero. ``mode="pre_mean"`` pivots on the pre-window
    averages instead.

    Estimates come from the saturated regression with one treated-by-year
    dummy per non-base year, so every treated cell is fitted exactly and the
    intervals reflect control-unit noise only.
    """
    if mode not in EVENT_MODES:
        raise DegenerateDesign(f"unknown event-study mode {mode!r}; expected one of {EVENT_MODES}")
    panel = as_outcome_panel(data, spec)
    design = resolve_fit_design(panel, spec)
    keep = design.sample
    years = panel.years[keep]
    if spec.base_year not in set(int(y) for y in years):
        raise MissingBaseYear(f"base year {spec.base_year} not among sample years {years.min()}-{years.max()}")
    Y = panel.values[:, keep]
    n_units, n_years = Y.shape
    b = int(np.nonzero(years == spec.base_year)[0][0])

    X, names = fe_design(n_units, n_years)
    event_cols = [t for t in range(n_years) if t != b]
    extra = np.zeros((n_units * n_years, len(event_cols)))
    for j, t in enumerate(event_cols):
        extra[design.treated * n_years + t, j] = 1.0
    X = np.column_stack([X, extra])
    res = ols(X, Y.ravel(), names + [f"event[{int(years[t])}]" for t in event_cols])
    clusters = np.repeat(np.arange(n_units), n_years)
    k0 = X.shape[1] - len(event_cols)
    V_sub = res.cov(se_kind, clusters)[k0:, k0:]

    # embed the base year with zero estimate and zero variance
    est = np.zeros(n_years)
    V = np.zeros((n_years, n_years))
    idx = np.array(event_cols)
    est[idx] = res.coef[k0:]
    V[np.ix_(idx, idx)] = V_sub
    if mode == "pre_mean":
        pre = design.pre[keep]
        A = np.eye(n_years) - np.outer(np.ones(n_years), pre / pre.sum())
        est = A @ est
        V = A @ V @ A.T
    se = np.sqrt(np.clip(np.diag(V), 0.0, None))
    z = stats.norm.ppf(0.5 + level / 2)
    notes = ["each treated cell is a single observation; interval widths rest on control-unit residuals "
             "and are unreliable"]
    return EventStudySeries(years, est, se, est - z * se, est + z * se, spec.base_year, mode, se_kind, level, notes)
