"""Pre-trend adjustments applied before the DiD regression.

Both adjustments fit a first-stage regression on pre-policy data and pass the
residualized outcome on as if it were data. The first-stage uncertainty is
not carried into later standard errors; results say so in ``notes``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np

from ..errors import InsufficientPrePeriod, NonpositiveStudentFTE
from .design import DesignSpec, OutcomePanel, PanelLike, as_outcome_panel, resolve_design
from .ols import ols

MIN_PRE_YEARS = 3


class FirstStageWarning(UserWarning):
    """A generated regressor whose sampling error is ignored downstream."""


@dataclass
class DetrendResult:
    panel: OutcomePanel
    intercepts: Dict[str, float]
    slopes: Dict[str, float]
    n_pre: int
    se_propagated: bool = False
    notes: List[str] = field(default_factory=list)


def detrend_pre(data: PanelLike, spec: DesignSpec) -> DetrendResult:
    """Remove a unit-specific linear trend fitted on pre-policy years only.

    For each unit, ``y_it = a_i + b_i * t`` is fitted on the pre window and
    the residual ``y_it - a_i - b_i * t`` is taken for every year, so the
    post period is compared with an extrapolated trend.
    """
    panel = as_outcome_panel(data, spec)
    d = resolve_design(panel, spec)
    n_pre = int(d.pre.sum())
    if n_pre < MIN_PRE_YEARS:
        raise InsufficientPrePeriod(f"{n_pre} pre-policy years; a linear trend needs at least {MIN_PRE_YEARS}")
    t_all = panel.years.astype(float)
    X_pre = np.column_stack([np.ones(n_pre), t_all[d.pre]])
    out = np.empty_like(panel.values)
    intercepts, slopes = {}, {}
    for i, unit in enumerate(panel.units):
        res = ols(X_pre, panel.values[i, d.pre], ["const", "trend"])
        a, b = res.coef
        intercepts[unit], slopes[unit] = float(a), float(b)
        out[i] = panel.values[i] - a - b * t_all
    note = (f"unit trends fitted on {n_pre} pre-policy years and extrapolated over "
            f"{int(d.post.sum())} post years; first-stage variance not propagated into standard errors")
    warnings.warn(note, FirstStageWarning, stacklevel=2)
    return DetrendResult(panel.with_values(out, f"{panel.label}|detrended", note), intercepts, slopes, n_pre,
                         notes=[note])


@dataclass
class StudentAdjustResult:
    panel: OutcomePanel
    beta: Union[float, Dict[str, float]]
    intercept: Union[float, Dict[str, float]]
    per_unit: bool
    se_propagated: bool = False
    notes: List[str] = field(default_factory=list)


def student_adjust(data: PanelLike, spec: DesignSpec, per_unit: bool = False) -> StudentAdjustResult:
    """Net out log student FTE with a slope fitted on pre-policy cells.

    The pooled mode fits one ``y = alpha + beta * log S`` across all units;
    ``per_unit=True`` fits a separate slope for each unit. The adjusted
    outcome is ``y - beta * log S`` for every cell.
    """
    panel = as_outcome_panel(data, spec)
    d = resolve_design(panel, spec)
    S = panel.student_fte
    if S is None or np.any(~(S > 0)):
        raise NonpositiveStudentFTE("student FTE must be positive in every cell")
    s = np.log(S)
    if per_unit:
        betas, alphas = {}, {}
        out = np.empty_like(panel.values)
        for i, unit in enumerate(panel.units):
            X = np.column_stack([np.ones(d.pre.sum()), s[i, d.pre]])
            res = ols(X, panel.values[i, d.pre], ["const", f"log_student_fte[{unit}]"])
            alphas[unit], betas[unit] = float(res.coef[0]), float(res.coef[1])
            out[i] = panel.values[i] - res.coef[1] * s[i]
        beta, alpha = betas, alphas
    else:
        y = panel.values[:, d.pre].ravel()
        x = s[:, d.pre].ravel()
        res = ols(np.column_stack([np.ones_like(x), x]), y, ["const", "log_student_fte"])
        alpha, beta = float(res.coef[0]), float(res.coef[1])
        out = panel.values - beta * s
    note = "student-number slope estimated on pre-policy cells; first-stage variance not propagated"
    warnings.warn(note, FirstStageWarning, stacklevel=2)
    return StudentAdjustResult(panel.with_values(out, f"{panel.label}|student_adjusted", note), beta, alpha,
                               per_unit, notes=[note])


def implied_hire_growth(student_series: Union[Sequence[float], Mapping[int, float]]) -> np.ndarray:
    """Hire growth implied by a constant staff-student ratio: first differences of log S."""
    values = list(student_series.values()) if isinstance(student_series, Mapping) else list(student_series)
    S = np.asarray(values, dtype=float)
    if S.ndim != 1 or S.size < 2:
        raise NonpositiveStudentFTE("need at least two years of student numbers")
    if np.any(~(S > 0)):
        raise NonpositiveStudentFTE("student numbers must be positive")
    return np.diff(np.log(S))
