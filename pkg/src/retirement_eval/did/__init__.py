"""Difference-in-differences pipeline: estimators, adjustments and robustness checks."""

from .adjust import (
    DetrendResult,
    FirstStageWarning,
    StudentAdjustResult,
    detrend_pre,
    implied_hire_growth,
    student_adjust,
)
from .bootstrap import BootstrapResult, wild_cluster_bootstrap
from .design import DesignSpec, OutcomePanel, as_outcome_panel
from .estimators import EventStudySeries, TwoWayFEFit, did_of_means, event_study, fit_twfe_did
from .ols import OLSResult, ols
from .synth import SyntheticControlResult, project_simplex, simplex_least_squares, synthetic_control

__all__ = [
    "BootstrapResult",
    "DesignSpec",
    "DetrendResult",
    "EventStudySeries",
    "FirstStageWarning",
    "OLSResult",
    "OutcomePanel",
    "StudentAdjustResult",
    "SyntheticControlResult",
    "TwoWayFEFit",
    "as_outcome_panel",
    "detrend_pre",
    "did_of_means",
    "event_study",
    "fit_twfe_did",
    "implied_hire_growth",
    "ols",
    "project_simplex",
    "simplex_least_squares",
    "student_adjust",
    "synthetic_control",
    "wild_cluster_bootstrap",
]
