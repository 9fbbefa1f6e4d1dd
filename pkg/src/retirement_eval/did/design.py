"""Design specification and the balanced outcome matrix the estimators work on."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import DataError, DegenerateDesign, EmptySelection
from ..panel import PanelDataset

OUTCOMES = ("job_creation_rate", "new_appointments", "headcount", "student_fte")


@dataclass(frozen=True)
class DesignSpec:
    """Which unit is treated and how years split into pre and post periods.

    Windows are inclusive (first, last) start-year ranges. By default the pre
    window is every year before ``policy_year`` and the post window every
    year from it on.
    """

    treated_unit: str
    policy_year: int = 2012
    base_year: int = 2012
    pre_window: Optional[Tuple[int, int]] = None
    post_window: Optional[Tuple[int, int]] = None
    outcome: str = "job_creation_rate"
    group: Optional[str] = None

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise DataError(f"unknown outcome {self.outcome!r}; expected one of {OUTCOMES}")
        for name in ("pre_window", "post_window"):
            w = getattr(self, name)
            if w is not None:
                if len(w) != 2 or w[0] > w[1]:
                    raise DataError(f"{name} must be (first, last) with first <= last, got {w}")
                object.__setattr__(self, name, (int(w[0]), int(w[1])))
        if self.pre_window is not None and self.pre_window[1] >= self.policy_year:
            raise DataError(f"pre window {self.pre_window} must end before policy year {self.policy_year}")
        if self.post_window is not None and self.post_window[0] < self.policy_year:
            raise DataError(f"post window {self.post_window} must start at or after policy year {self.policy_year}")


@dataclass(frozen=True)
class OutcomePanel:
    """Units x years outcome matrix plus the student series used by adjustments."""

    units: Tuple[str, ...]
    years: np.ndarray
    values: np.ndarray
    student_fte: Optional[np.ndarray] = None
    label: str = "job_creation_rate"
    notes: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        years = np.asarray(self.years, dtype=int)
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.units), len(years)):
            raise DataError(f"values shape {values.shape} does not match {len(self.units)} units x {len(years)} years")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)
        if self.student_fte is not None:
            s = np.asarray(self.student_fte, dtype=float)
            if s.shape != values.shape:
                raise DataError("student_fte shape does not match values")
            object.__setattr__(self, "student_fte", s)

    @classmethod
    def from_dataset(cls, data: PanelDataset, spec: DesignSpec) -> "OutcomePanel":
        g = data.resolve_group(spec.group)
        return cls(
            units=data.institutions,
            years=np.array([int(y) for y in data.years]),
            values=data.matrix(spec.outcome, g),
            student_fte=data.matrix("student_fte", g),
            label=spec.outcome,
        )

    def with_values(self, values: np.ndarray, label: str, note: Optional[str] = None) -> "OutcomePanel":
        notes = self.notes + ((note,) if note else ())
        return replace(self, values=np.asarray(values, dtype=float), label=label, notes=notes)

    def row(self, unit: str) -> np.ndarray:
        return self.values[self.units.index(unit)]


PanelLike = Union[PanelDataset, OutcomePanel]


def as_outcome_panel(data: PanelLike, spec: DesignSpec) -> OutcomePanel:
    if isinstance(data, OutcomePanel):
        return data
    if isinstance(data, PanelDataset):
        return OutcomePanel.from_dataset(data, spec)
    raise DataError(f"expected a PanelDataset or OutcomePanel, got {type(data).__name__}")


@dataclass(frozen=True)
class ResolvedDesign:
    treated: int
    controls: np.ndarray
    pre: np.ndarray
    post: np.ndarray

    @property
    def sample(self) -> np.ndarray:
        return self.pre | self.post


def resolve_design(panel: OutcomePanel, spec: DesignSpec, error=EmptySelection) -> ResolvedDesign:
    """Map a spec onto panel indices; ``error`` is raised for empty pieces."""
    if spec.treated_unit not in panel.units:
        raise error(f"treated unit {spec.treated_unit!r} not in panel")
    years = panel.years
    pre_w = spec.pre_window or (int(years.min()), spec.policy_year - 1)
    post_w = spec.post_window or (spec.policy_year, int(years.max()))
    pre = (years >= pre_w[0]) & (years <= pre_w[1])
    post = (years >= post_w[0]) & (years <= post_w[1])
    if not pre.any():
        raise error(f"pre window {pre_w} selects no years")
    if not post.any():
        raise error(f"post window {post_w} selects no years")
    treated = panel.units.index(spec.treated_unit)
    controls = np.array([i for i in range(len(panel.units)) if i != treated], dtype=int)
    if controls.size == 0:
        raise error("no control units")
    return ResolvedDesign(treated, controls, pre, post)


def resolve_fit_design(panel: OutcomePanel, spec: DesignSpec) -> ResolvedDesign:
    return resolve_design(panel, spec, error=DegenerateDesign)
