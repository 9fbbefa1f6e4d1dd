"""Closed-form effect of a mandatory retirement age on the vacancy creation rate.

With a fixed number of posts and a uniform age profile, vacancies per year are
posts / career length. Removing the mandate lengthens careers by the mean
extension ``e``, so the mandate raises the vacancy creation rate by
``e / career`` relative to the no-mandate baseline. That gross figure is then
scaled down by the share of vacancies that arise for other reasons and by the
share of people who would have retired at the mandatory age anyway.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Tuple

from .errors import DataError, InvalidAges

DEFAULT_BAND = (0.02, 0.04)


@dataclass(frozen=True)
class QueueParameters:
    appointment_age: float
    mandatory_age: float
    mean_extension: float
    other_cause_share: float = 0.0
    voluntary_share: float = 0.0

    def __post_init__(self):
        if self.mandatory_age <= self.appointment_age:
            raise InvalidAges(
                f"mandatory age {self.mandatory_age} must exceed appointment age {self.appointment_age}"
            )
        if self.mean_extension < 0:
            raise DataError(f"mean extension must be >= 0, got {self.mean_extension}")
        for name in ("other_cause_share", "voluntary_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class ProportionalityResult:
    career_length: float
    gross_uplift: float
    after_other_causes: float
    net_uplift: float
    mode: str = "career"

    def as_row(self) -> dict:
        return asdict(self)


def vcr_uplift(params: QueueParameters, mode: str = "career") -> ProportionalityResult:
    """Relative increase in the vacancy creation rate caused by the mandate.

    ``mode="career"`` divides the extension by the mandated career length
    (``e / (A_r - A_a)``). ``mode="extended"`` uses the exact reduction
    relative to the lengthened career, ``e / (A_r - A_a + e)``.
    """
    career = params.mandatory_age - params.appointment_age
    if career <= 0:
        raise InvalidAges(f"career length {career} must be positive")
    if mode == "career":
        gross = params.mean_extension / career
    elif mode == "extended":
        gross = params.mean_extension / (career + params.mean_extension)
    else:
        raise DataError(f"unknown uplift mode {mode!r}; expected 'career' or 'extended'")
    after_other = gross * (1.0 - params.other_cause_share)
    net = after_other * (1.0 - params.voluntary_share)
    return ProportionalityResult(career, gross, after_other, net, mode)


class Verdict(str, Enum):
    BELOW = "below"
    WITHIN = "within"
    ABOVE = "above"


def proportionality_verdict(result: ProportionalityResult, threshold_band: Tuple[float, float] = DEFAULT_BAND) -> Verdict:
    low, high = threshold_band
    if not 0 <= low <= high:
        raise DataError(f"threshold band must satisfy 0 <= low <= high, got {threshold_band}")
    if result.net_uplift < low:
        return Verdict.BELOW
    if result.net_uplift > high:
        return Verdict.ABOVE
    return Verdict.WITHIN


def ladder_csv(params: QueueParameters, result: ProportionalityResult, verdict: Verdict) -> str:
    """One-row CSV of inputs and results at full precision."""
    buf = io.StringIO()
    row = {**asdict(params), **result.as_row(), "verdict": verdict.value}
    writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
    writer.writeheader()
    writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def summary_text(params: QueueParameters, result: ProportionalityResult, verdict: Verdict,
                 band: Tuple[float, float] = DEFAULT_BAND) -> str:
    pct = lambda x: f"{100 * x:.2f}%"
    return "\n".join([
        f"career length            {result.career_length:g} years "
        f"(appointed at {params.appointment_age:g}, mandate at {params.mandatory_age:g})",
        f"gross uplift             {pct(result.gross_uplift)} (extension {params.mean_extension:g} years)",
        f"after other causes       {pct(result.after_other_causes)} (other-cause share {params.other_cause_share:g})",
        f"net uplift               {pct(result.net_uplift)} (voluntary share {params.voluntary_share:g})",
        f"verdict vs [{pct(band[0])}, {pct(band[1])}]  {verdict.value}",
    ])
