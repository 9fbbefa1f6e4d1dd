"""Discrete-time cohort queue of a fixed-posts academic workforce.

State is a vector of (possibly fractional) headcounts by integer age. Each
simulated year runs, in this order:

1. everyone ages by one year;
2. everyone at or above the mandatory age retires;
3. voluntary retirement, then attrition (lateral moves, death), remove the
   expected fraction of each age;
4. every vacated post, plus any growth in the establishment, is refilled at
   the entry-age distribution.

The dynamics are the expected-value (fluid) version of the queue, so a run
is deterministic and a scenario plus initial state fully determines the
trace.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np

from .errors import DataError, EmptyWindow, IncompatibleScenarios, UnboundedAges

AGE_LIMIT = 120


def _as_age_map(values: Mapping[int, float], what: str) -> Dict[int, float]:
    out = {}
    for age, p in dict(values).items():
        if isinstance(age, bool) or int(age) != age:
            raise DataError(f"{what}: age {age!r} is not an integer")
        out[int(age)] = float(p)
    return dict(sorted(out.items()))


@dataclass(frozen=True, eq=True)
class PolicyScenario:
    """Retirement policy and workforce parameters for one simulation.

    Hazards are annual exit probabilities keyed by age; unlisted ages have
    zero hazard. ``max_age`` caps the age grid: anyone ageing past it leaves
    and is counted as a voluntary retirement. Without a cap the grid stops at
    :data:`AGE_LIMIT`.
    """

    entry_age_distribution: Mapping[int, float]
    total_posts: float
    mandatory_age: Optional[int] = None
    voluntary_retirement_hazard: Mapping[int, float] = field(default_factory=dict)
    attrition_hazard: Mapping[int, float] = field(default_factory=dict)
    post_growth_rate: float = 0.0
    max_age: Optional[int] = None
    name: str = ""

    __hash__ = None

    def __post_init__(self):
        entry = _as_age_map(self.entry_age_distribution, "entry ages")
        vol = _as_age_map(self.voluntary_retirement_hazard, "voluntary hazard")
        att = _as_age_map(self.attrition_hazard, "attrition hazard")
        object.__setattr__(self, "entry_age_distribution", entry)
        object.__setattr__(self, "voluntary_retirement_hazard", vol)
        object.__setattr__(self, "attrition_hazard", att)
        if not entry:
            raise DataError("entry age distribution is empty")
        if any(p < 0 for p in entry.values()) or not math.isclose(sum(entry.values()), 1.0, abs_tol=1e-9):
            raise DataError("entry age distribution must be nonnegative and sum to 1")
        top = self.grid_top
        if min(entry) < 0 or max(entry) > top:
            raise DataError(f"entry ages must lie in [0, {top}]")
        for what, hz in (("voluntary hazard", vol), ("attrition hazard", att)):
            for age, p in hz.items():
                if not 0.0 <= p <= 1.0:
                    raise DataError(f"{what} at age {age} is {p}, outside [0, 1]")
                if not 0 <= age <= top:
                    raise DataError(f"{what} age {age} outside [0, {top}]")
        if self.mandatory_age is not None and self.mandatory_age <= min(entry):
            raise DataError(f"mandatory age {self.mandatory_age} must exceed the minimum entry age {min(entry)}")
        if not self.total_posts > 0:
            raise DataError(f"total_posts must be positive, got {self.total_posts}")
        if not self.post_growth_rate > -1:
            raise DataError(f"post_growth_rate must exceed -1, got {self.post_growth_rate}")
        if self.max_age is not None and self.max_age > AGE_LIMIT:
            raise DataError(f"max_age must not exceed {AGE_LIMIT}")

    @property
    def grid_top(self) -> int:
        return AGE_LIMIT if self.max_age is None else int(self.max_age)

    @property
    def mean_entry_age(self) -> float:
        return sum(a * p for a, p in self.entry_age_distribution.items())

    def _vectors(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.grid_top + 1
        entry, vol, att = np.zeros(n), np.zeros(n), np.zeros(n)
        for a, p in self.entry_age_distribution.items():
            entry[a] = p
        for a, p in self.voluntary_retirement_hazard.items():
            vol[a] = p
        for a, p in self.attrition_hazard.items():
            att[a] = p
        return entry, vol, att

    def exit_age(self) -> int:
        """First age at which no one remains: the mandate, a certain exit, or the cap."""
        candidates = []
        if self.mandatory_age is not None:
            candidates.append(int(self.mandatory_age))
        lo = int(round(self.mean_entry_age))
        for a in range(lo + 1, self.grid_top + 1):
            v = self.voluntary_retirement_hazard.get(a, 0.0)
            h = self.attrition_hazard.get(a, 0.0)
            if 1.0 - (1.0 - v) * (1.0 - h) >= 1.0:
                candidates.append(a)
                break
        if self.max_age is not None:
            candidates.append(int(self.max_age) + 1)
        if not candidates:
            raise UnboundedAges("no mandatory age, no age cap and no certain exit: residence time is unbounded")
        return min(candidates)

    def replace(self, **changes) -> "PolicyScenario":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return PolicyScenario(**kw)


@dataclass(frozen=True)
class CohortState:
    headcount_by_age: np.ndarray
    year_index: int = 0

    __hash__ = None

    def __post_init__(self):
        arr = np.asarray(self.headcount_by_age, dtype=float)
        if arr.ndim != 1:
            raise DataError("headcount_by_age must be one-dimensional")
        if np.any(arr < 0):
            raise DataError("headcounts must be nonnegative")
        object.__setattr__(self, "headcount_by_age", arr)

    def __eq__(self, other):
        if not isinstance(other, CohortState):
            return NotImplemented
        return self.year_index == other.year_index and np.array_equal(self.headcount_by_age, other.headcount_by_age)

    @property
    def total(self) -> float:
        return float(self.headcount_by_age.sum())


@dataclass(frozen=True)
class YearRecord:
    year_index: int
    mandatory: float
    voluntary: float
    attrition: float
    growth_additions: float
    hires: float
    total_headcount: float
    mean_residence_time: float
    weighted_exits: Optional[float] = None

    @property
    def vacancies(self) -> float:
        return self.mandatory + self.voluntary + self.attrition

    @property
    def hire_rate(self) -> float:
        return self.hires

    @property
    def vcr(self) -> float:
        return self.hires / self.total_headcount


TRACE_COLUMNS = ("year_index", "mandatory", "voluntary", "attrition", "vacancies", "growth_additions",
                 "hires", "total_headcount", "hire_rate", "mean_residence_time", "vcr", "weighted_exits")


@dataclass
class SimulationTrace:
    records: List[YearRecord]
    final_state: CohortState
    scenario_name: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            row = []
            for c in TRACE_COLUMNS:
                v = getattr(r, c)
                row.append("" if v is None else (v if isinstance(v, int) else repr(float(v))))
            w.writerow(row)


@dataclass(frozen=True)
class SteadyStateSummary:
    vcr: float
    mean_career_length: float
    littles_residual: float


def expected_residence(scenario: PolicyScenario, growth: float = 0.0) -> float:
    """Expected number of year-end headcounts an entrant contributes to.

    With ``growth`` nonzero each later year is discounted by ``1 + growth``,
    which gives the stock per unit of current hiring on a balanced-growth path.
    """
    entry, vol, att = scenario._vectors()
    top = scenario.grid_top
    stay = (1.0 - vol) * (1.0 - att)
    if scenario.mandatory_age is not None:
        stay[int(scenario.mandatory_age):] = 0.0
    total = 0.0
    for e in np.nonzero(entry)[0]:
        s, acc, k = 1.0, 1.0, 0
        for a in range(e + 1, top + 1):
            k += 1
            s *= stay[a]
            if s == 0.0:
                break
            acc += s / (1.0 + growth) ** k
        total += entry[e] * acc
    return float(total)


def initialize_uniform(scenario: PolicyScenario) -> CohortState:
    """Equal headcount in every age from the mean entry age up to the exit age."""
    lo = int(round(scenario.mean_entry_age))
    hi = scenario.exit_age()
    if hi <= lo:
        raise DataError(f"exit age {hi} does not exceed mean entry age {lo}")
    n = np.zeros(scenario.grid_top + 1)
    n[lo:hi] = scenario.total_posts / (hi - lo)
    return CohortState(n, 0)


def _fit_grid(state: CohortState, scenario: PolicyScenario) -> np.ndarray:
    n = state.headcount_by_age
    size = scenario.grid_top + 1
    if len(n) == size:
        return n.copy()
    if len(n) < size:
        return np.concatenate([n, np.zeros(size - len(n))])
    if np.any(n[size:] > 0):
        raise DataError(f"state has headcount above the scenario age cap {scenario.grid_top}")
    return n[:size].copy()


def step(state: CohortState, scenario: PolicyScenario, income_weights: Optional[np.ndarray] = None,
         residence: Optional[float] = None) -> Tuple[CohortState, YearRecord]:
    entry, vol_h, att_h = scenario._vectors()
    n = _fit_grid(state, scenario)
    total_before = n.sum()

    aged = np.zeros_like(n)
    aged[1:] = n[:-1]
    exits = np.zeros_like(n)
    overflow = n[-1]

    mandatory = 0.0
    if scenario.mandatory_age is not None:
        m = int(scenario.mandatory_age)
        mandatory = aged[m:].sum()
        exits[m:] += aged[m:]
        aged[m:] = 0.0
    vol = aged * vol_h
    aged -= vol
    att = aged * att_h
    aged -= att
    exits += vol + att

    growth_additions = total_before * scenario.post_growth_rate
    vacancies = mandatory + vol.sum() + att.sum() + overflow
    hires = vacancies + growth_additions
    new = aged + hires * entry

    weighted = None
    if income_weights is not None:
        w = np.asarray(income_weights, dtype=float)
        if len(w) < len(n):
            w = np.concatenate([w, np.zeros(len(n) - len(w))])
        weighted = float(exits @ w[: len(n)] + overflow * w[len(n) - 1])

    year = state.year_index + 1
    record = YearRecord(
        year_index=year,
        mandatory=float(mandatory),
        voluntary=float(vol.sum() + overflow),
        attrition=float(att.sum()),
        growth_additions=float(growth_additions),
        hires=float(hires),
        total_headcount=float(new.sum()),
        mean_residence_time=expected_residence(scenario) if residence is None else residence,
        weighted_exits=weighted,
    )
    return CohortState(new, year), record


def run(scenario: PolicyScenario, years: int, initial: Optional[CohortState] = None,
        changes: Optional[Mapping[int, PolicyScenario]] = None,
        income_weights: Optional[Sequence[float]] = None) -> SimulationTrace:
    """Simulate ``years`` steps.

    ``changes`` maps a 1-based step number to the scenario in force from that
    step on, which models a policy change part-way through a run.
    """
    if years < 1:
        raise DataError(f"years must be >= 1, got {years}")
    state = initial if initial is not None else initialize_uniform(scenario)
    weights = None if income_weights is None else np.asarray(income_weights, dtype=float)
    current = scenario
    records = []
    residence = expected_residence(current)
    for k in range(1, years + 1):
        if changes and k in changes:
            current = changes[k]
            residence = expected_residence(current)
        state, rec = step(state, current, weights, residence)
        records.append(rec)
    return SimulationTrace(records, state, scenario.name)


def littles_law_check(trace: SimulationTrace, window: Optional[Tuple[int, int]] = None) -> float:
    """Relative Little's-law residual ``|L - lambda W| / L`` over a window.

    ``window`` is an inclusive (first, last) range of year indices; the
    whole trace is used when omitted. L, lambda and W are time averages of
    headcount, hires and the entrants' expected residence time.
    """
    recs = trace.records
    if window is not None:
        lo, hi = window
        recs = [r for r in recs if lo <= r.year_index <= hi]
    if not recs:
        raise EmptyWindow(f"no trace years in window {window}")
    L = sum(r.total_headcount for r in recs) / len(recs)
    lam = sum(r.hires for r in recs) / len(recs)
    W = sum(r.mean_residence_time for r in recs) / len(recs)
    return abs(L - lam * W) / L


def summarize_window(trace: SimulationTrace, window: Optional[Tuple[int, int]] = None) -> SteadyStateSummary:
    recs = trace.records
    if window is not None:
        recs = [r for r in recs if window[0] <= r.year_index <= window[1]]
    if not recs:
        raise EmptyWindow(f"no trace years in window {window}")
    hires = sum(r.hires for r in recs)
    L = sum(r.total_headcount for r in recs)
    W = sum(r.mean_residence_time for r in recs) / len(recs)
    return SteadyStateSummary(hires / L, W, littles_law_check(trace, window))


def steady_state(scenario: PolicyScenario) -> SteadyStateSummary:
    """Analytic long-run summary: stationary age profile of the scenario.

    For zero growth the stationary VCR is one over the expected residence
    time. With growth it is the balanced-growth hiring share.
    """
    g = scenario.post_growth_rate
    W = expected_residence(scenario)
    Wg = expected_residence(scenario, growth=g)
    vcr = 1.0 / Wg
    # Little's law for the stationary profile: stock = hires x residence, exact only without growth
    lam = scenario.total_posts * vcr
    residual = abs(scenario.total_posts - lam * W) / scenario.total_posts
    return SteadyStateSummary(vcr, W, residual)


def stationary_state(scenario: PolicyScenario) -> CohortState:
    """Stationary age profile (zero-growth scenarios), scaled to total posts."""
    entry, vol, att = scenario._vectors()
    top = scenario.grid_top
    stay = (1.0 - vol) * (1.0 - att)
    if scenario.mandatory_age is not None:
        stay[int(scenario.mandatory_age):] = 0.0
    prof = np.zeros(top + 1)
    for e in np.nonzero(entry)[0]:
        s = 1.0
        prof[e] += entry[e]
        for a in range(e + 1, top + 1):
            s *= stay[a]
            if s == 0.0:
                break
            prof[a] += entry[e] * s
    return CohortState(prof * scenario.total_posts / prof.sum(), 0)


@dataclass
class ScenarioComparison:
    year_index: np.ndarray
    vacancies_a: np.ndarray
    vacancies_b: np.ndarray
    difference: np.ndarray
    decade_means: List[float]
    steady_state_a: SteadyStateSummary
    steady_state_b: SteadyStateSummary
    steady_state_hires_a: float
    steady_state_hires_b: float

    @property
    def steady_state_delta(self) -> float:
        return self.steady_state_hires_a - self.steady_state_hires_b

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["year_index", "vacancies_a", "vacancies_b", "difference"])
        for row in zip(self.year_index, self.vacancies_a, self.vacancies_b, self.difference):
            w.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])


def compare_scenarios(a: PolicyScenario, b: PolicyScenario, years: int,
                      initial: Optional[CohortState] = None) -> ScenarioComparison:
    """Run two policies from the same starting state and difference their vacancies.

    The default start is the uniform profile of scenario ``a`` (the status
    quo). ``difference`` is vacancies under ``a`` minus vacancies under ``b``.
    """
    if not math.isclose(a.total_posts, b.total_posts, rel_tol=1e-12):
        raise IncompatibleScenarios(f"total posts differ: {a.total_posts} vs {b.total_posts}")
    if a.entry_age_distribution != b.entry_age_distribution:
        raise IncompatibleScenarios("entry age distributions differ")
    if a.post_growth_rate != b.post_growth_rate:
        raise IncompatibleScenarios("post growth rates differ")
    start = initial if initial is not None else initialize_uniform(a)
    ta = run(a, years, start)
    tb = run(b, years, start)
    va, vb = ta.column("vacancies"), tb.column("vacancies")
    diff = va - vb
    decades = [float(diff[i:i + 10].mean()) for i in range(0, len(diff), 10)]
    ssa, ssb = steady_state(a), steady_state(b)
    return ScenarioComparison(
        year_index=ta.column("year_index").astype(int),
        vacancies_a=va,
        vacancies_b=vb,
        difference=diff,
        decade_means=decades,
        steady_state_a=ssa,
        steady_state_b=ssb,
        steady_state_hires_a=a.total_posts / ssa.mean_career_length,
        steady_state_hires_b=b.total_posts / ssb.mean_career_length,
    )


# --- scenario files ---------------------------------------------------------------
#
# [scenario]
# name = mandate-67
# entry_ages = 40:1
# mandatory_age = 67
# voluntary_hazard = 60-66:0.01, 70:1
# attrition_hazard = 40-69:0.015
# total_posts = 270
# growth = 0
# max_age =


def parse_age_values(text: str) -> Dict[int, float]:
    """Parse ``"40:0.5, 41:0.5"``; ``"55-60:0.1"`` expands a range; a bare age means weight 1."""
    out: Dict[int, float] = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        if ":" in item:
            ages, value = item.split(":", 1)
            try:
                v = float(value)
            except ValueError:
                raise DataError(f"bad value in age list item {item!r}") from None
        else:
            ages, v = item, 1.0
        try:
            if "-" in ages:
                lo, hi = (int(x) for x in ages.split("-", 1))
                span = range(lo, hi + 1)
            else:
                span = range(int(ages), int(ages) + 1)
        except ValueError:
            raise DataError(f"bad age in age list item {item!r}") from None
        for a in span:
            if a in out:
                raise DataError(f"age {a} listed twice")
            out[a] = v
    return out


def format_age_values(values: Mapping[int, float]) -> str:
    return ", ".join(f"{a}:{v!r}" for a, v in sorted(values.items()))


def load_scenario(source: TextIO) -> PolicyScenario:
    cp = configparser.ConfigParser(interpolation=None)
    text = source.read()
    if not text.lstrip().startswith("["):
        text = "[scenario]\n" + text
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise DataError(f"scenario file: {exc}".replace("\n", " ")) from None
    if "scenario" not in cp:
        raise DataError("scenario file lacks a [scenario] section")
    sec = cp["scenario"]
    known = {"name", "entry_ages", "mandatory_age", "voluntary_hazard", "attrition_hazard",
             "total_posts", "growth", "max_age"}
    unknown = set(sec) - known
    if unknown:
        raise DataError(f"unknown scenario keys: {sorted(unknown)}")
    if "entry_ages" not in sec or "total_posts" not in sec:
        raise DataError("scenario file needs entry_ages and total_posts")

    def opt_int(key):
        v = sec.get(key, "").strip()
        if not v or v.lower() == "none":
            return None
        try:
            return int(v)
        except ValueError:
            raise DataError(f"{key}={v!r} is not an integer") from None

    try:
        posts = float(sec["total_posts"])
        growth = float(sec.get("growth", "0") or 0)
    except ValueError as exc:
        raise DataError(f"scenario file: {exc}") from None
    return PolicyScenario(
        entry_age_distribution=parse_age_values(sec["entry_ages"]),
        total_posts=posts,
        mandatory_age=opt_int("mandatory_age"),
        voluntary_retirement_hazard=parse_age_values(sec.get("voluntary_hazard", "")),
        attrition_hazard=parse_age_values(sec.get("attrition_hazard", "")),
        post_growth_rate=growth,
        max_age=opt_int("max_age"),
        name=sec.get("name", "").strip(),
    )


def _number(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def dump_scenario(scenario: PolicyScenario) -> str:
    lines = [
        "[scenario]",
        f"name = {scenario.name}",
        f"entry_ages = {format_age_values(scenario.entry_age_distribution)}",
        f"mandatory_age = {'' if scenario.mandatory_age is None else scenario.mandatory_age}",
        f"voluntary_hazard = {format_age_values(scenario.voluntary_retirement_hazard)}",
        f"attrition_hazard = {format_age_values(scenario.attrition_hazard)}",
        f"total_posts = {_number(scenario.total_posts)}",
        f"growth = {_number(scenario.post_growth_rate)}",
        f"max_age = {'' if scenario.max_age is None else scenario.max_age}",
    ]
    return "\n".join(lines) + "\n"
