"""Bundled example data.

``python scripts/make_fixtures.py`` regenerates the files under
``retirement_eval/data``; the test suite checks the checked-in copies match.

* ``panel_noiseless.csv``: rates are exactly unit effect + year effect +
  0.016 for the treated unit from 2012 on.
* ``panel_calibrated.csv``: 23 institutions, 2007-2021, with a pre-2012 boom
  among the comparators. The treated unit's 15-year mean rate is exactly 0.03
  and the comparator average of time means exactly 0.05.
* ``scenario_*.ini``: cohort-queue scenarios. The ``illustrative`` pair uses
  made-up hazards chosen only to show the mechanics.
"""

from __future__ import annotations

import os
from importlib import resources
from typing import Dict, List

import numpy as np

from .cohort import PolicyScenario, dump_scenario
from .panel import AcademicYear, PanelDataset, PanelObservation, StaffGroup

FIXTURE_SEED = 20240611
TREATED = "CAM"
COMPARATORS = ("BHM", "BRS", "CDF", "DUR", "EDN", "EXE", "GLA", "ICL", "KCL", "LDS", "LIV",
               "LSE", "MAN", "NCL", "NOT", "QMU", "QUB", "SHF", "SOT", "UCL", "WAR", "YRK")
YEARS = tuple(range(2007, 2022))
POLICY_YEAR = 2012
INJECTED_DELTA_THOUSANDTHS = 16

# common year effects in thousandths: post-2008 dip, rebound, a 2020 spike
_YEAR_SHAPE = (2, -4, -6, 1, 4, 2, 1, 0, 0, 0, -1, -2, -3, 3, -2)


def _student_series(rng: np.random.Generator, base: float, growth: float) -> np.ndarray:
    steps = growth + rng.normal(0.0, 0.01, len(YEARS))
    steps[0] = 0.0
    return np.round(base * np.exp(np.cumsum(steps)), 1)


def noiseless_panel() -> PanelDataset:
    """Exact two-way effects plus an injected 0.016 treatment effect; headcount 1000 everywhere."""
    rng = np.random.default_rng(FIXTURE_SEED)
    units = (TREATED,) + COMPARATORS
    obs = []
    for i, unit in enumerate(units):
        alpha = 30 if unit == TREATED else 35 + (i * 7) % 26
        students = _student_series(rng, 18000 + 900 * i, 0.012)
        for j, year in enumerate(YEARS):
            per_thousand = alpha + 6 + _YEAR_SHAPE[j]
            if unit == TREATED and year >= POLICY_YEAR:
                per_thousand += INJECTED_DELTA_THOUSANDTHS
            obs.append(PanelObservation(unit, AcademicYear(year), StaffGroup.EAC, 1000, per_thousand,
                                        float(students[j])))
    return PanelDataset(tuple(obs), {"*": "synthetic noiseless fixture; injected effect 0.016"})


def _calibrated_counts(target_rates: np.ndarray, headcount: int, target_mean: float) -> List[int]:
    """Round rates to counts, then nudge counts so the mean rate equals ``target_mean`` exactly."""
    counts = np.round(target_rates * headcount).astype(int)
    total = int(round(len(target_rates) * headcount * target_mean))
    gap = total - int(counts.sum())
    resid = target_rates * headcount - counts
    order = np.argsort(-resid if gap > 0 else resid, kind="stable")
    for k in range(abs(gap)):
        counts[order[k % len(order)]] += 1 if gap > 0 else -1
    assert counts.sum() == total and counts.min() >= 0
    return [int(c) for c in counts]


def calibrated_panel(seed: int = FIXTURE_SEED) -> PanelDataset:
    """Twenty-three institutions with treated mean 0.03 and comparator mean 0.05."""
    rng = np.random.default_rng(seed + 1)
    n = len(YEARS)
    year_shape = np.array(_YEAR_SHAPE) / 1000.0
    pre = np.array([y < POLICY_YEAR for y in YEARS])
    obs = []
    # comparator means 0.05 +/- k/1000, k = 1..11, so their average is exactly 0.05
    offsets = [k for k in range(1, 12) for _ in (0, 1)]
    means = [0.05 + (k if idx % 2 else -k) / 1000.0 for idx, k in enumerate(offsets)]
    heads = [1000, 1200, 1400, 1800, 2000]
    for idx, unit in enumerate((TREATED,) + COMPARATORS):
        if unit == TREATED:
            mean, head = 0.03, 1600
            # slow rebound that carries on into 2012-2013, no pre-2012 boom
            own = np.where(np.isin(YEARS, (2012, 2013)), 0.003, 0.0) - 0.002 * (np.array(YEARS) < 2010)
            scale = 0.6
            noise_sd = 0.0015
            students = _student_series(rng, 19500, 0.008)
        else:
            mean, head = means[idx - 1], heads[idx % len(heads)]
            boom = rng.uniform(0.004, 0.012)
            own = np.where(np.isin(YEARS, (2010, 2011)), boom, 0.0)
            scale = 1.0
            noise_sd = 0.003
            students = _student_series(rng, rng.uniform(14000, 36000), rng.uniform(0.005, 0.025))
        shape = scale * year_shape + own + rng.normal(0.0, noise_sd, n)
        rates = mean + shape - shape.mean()
        counts = _calibrated_counts(np.clip(rates, 0.0, 1.0), head, mean)
        for j, year in enumerate(YEARS):
            obs.append(PanelObservation(unit, AcademicYear(year), StaffGroup.EAC, head, counts[j],
                                        float(students[j])))
    note = ("synthetic calibrated fixture: treated and comparator means fixed by construction; "
            "salary-point thresholds applied per record, comparability across institutions not modelled")
    return PanelDataset(tuple(obs), {"*": note})


def scenarios() -> Dict[str, PolicyScenario]:
    illustrative_attrition = {a: 0.019 for a in range(41, 67)}
    return {
        "mandate67": PolicyScenario({40: 1.0}, 270, mandatory_age=67, name="mandate-67"),
        "abolished": PolicyScenario({40: 1.0}, 270, voluntary_retirement_hazard={70: 1.0},
                                    name="abolished-plus-3"),
        "mandate67_illustrative": PolicyScenario(
            {38: 0.25, 40: 0.5, 42: 0.25}, 270, mandatory_age=67,
            attrition_hazard=illustrative_attrition, name="mandate-67 (illustrative hazards)"),
        "abolished_illustrative": PolicyScenario(
            {38: 0.25, 40: 0.5, 42: 0.25}, 270,
            voluntary_retirement_hazard={67: 0.5, 70: 1.0},
            attrition_hazard={**illustrative_attrition, 67: 0.019, 68: 0.019, 69: 0.019},
            name="abolished (illustrative hazards)"),
    }


FILES = ("panel_noiseless.csv", "panel_calibrated.csv") + tuple(f"scenario_{k}.ini" for k in
                                                                ("mandate67", "abolished",
                                                                 "mandate67_illustrative",
                                                                 "abolished_illustrative"))


def render_all() -> Dict[str, str]:
    out = {
        "panel_noiseless.csv": noiseless_panel().to_csv_text(),
        "panel_calibrated.csv": calibrated_panel().to_csv_text(),
    }
    for key, sc in scenarios().items():
        out[f"scenario_{key}.ini"] = dump_scenario(sc)
    return out


def write_all(directory: str) -> List[str]:
    os.makedirs(directory, exist_ok=True)
    written = []
    for name, text in render_all().items():
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written


def bundled_path(name: str) -> str:
    if name not in FILES:
        raise KeyError(f"no bundled fixture {name!r}")
    return str(resources.files("retirement_eval") / "data" / name)


def resolve_reference(value: str) -> str:
    """Map ``@calibrated``, ``@noiseless`` or ``@<scenario key>`` to a bundled file; other values pass through."""
    if not value.startswith("@"):
        return value
    key = value[1:]
    for name in (f"panel_{key}.csv", f"scenario_{key}.ini"):
        if name in FILES:
            return bundled_path(name)
    raise KeyError(f"no bundled fixture {value!r}; known: "
                   + ", ".join("@" + f.split("_", 1)[1].rsplit(".", 1)[0] for f in FILES))
