"""Staff classification and the institution x year panel of job creation rates.

The panel is the common input of every estimator in :mod:`retirement_eval.did`.
It is always balanced: each (institution, year, group) cell appears exactly
once and years are contiguous. Unbalanced input is rejected, never imputed.
"""

from __future__ import annotations

import csv
import io
import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np

from .errors import (
    DataError,
    DuplicateCell,
    EmptySelection,
    MalformedRow,
    MissingCell,
    NegativeCount,
    ZeroHeadcount,
)

EAC_MIN_SALARY_POINT = 38
EAR_MIN_SALARY_POINT = 33

PANEL_COLUMNS = ("institution", "year", "group", "headcount", "new_appointments", "student_fte")
RECORD_FIELDS = ("function_code", "salary_point", "employment_mode", "terms", "financing")


class AcademicYear(int):
    """Academic year keyed by its starting calendar year (2007 is 2007/08)."""

    _pattern = re.compile(r"^\s*(\d{4})\s*(?:[/-]\s*(\d{2}|\d{4}))?\s*$")

    def __new__(cls, value):
        if isinstance(value, str):
            m = cls._pattern.match(value)
            if m is None:
                raise DataError(f"cannot parse academic year {value!r}")
            start = int(m.group(1))
            if m.group(2) is not None:
                end = int(m.group(2))
                if end % 100 != (start + 1) % 100:
                    raise DataError(f"academic year {value!r} does not span consecutive years")
            value = start
        elif isinstance(value, float):
            if not value.is_integer():
                raise DataError(f"academic year must be integral, got {value}")
            value = int(value)
        elif not isinstance(value, (int, np.integer)):
            raise DataError(f"cannot interpret {value!r} as an academic year")
        if not 1900 <= int(value) <= 2200:
            raise DataError(f"academic year {value} outside [1900, 2200]")
        return super().__new__(cls, int(value))

    @property
    def label(self) -> str:
        return f"{int(self)}/{(int(self) + 1) % 100:02d}"

    def __repr__(self) -> str:
        return f"AcademicYear({int(self)})"


def _norm_token(token: str) -> str:
    return re.sub(r"[\s\-]+", "_", token.strip().lower())


class FunctionCode(str, Enum):
    TEACHING_ONLY = "1"
    TEACHING_AND_RESEARCH = "3"
    NEITHER = "9"
    NOT_ACADEMIC = "4"
    LEGACY_X = "X"
    OTHER = "other"

    @classmethod
    def parse(cls, token: str) -> "FunctionCode":
        t = token.strip()
        if t.upper() == "X":
            return cls.LEGACY_X
        for member in cls:
            if member.value == t:
                return member
        return cls.OTHER


class EmploymentMode(str, Enum):
    FULL_TIME = "full_time"
    FULL_TIME_TERM_TIME = "full_time_term_time"
    OTHER = "other"

    @classmethod
    def parse(cls, token: str) -> "EmploymentMode":
        t = _norm_token(token)
        aliases = {"ft": "full_time", "full_time_term_time_only": "full_time_term_time"}
        t = aliases.get(t, t)
        for member in cls:
            if member.value == t:
                return member
        return cls.OTHER


class Terms(str, Enum):
    OPEN_ENDED = "open_ended"
    FIXED_TERM = "fixed_term"
    OTHER = "other"

    @classmethod
    def parse(cls, token: str) -> "Terms":
        t = _norm_token(token)
        t = {"permanent": "open_ended", "open_ended_permanent": "open_ended"}.get(t, t)
        for member in cls:
            if member.value == t:
                return member
        return cls.OTHER


class Financing(str, Enum):
    PROVIDER_FINANCED = "provider_financed"
    OTHER = "other"

    @classmethod
    def parse(cls, token: str) -> "Financing":
        t = _norm_token(token)
        if t in ("provider_financed", "wholly_provider_financed", "partly_provider_financed"):
            return cls.PROVIDER_FINANCED
        return cls.OTHER


class StaffGroup(str, Enum):
    EAC = "EAC"
    EAR = "EAR"
    UNCLASSIFIED = "Unclassified"

    @classmethod
    def parse(cls, token: str) -> "StaffGroup":
        t = token.strip()
        for member in cls:
            if member.value.lower() == t.lower():
                return member
        raise DataError(f"unknown staff group {token!r}")


_GROUP_ORDER = {StaffGroup.EAC: 0, StaffGroup.EAR: 1, StaffGroup.UNCLASSIFIED: 2}


@dataclass(frozen=True)
class StaffRecord:
    """One HESA-style staff contract, as far as the group filters need it."""

    function_code: FunctionCode
    salary_point: int
    employment_mode: EmploymentMode
    terms: Terms
    financing: Financing

    def __post_init__(self):
        for name, kind in (
            ("function_code", FunctionCode),
            ("employment_mode", EmploymentMode),
            ("terms", Terms),
            ("financing", Financing),
        ):
            if not isinstance(getattr(self, name), kind):
                raise DataError(f"{name} must be a {kind.__name__}, got {getattr(self, name)!r}")
        if isinstance(self.salary_point, bool) or not isinstance(self.salary_point, (int, np.integer)):
            raise DataError(f"salary_point must be an integer, got {self.salary_point!r}")
        if self.salary_point < 0:
            raise DataError(f"salary_point must be >= 0, got {self.salary_point}")

    @classmethod
    def from_tokens(cls, function_code: str, salary_point: str, employment_mode: str,
                    terms: str, financing: str) -> "StaffRecord":
        try:
            point = int(str(salary_point).strip())
        except ValueError:
            raise DataError(f"salary point {salary_point!r} is not an integer") from None
        return cls(
            FunctionCode.parse(function_code),
            point,
            EmploymentMode.parse(employment_mode),
            Terms.parse(terms),
            Financing.parse(financing),
        )


def classify_staff_record(record: StaffRecord) -> StaffGroup:
    """Assign a staff record to EAC, EAR or Unclassified.

    EAC is tested first. The two function-code sets are disjoint, so the
    precedence only matters if a caller maps one token into both.
    """
    if (
        record.function_code in (FunctionCode.TEACHING_ONLY, FunctionCode.TEACHING_AND_RESEARCH, FunctionCode.NEITHER)
        and record.salary_point >= EAC_MIN_SALARY_POINT
        and record.employment_mode in (EmploymentMode.FULL_TIME, EmploymentMode.FULL_TIME_TERM_TIME)
        and record.terms is Terms.OPEN_ENDED
    ):
        return StaffGroup.EAC
    if (
        record.function_code in (FunctionCode.NOT_ACADEMIC, FunctionCode.LEGACY_X)
        and record.salary_point >= EAR_MIN_SALARY_POINT
        and record.financing is Financing.PROVIDER_FINANCED
        and record.terms is Terms.OPEN_ENDED
    ):
        return StaffGroup.EAR
    return StaffGroup.UNCLASSIFIED


@dataclass(frozen=True)
class PanelObservation:
    institution: str
    year: AcademicYear
    group: StaffGroup
    headcount: int
    new_appointments: int
    student_fte: float = 0.0

    def __post_init__(self):
        if not isinstance(self.year, AcademicYear):
            object.__setattr__(self, "year", AcademicYear(self.year))
        if not isinstance(self.group, StaffGroup):
            object.__setattr__(self, "group", StaffGroup.parse(str(self.group)))
        if self.headcount < 0 or self.new_appointments < 0:
            raise DataError(f"negative count in {self.key}")
        if self.new_appointments > self.headcount:
            raise DataError(f"new_appointments exceeds headcount in {self.key}")
        if not self.student_fte >= 0:
            raise DataError(f"student_fte must be >= 0 in {self.key}")

    @property
    def key(self) -> Tuple[str, int, str]:
        return (self.institution, int(self.year), self.group.value)


def job_creation_rate(obs: PanelObservation) -> float:
    """New appointments divided by headcount for one cell."""
    if obs.headcount == 0:
        raise ZeroHeadcount(f"zero headcount in cell {obs.key}")
    return obs.new_appointments / obs.headcount


@dataclass(frozen=True)
class PanelDataset:
    """Balanced institution x year x group panel.

    ``provenance`` holds free-text caveats (per institution or under the key
    ``"*"``). It does not take part in equality, so round trips through CSV
    compare equal.
    """

    observations: Tuple[PanelObservation, ...]
    provenance: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        obs = tuple(sorted(self.observations, key=lambda o: (o.institution, int(o.year), _GROUP_ORDER[o.group])))
        if not obs:
            raise EmptySelection("panel has no observations")
        index: Dict[Tuple[str, int, StaffGroup], PanelObservation] = {}
        for o in obs:
            k = (o.institution, int(o.year), o.group)
            if k in index:
                raise DuplicateCell(-1, o.key)
            index[k] = o
        institutions = tuple(sorted({o.institution for o in obs}))
        lo, hi = min(int(o.year) for o in obs), max(int(o.year) for o in obs)
        years = tuple(AcademicYear(y) for y in range(lo, hi + 1))
        groups = tuple(sorted({o.group for o in obs}, key=_GROUP_ORDER.__getitem__))
        for inst in institutions:
            for y in years:
                for g in groups:
                    if (inst, int(y), g) not in index:
                        raise MissingCell((inst, int(y), g.value))
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "institutions", institutions)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "groups", groups)

    # populated in __post_init__
    institutions: Tuple[str, ...] = field(init=False, compare=False, repr=False, default=())
    years: Tuple[AcademicYear, ...] = field(init=False, compare=False, repr=False, default=())
    groups: Tuple[StaffGroup, ...] = field(init=False, compare=False, repr=False, default=())

    def __len__(self) -> int:
        return len(self.observations)

    def resolve_group(self, group=None) -> StaffGroup:
        if group is None:
            if len(self.groups) == 1:
                return self.groups[0]
            if StaffGroup.EAC in self.groups:
                return StaffGroup.EAC
            raise DataError("panel holds several staff groups; name one")
        g = group if isinstance(group, StaffGroup) else StaffGroup.parse(str(group))
        if g not in self.groups:
            raise EmptySelection(f"staff group {g.value} not in panel")
        return g

    def cell(self, institution: str, year: int, group=None) -> PanelObservation:
        g = self.resolve_group(group)
        try:
            return self._index[(institution, int(year), g)]
        except KeyError:
            raise EmptySelection(f"no cell ({institution}, {int(year)}, {g.value})") from None

    def matrix(self, field: str = "job_creation_rate", group=None) -> np.ndarray:
        """Return an (institutions x years) array of one cell attribute."""
        g = self.resolve_group(group)
        out = np.empty((len(self.institutions), len(self.years)))
        for i, inst in enumerate(self.institutions):
            for j, y in enumerate(self.years):
                o = self._index[(inst, int(y), g)]
                out[i, j] = job_creation_rate(o) if field == "job_creation_rate" else float(getattr(o, field))
        return out

    def to_csv(self, stream: TextIO, delimiter: str = ",") -> None:
        writer = csv.writer(stream, delimiter=delimiter, lineterminator="\n")
        writer.writerow(PANEL_COLUMNS)
        for o in self.observations:
            writer.writerow([o.institution, int(o.year), o.group.value, o.headcount,
                             o.new_appointments, repr(float(o.student_fte))])

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def group_mean_rate(data: PanelDataset, institutions: Iterable[str], years: Iterable[int], group=None) -> float:
    """Mean job creation rate over a block of cells.

    Each institution's rates are first averaged over ``years``; those time
    means are then averaged across institutions.
    """
    insts = list(dict.fromkeys(institutions))
    yrs = list(dict.fromkeys(int(y) for y in years))
    if not insts or not yrs:
        raise EmptySelection("empty institution or year selection")
    time_means = []
    for inst in insts:
        if inst not in data.institutions:
            raise EmptySelection(f"institution {inst!r} not in panel")
        rates = [job_creation_rate(data.cell(inst, y, group)) for y in yrs]
        time_means.append(sum(rates) / len(rates))
    return sum(time_means) / len(time_means)


# --- ingestion ------------------------------------------------------------------


def _sniff_delimiter(header: str) -> str:
    if "\t" in header and "," not in header:
        return "\t"
    return ","


def _read_rows(source: TextIO, delimiter: Optional[str]) -> Tuple[List[str], List[Tuple[int, List[str]]]]:
    text = source.read()
    if text.startswith("﻿"):
        text = text[1:]
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise MalformedRow(1, "missing header row")
    delim = delimiter or _sniff_delimiter(lines[0])
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    header = [h.strip() for h in next(reader)]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(lineno, f"expected {len(header)} fields, found {len(row)}")
        rows.append((lineno, row))
    return header, rows


def _column_lookup(header: Sequence[str], schema: Mapping[str, str], wanted: Iterable[str]) -> Dict[str, int]:
    out = {}
    for name in wanted:
        col = schema.get(name, name)
        if col in header:
            out[name] = header.index(col)
    return out


def _parse_int(value: str, row: int, name: str) -> int:
    try:
        v = float(value.strip())
    except ValueError:
        raise MalformedRow(row, f"{name}={value!r} is not a number") from None
    if not v.is_integer():
        raise MalformedRow(row, f"{name}={value!r} is not an integer")
    if v < 0:
        raise NegativeCount(row, f"{name}={value.strip()} is negative")
    return int(v)


def _parse_float(value: str, row: int, name: str) -> float:
    try:
        v = float(value.strip())
    except ValueError:
        raise MalformedRow(row, f"{name}={value!r} is not a number") from None
    if not np.isfinite(v):
        raise MalformedRow(row, f"{name}={value!r} is not finite")
    if v < 0:
        raise NegativeCount(row, f"{name}={value.strip()} is negative")
    return v


def _parse_year(value: str, row: int) -> AcademicYear:
    try:
        return AcademicYear(value)
    except DataError as exc:
        raise MalformedRow(row, str(exc)) from None


def ingest_panel(source: TextIO, schema: Optional[Mapping[str, str]] = None,
                 delimiter: Optional[str] = None, default_group: str = "EAC") -> PanelDataset:
    """Read a delimited text stream into a balanced :class:`PanelDataset`.

    Two row layouts are accepted. If the stream carries the staff-record
    columns (function code, salary point, employment mode, terms, financing)
    each row is one contract; rows are classified and counted per
    (institution, year, group). Otherwise each row is one panel cell and
    repeated cells are an error.

    Parameters
    ----------
    source : text stream
        Comma- or tab-delimited, UTF-8, header row required.
    schema : mapping, optional
        Field name -> column name. Unmapped fields use their own name.
    delimiter : str, optional
        Forced delimiter; sniffed from the header otherwise.
    default_group : str
        Group used in cell layout when no group column exists.
    """
    schema = dict(schema or {})
    header, rows = _read_rows(source, delimiter)
    rec_cols = _column_lookup(header, schema, RECORD_FIELDS)
    if len(rec_cols) == len(RECORD_FIELDS):
        return _ingest_records(header, rows, schema)
    cols = _column_lookup(header, schema, PANEL_COLUMNS)
    missing = [f for f in ("institution", "year", "headcount", "new_appointments") if f not in cols]
    if missing:
        raise MalformedRow(1, "header lacks required columns: " + ", ".join(schema.get(f, f) for f in missing))

    seen: Dict[Tuple[str, int, StaffGroup], int] = {}
    obs = []
    for lineno, row in rows:
        inst = row[cols["institution"]].strip()
        if not inst:
            raise MalformedRow(lineno, "empty institution")
        year = _parse_year(row[cols["year"]], lineno)
        try:
            group = StaffGroup.parse(row[cols["group"]]) if "group" in cols else StaffGroup.parse(default_group)
        except DataError as exc:
            raise MalformedRow(lineno, str(exc)) from None
        head = _parse_int(row[cols["headcount"]], lineno, "headcount")
        new = _parse_int(row[cols["new_appointments"]], lineno, "new_appointments")
        fte = _parse_float(row[cols["student_fte"]], lineno, "student_fte") if "student_fte" in cols else 0.0
        if new > head:
            raise MalformedRow(lineno, f"new_appointments={new} exceeds headcount={head}")
        key = (inst, int(year), group)
        if key in seen:
            raise DuplicateCell(lineno, (inst, int(year), group.value))
        seen[key] = lineno
        obs.append(PanelObservation(inst, year, group, head, new, fte))
    if not obs:
        raise EmptySelection("no data rows")
    _check_balanced(seen)
    return PanelDataset(tuple(obs))


def _check_balanced(keys: Iterable[Tuple[str, int, StaffGroup]]) -> None:
    keys = set(keys)
    insts = sorted({k[0] for k in keys})
    years = [k[1] for k in keys]
    groups = sorted({k[2] for k in keys}, key=_GROUP_ORDER.__getitem__)
    for inst in insts:
        for y in range(min(years), max(years) + 1):
            for g in groups:
                if (inst, y, g) not in keys:
                    raise MissingCell((inst, y, g.value) if len(groups) > 1 else (inst, y))


def read_staff_records(source: TextIO, schema: Optional[Mapping[str, str]] = None,
                       delimiter: Optional[str] = None) -> Tuple[List[str], List[Tuple[int, List[str], StaffRecord]]]:
    """Parse staff-record rows; returns the header and (line, raw row, record) triples."""
    schema = dict(schema or {})
    header, rows = _read_rows(source, delimiter)
    cols = _column_lookup(header, schema, RECORD_FIELDS)
    missing = [f for f in RECORD_FIELDS if f not in cols]
    if missing:
        raise MalformedRow(1, "header lacks staff-record columns: " + ", ".join(schema.get(f, f) for f in missing))
    out = []
    for lineno, row in rows:
        tokens = {f: row[cols[f]] for f in RECORD_FIELDS}
        empty = [f for f, v in tokens.items() if not v.strip()]
        if empty:
            raise MalformedRow(lineno, "unpopulated fields: " + ", ".join(empty))
        try:
            rec = StaffRecord.from_tokens(**tokens)
        except DataError as exc:
            raise MalformedRow(lineno, str(exc)) from None
        out.append((lineno, row, rec))
    return header, out


def _ingest_records(header: List[str], rows, schema: Mapping[str, str]) -> PanelDataset:
    cols = _column_lookup(header, schema, ("institution", "year", "person_id", "new_flag", "student_fte") + RECORD_FIELDS)
    for f in ("institution", "year"):
        if f not in cols:
            raise MalformedRow(1, f"header lacks column {schema.get(f, f)!r}")
    if "person_id" not in cols and "new_flag" not in cols:
        raise MalformedRow(1, "record layout needs a person_id or new_flag column to count new appointments")

    counts: Dict[Tuple[str, int, StaffGroup], List[int]] = defaultdict(lambda: [0, 0])
    persons: Dict[Tuple[str, int], set] = defaultdict(set)
    members: Dict[Tuple[str, int, StaffGroup], List[Tuple[str, int]]] = defaultdict(list)
    fte: Dict[Tuple[str, int], Tuple[float, int]] = {}
    groups_seen = set()
    for lineno, row in rows:
        inst = row[cols["institution"]].strip()
        if not inst:
            raise MalformedRow(lineno, "empty institution")
        year = int(_parse_year(row[cols["year"]], lineno))
        tokens = {f: row[cols[f]] for f in RECORD_FIELDS}
        empty = [f for f, v in tokens.items() if not v.strip()]
        if empty:
            raise MalformedRow(lineno, "unpopulated fields: " + ", ".join(empty))
        try:
            group = classify_staff_record(StaffRecord.from_tokens(**tokens))
        except DataError as exc:
            raise MalformedRow(lineno, str(exc)) from None
        if "student_fte" in cols and row[cols["student_fte"]].strip():
            value = _parse_float(row[cols["student_fte"]], lineno, "student_fte")
            prev = fte.get((inst, year))
            if prev is not None and prev[0] != value:
                raise MalformedRow(lineno, f"student_fte {value} conflicts with {prev[0]} given on row {prev[1]}")
            fte[(inst, year)] = (value, lineno)
        if "person_id" in cols:
            pid = row[cols["person_id"]].strip()
            if not pid:
                raise MalformedRow(lineno, "empty person_id")
            if pid in persons[(inst, year)]:
                raise DuplicateCell(lineno, (inst, year, pid))
            persons[(inst, year)].add(pid)
        else:
            pid = None
        if group is StaffGroup.UNCLASSIFIED:
            continue
        groups_seen.add(group)
        key = (inst, year, group)
        counts[key][0] += 1
        if "new_flag" in cols:
            flag = row[cols["new_flag"]].strip().lower()
            if flag not in ("0", "1", "true", "false", "yes", "no"):
                raise MalformedRow(lineno, f"new_flag={flag!r} is not boolean")
            counts[key][1] += flag in ("1", "true", "yes")
        else:
            members[key].append((pid, lineno))

    if not groups_seen:
        raise EmptySelection("no record falls in a staff group")
    insts = sorted({k[0] for k in persons} | {k[0] for k in counts})
    all_years = sorted({k[1] for k in persons} | {k[1] for k in counts})
    years = list(range(all_years[0], all_years[-1] + 1))
    provenance = {}
    if "new_flag" not in cols:
        # new = (institution, person) absent in the prior year, so the first year only seeds the lookback
        for key, mem in members.items():
            inst, year, _ = key
            prior = persons.get((inst, year - 1), set())
            counts[key][1] = sum(1 for pid, _ in mem if pid not in prior)
        years = years[1:]
        provenance["*"] = (f"new appointments derived from person ids; year {all_years[0]} used only as the "
                           "lookback base and dropped")
        if not years:
            raise EmptySelection("person-id layout needs at least two years")
    obs = []
    for inst in insts:
        for y in years:
            if (inst, y) not in persons and not any((inst, y, g) in counts for g in groups_seen):
                raise MissingCell((inst, y))
            for g in sorted(groups_seen, key=_GROUP_ORDER.__getitem__):
                head, new = counts.get((inst, y, g), (0, 0))
                obs.append(PanelObservation(inst, AcademicYear(y), g, head, new, fte.get((inst, y), (0.0, 0))[0]))
    return PanelDataset(tuple(obs), provenance)
