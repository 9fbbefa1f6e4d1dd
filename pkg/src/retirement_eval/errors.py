"""Exception hierarchy.

Every error carries a process exit code so the CLI can map failures to a
documented status without inspecting messages.
"""

from __future__ import annotations


class ToolkitError(Exception):
    exit_code = 1
    kind = "ToolkitError"


class UsageError(ToolkitError):
    exit_code = 2
    kind = "UsageError"


class DataError(ToolkitError, ValueError):
    exit_code = 3
    kind = "DataError"


class NumericalError(ToolkitError, ArithmeticError):
    exit_code = 4
    kind = "NumericalError"


# --- panel data -------------------------------------------------------------


class MalformedRow(DataError):
    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class NegativeCount(DataError):
    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DuplicateCell(DataError):
    def __init__(self, row: int, cell: tuple):
        self.row = row
        self.cell = cell
        super().__init__(f"row {row}: duplicate cell {cell}")


class MissingCell(DataError):
    def __init__(self, cell: tuple):
        self.cell = cell
        super().__init__(f"missing cell {cell}")


class ZeroHeadcount(DataError):
    pass


class EmptySelection(DataError):
    pass


# --- queue models ----------------------------------------------------------


class InvalidAges(DataError):
    pass


class UnboundedAges(DataError):
    pass


class IncompatibleScenarios(DataError):
    pass


class EmptyWindow(DataError):
    pass


# --- estimation ------------------------------------------------------------


class RankDeficient(NumericalError):
    def __init__(self, columns: list, message: str | None = None):
        self.columns = list(columns)
        super().__init__(message or f"design matrix is rank deficient; dependent columns: {self.columns}")


class DegenerateDesign(DataError):
    pass


class MissingBaseYear(DataError):
    pass


class InsufficientPrePeriod(DataError):
    pass


class NonpositiveStudentFTE(DataError):
    pass


class NoDonors(DataError):
    pass
