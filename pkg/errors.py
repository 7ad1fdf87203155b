"""
Error types for spikeslab-ar.

Every error the library raises on bad data or failed numerics derives from
SpikeSlabError and carries the exit code the command line reports for it.
"""

from typing import Optional, Sequence


class SpikeSlabError(Exception):
    exit_code: int = 1


class UsageError(SpikeSlabError):
    exit_code = 2


class DataError(SpikeSlabError):
    exit_code = 3


class MissingColumnError(DataError):
    def __init__(self, columns: Sequence[str], source: Optional[str] = None):
        self.columns = list(columns)
        where = f" in {source}" if source else ""
        super().__init__(f"Missing column(s){where}: {', '.join(self.columns)}")


class NonNumericCellError(DataError):
    def __init__(self, row: int, column: str, value: object):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Non-numeric cell at row {row}, column '{column}': {value!r}")


class MissingValueError(DataError):
    pass


class ConstantColumnError(DataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Column '{column}' has zero variance and cannot be standardized")


class NumericError(SpikeSlabError):
    exit_code = 4


class NonStationaryError(NumericError):
    def __init__(self, phi: Sequence[float], root_moduli: Sequence[float], hint: str = ""):
        self.phi = [float(v) for v in phi]
        self.root_moduli = [float(v) for v in root_moduli]
        smallest = min(self.root_moduli) if self.root_moduli else float("nan")
        message = f"AR coefficients {self.phi} are not stationary (smallest root modulus {smallest:.6g})"
        if hint:
            message = f"{message}; {hint}"
        super().__init__(message)


class DegenerateDenominatorError(NumericError):
    pass


class NotPositiveDefiniteError(NumericError):
    pass
