"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class PimError(Exception):
    """Base class for all errors raised by mtpim."""


class WorkloadError(PimError):
    """A workload or chip description is malformed or inconsistent.

    ``field`` is a dotted path such as ``tenant[1].layers[2].in`` and
    ``line`` the 1-based source line when the error came from a document.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field {field}")
        if line:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.message = message


class UnknownPresetError(WorkloadError):
    pass


class ChannelMismatchError(WorkloadError):
    pass


class InfeasibleError(PimError):
    """No deployment exists under the requested area or parameters."""


class InfeasibleAreaError(InfeasibleError):
    def __init__(self, op_id: str, arrays: int, area: int):
        self.op_id = op_id
        self.arrays = arrays
        self.area = area
        super().__init__(f"re-operator {op_id} needs {arrays} arrays but only {area} are available")


class InfeasibleBetaError(InfeasibleError):
    def __init__(self, band_arrays: int, beta: float):
        self.band_arrays = band_arrays
        self.beta = beta
        super().__init__(
            f"split limit {beta} is smaller than one indivisible row band of {band_arrays} arrays"
        )


class ReportInvariantError(PimError):
    """A generated report failed its internal-consistency check."""
