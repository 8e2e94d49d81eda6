"""Exception taxonomy.

Validation problems (bad arguments, malformed configs, incompatible grids,
rejected model assumptions) are distinct from numeric failures (non-finite
fields, stability violations, stalled line searches) so that the command
line layer can map them to different exit codes.
"""


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ToolkitError):
    """Malformed input: bad argument, bad config, violated precondition."""


class GridMismatchError(ValidationError):
    """Operands sampled on incompatible grids."""


class AssumptionError(ValidationError):
    """Kernel/potential pair fails a structural model assumption.

    ``item`` is the index of the failing assumption in the validator's
    documented list, ``c0`` the offending coercivity constant when the
    failure is item (2).
    """

    def __init__(self, message: str, item: int, c0: float | None = None):
        super().__init__(message)
        self.item = item
        self.c0 = c0


class NumericError(ToolkitError):
    """Non-finite values or a numerically unusable state."""


class StabilityError(NumericError):
    """Time-step stability heuristic violated."""


class LineSearchStallError(NumericError):
    """Backtracking line search failed to make progress."""
