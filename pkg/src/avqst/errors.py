"""Exception hierarchy.

Every error raised deliberately by the package derives from :class:`AvqstError`
so callers (and the command line front end) can map failures to exit codes.
"""


class AvqstError(Exception):
    """Base class for all package errors."""


class ValidationError(AvqstError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(ValidationError):
    """An experiment configuration is malformed or out of range."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CapacityError(ValidationError):
    """Requested object exceeds the supported Hilbert-space size."""


class NumericError(AvqstError, ArithmeticError):
    """A numerical routine failed (non-convergence, singular matrix)."""


class DegeneratePosteriorError(NumericError):
    """All particle weights underflowed, or the ensemble collapsed."""


class PredictorContractError(AvqstError):
    """A predictor assigned zero probability to an observed outcome."""


class SynchronizationError(AvqstError):
    """Two sequential objects were advanced through different data."""
