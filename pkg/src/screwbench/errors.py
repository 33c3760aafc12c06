"""Exception types shared across the package."""


class ScrewbenchError(Exception):
    """Base class for all package-specific errors."""


class ScenarioError(ScrewbenchError):
    """Scenario file failed to parse or validate. Message names the field."""


class LogFormatError(ScrewbenchError):
    """A CSV log violates the t_s,fz_n,mz_nm schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateFitError(ScrewbenchError):
    """Regression input has zero variance in the regressor."""


class UndefinedFrequencyError(ScrewbenchError):
    """Too few peaks to define an oscillation frequency."""
