"""Exception types raised across the package."""


class HyperwalkError(Exception):
    """Base class for all package errors."""


class ModelError(HyperwalkError):
    """Invalid group model, word, or mixing of elements from different models."""


class ParseError(HyperwalkError):
    """Malformed input file; ``lineno`` is 1-based (0 when not line specific)."""

    def __init__(self, message, lineno=0, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class BudgetExceeded(HyperwalkError):
    """An enumeration or solve would exceed its configured element budget."""


class ConvergenceError(HyperwalkError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class AdmissibilityError(HyperwalkError):
    """Step distribution is not a probability measure generating the group."""


class CalibrationError(HyperwalkError):
    """Experiment calibration could not reach the requested coverage."""


class ConfigError(HyperwalkError):
    """Invalid or unresolvable experiment configuration."""
