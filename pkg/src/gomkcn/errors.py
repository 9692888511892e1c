"""Exception types shared across the package."""


class GomkcnError(Exception):
    """Base class for package-specific errors."""


class ConfigError(GomkcnError):
    """Invalid configuration value or unknown configuration key."""


class ShapeError(GomkcnError):
    """Operands have incompatible shapes or sizes."""


class InvariantViolation(GomkcnError):
    """A structural invariant (symmetry, injectivity, weight ordering) is broken."""


class ParseError(GomkcnError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class DataError(GomkcnError):
    """Dataset contents are inconsistent with the requested task."""


class TrainingError(GomkcnError):
    """Training produced invalid values (NaN/inf gradients or parameters)."""
