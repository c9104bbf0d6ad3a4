"""Exception types shared across the solvers and the CLI."""


class CorroborationError(Exception):
    """Base class for every error raised by this package."""


class InvariantViolation(CorroborationError, ValueError):
    """Input data breaks a model invariant (ordering, positivity, ...)."""


class Infeasible(CorroborationError):
    """No assignment reaches the requested credibility target."""


class InvalidDiscretization(CorroborationError, ValueError):
    pass


class TooLarge(CorroborationError):
    """Exhaustive enumeration would exceed the configured guard."""


class VectorTooLarge(CorroborationError, ValueError):
    pass


class InfeasibleVector(CorroborationError):
    pass


class CategoryMismatch(CorroborationError, ValueError):
    pass


class InfeasibleFrame(CorroborationError):
    """A frame's per-event constraint cannot be met for the observed event."""

    def __init__(self, message: str, frame: int | None = None):
        super().__init__(message if frame is None else f"frame {frame}: {message}")
        self.frame = frame


class ParseError(CorroborationError, ValueError):
    """An input file is not valid JSON or lacks required fields."""
