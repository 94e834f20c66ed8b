"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument is outside the operation's domain."""


class InsufficientData(ValueError):
    """Too few observations (or too small a block) for the requested statistic."""


class OutOfRange(ValueError):
    """A confidence level falls outside a planner's admissible range."""


class ComplexityCap(RuntimeError):
    """Exhaustive enumeration would exceed the configured number of tuples."""
