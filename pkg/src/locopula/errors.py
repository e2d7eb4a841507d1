"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class BracketError(ValueError):
    """A root bracket does not actually bracket a sign change."""


class DegenerateWindowError(RuntimeError):
    """All kernel weights vanished (or too few for the requested fit)."""
