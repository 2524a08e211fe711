"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class CapacityError(RuntimeError):
    """A requested computation exceeds the configured resource limits."""


class StateError(RuntimeError):
    """An object is not in the state an operation requires."""
