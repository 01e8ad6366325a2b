"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the set or range an operation is defined on."""


class CapacityError(RuntimeError):
    """A brute-force enumeration would exceed the configured guard."""


class MalformedStrategyError(ValueError):
    """A state, measurement or strategy violates its structural invariants."""


class TheoremInapplicableError(ValueError):
    """Parameters fall outside the hypothesis of the security theorem."""


class DegenerateStatisticsError(RuntimeError):
    """Every run aborted, so conditional statistics are undefined."""


class ConsistencyError(ValueError):
    """Two artifacts that must describe the same configuration do not."""
