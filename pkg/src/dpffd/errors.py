"""Exception hierarchy."""


class DPFFDError(Exception):
    """Base class for all package errors."""


class ContractViolation(DPFFDError, ValueError):
    """An operation was called with inputs outside its precondition."""


class DegenerateWeightsError(DPFFDError):
    """All particle weights vanished or became non-finite (filter divergence)."""


class NumericDivergenceError(DPFFDError):
    """A state became non-finite.

    ``step`` is the last step that completed cleanly, when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TopologyError(DPFFDError, ValueError):
    """The communication graph is malformed or disconnected."""


class ConfigError(DPFFDError, ValueError):
    """A scenario failed validation. ``errors`` lists ``(field, message)`` pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{field}: {msg}" for field, msg in self.errors))
