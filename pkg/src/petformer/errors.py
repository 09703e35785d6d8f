"""Exception types shared across the package."""


class PetformerError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PetformerError):
    """A configuration value violates an invariant (bad mode, bad sizes)."""


class DataError(PetformerError):
    """Input data is malformed or incompatible (CSV parse, non-finite values)."""


class ShapeError(PetformerError):
    """Tensor shapes are incompatible for the requested operation."""


class ContractError(PetformerError):
    """A runtime precondition was violated (degenerate mask row, non-scalar loss)."""


class DivergenceError(PetformerError):
    """Training produced a non-finite loss or gradient.

    Carries the last known-good parameter snapshot and the history collected
    so far, so callers can persist partial results before exiting.
    """

    def __init__(self, message, history=None, snapshot=None):
        super().__init__(message)
        self.history = history or []
        self.snapshot = snapshot
