"""Exception hierarchy shared by the solver, diagnostics and CLI."""


class WavegrowError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WavegrowError, ValueError):
    """Invalid grid, potential or solver parameters."""


class DomainError(WavegrowError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ArityError(WavegrowError, ValueError):
    """Too few samples, or incompatible sampling, for a windowed diagnostic."""


class NumericalFailure(WavegrowError, RuntimeError):
    """A computation produced non-finite values or failed to converge."""


class BlowUpError(NumericalFailure):
    def __init__(self, message, last_finite_time):
        super().__init__(f"{message} (last finite time t={last_finite_time!r})")
        self.last_finite_time = last_finite_time


class PicardDivergence(NumericalFailure):
    def __init__(self, message, diffs, window=None):
        if window is not None:
            message = f"window {window}: {message}"
        super().__init__(message)
        self.diffs = list(diffs)
        self.window = window


class SequenceOverflowError(NumericalFailure, OverflowError):
    def __init__(self, index):
        super().__init__(f"recurrence overflowed float64 at index n={index}")
        self.index = index


class ConfigError(WavegrowError):
    """Aggregated configuration validation failure.

    ``errors`` holds every problem found, as ``(key_path, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{key}: {msg}" for key, msg in self.errors)
        super().__init__(f"{len(self.errors)} configuration error(s): {lines}")


class StorageError(WavegrowError, OSError):
    """IO failure, corrupt file or incompatible on-disk format."""
