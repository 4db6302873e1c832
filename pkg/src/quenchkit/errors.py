"""Exception hierarchy shared across the package."""


class QuenchError(Exception):
    """Base class for all package errors."""


class ProtocolError(QuenchError):
    """Protocol file could not be read or failed validation."""


class ProtocolSyntaxError(ProtocolError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemaError(ProtocolError):
    def __init__(self, key: str, message: str | None = None):
        super().__init__(message or f"unknown or invalid key {key!r}")
        self.key = key


class ValidationError(ProtocolError):
    def __init__(self, message: str, segment: int | None = None):
        where = f"segment {segment}: " if segment is not None else ""
        super().__init__(where + message)
        self.segment = segment


class NonMonotonicTimes(ValidationError):
    pass


class NonFiniteField(ValidationError):
    pass


class TooFewSegments(ValidationError):
    pass


class LeakyTruncation(QuenchError):
    """Probability lost beyond the truncated basis exceeds the threshold."""

    def __init__(self, tail_mass: float, threshold: float, n_states: int):
        super().__init__(
            f"tail mass {tail_mass:.3e} exceeds {threshold:.1e} with {n_states} states; "
            "increase --n-states or pass --allow-leaky")
        self.tail_mass = tail_mass
        self.threshold = threshold
        self.n_states = n_states


class ConvergenceWarning(UserWarning):
    pass


DEFAULT_TAIL_THRESHOLD = 1e-3


def check_tail(coeffs, threshold: float | None = DEFAULT_TAIL_THRESHOLD) -> float:
    """Return 1 - sum |c|^2; raise LeakyTruncation above ``threshold`` (None disables)."""
    import numpy as np

    tail = float(1.0 - np.sum(np.abs(coeffs) ** 2))
    if threshold is not None and tail > threshold:
        raise LeakyTruncation(tail, threshold, len(coeffs))
    return tail
