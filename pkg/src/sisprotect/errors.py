"""Exception types shared across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """A value outside its documented domain (probability, shape, range)."""


class ParseError(ValueError):
    """Malformed serialized document.

    ``offset`` is the byte position where decoding failed, when known.
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class AbsorptionError(RuntimeError):
    """Recovery chain does not reach the recovered state with certainty,
    so expected durations and tail bounds do not exist."""


class SolverError(RuntimeError):
    """Solver failed to converge within its iteration cap.

    ``result`` holds the best iterate found, so callers can inspect how
    close the run got before deciding what to do.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
