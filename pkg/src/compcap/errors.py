"""Exception hierarchy shared by all compcap modules."""

from __future__ import annotations


class CompCapError(ValueError):
    """Base class for validation and solver errors raised by compcap."""


class NonStochasticRow(CompCapError):
    def __init__(self, channel: str, row: int, total: float):
        self.channel = channel
        self.row = row
        self.total = total
        super().__init__(
            f"channel {channel!r}: row {row} sums to {total!r}, expected 1"
        )


class InvalidChannel(CompCapError):
    """Malformed transition matrix (shape, negative entries, |X| < 2)."""


class MismatchedInputAlphabet(CompCapError):
    pass


class DegenerateChannel(CompCapError):
    def __init__(self, channel: str, capacity: float):
        self.channel = channel
        self.capacity = capacity
        super().__init__(
            f"channel {channel!r} has capacity {capacity:.3g} bits, "
            "below the usable floor"
        )


class NoConvergence(CompCapError):
    def __init__(self, max_iters: int, gap: float):
        self.max_iters = max_iters
        self.gap = gap
        super().__init__(
            f"Blahut-Arimoto bracket still {gap:.3g} wide after {max_iters} iterations"
        )


class UnknownFamily(CompCapError):
    pass


class ParameterOutOfRange(CompCapError):
    pass


class LengthMismatch(CompCapError):
    pass


class WrongFamilySize(CompCapError):
    pass


class NonpositiveRate(CompCapError):
    pass


class BisectionFailed(CompCapError):
    pass


class DegenerateRegret(CompCapError):
    pass


class ResourceLimit(CompCapError):
    pass
