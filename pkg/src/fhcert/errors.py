"""Exception types shared across the package."""

from __future__ import annotations


class FhCertError(Exception):
    """Base class for all errors raised by this package."""


class NotInvertibleMod(FhCertError):
    pass


class NoSolution(FhCertError):
    pass


class TooLarge(FhCertError):
    def __init__(self, message: str, count: int | None = None):
        super().__init__(message)
        self.count = count


class InfiniteCohomology(FhCertError):
    pass


class BallTooLarge(FhCertError):
    pass


class GateFailed(FhCertError):
    pass


class NoU(FhCertError):
    pass


class NotFound(FhCertError):
    pass


class Unsupported(FhCertError):
    pass


class PreconditionFailed(FhCertError):
    pass


class HypothesisFailed(FhCertError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class BadResidue(FhCertError):
    pass


class NotCovered(FhCertError):
    pass


class Disconnected(FhCertError):
    pass


class NotSplit(FhCertError):
    pass
