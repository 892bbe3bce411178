"""Exception hierarchy shared across the package."""


class BanditError(Exception):
    """Base class for every error raised by ctxbandit."""


class NotInterior(BanditError, ValueError):
    """A point is not strictly inside the convex body."""


class NotPositiveDefinite(BanditError, ValueError):
    """A matrix failed a positive-definiteness requirement."""


class NoConvergence(BanditError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class PendingQuery(BanditError, RuntimeError):
    """propose() was called while a previous query is still unanswered."""


class NoPendingQuery(BanditError, RuntimeError):
    """feed() was called without a preceding propose()."""


class OutOfCube(BanditError, ValueError):
    """A context lies outside the unit cube."""


class NotInCell(BanditError, ValueError):
    """A context lies outside the requested partition cell."""


class ExhaustedSequence(BanditError, IndexError):
    """A fixed context sequence has no element for the requested round."""


class OracleFailure(BanditError, RuntimeError):
    """A minimizer oracle could not certify its answer."""


class CertificationFailed(BanditError, AssertionError):
    """Sampled certification of a loss model's constants failed.

    ``witness`` carries the offending sample so it can be reproduced.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InvariantViolation(BanditError, RuntimeError):
    """A run broke a hard invariant (e.g. an infeasible query)."""


class DegenerateFit(BanditError, ValueError):
    """A rate fit was requested on unusable points."""


class ConfigError(BanditError, ValueError):
    """An experiment configuration is malformed or inconsistent."""
