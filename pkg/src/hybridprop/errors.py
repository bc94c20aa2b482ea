"""Exception types shared across the package."""


class HybridPropError(Exception):
    """Base class for all errors raised by hybridprop."""


class RejectedInput(HybridPropError, ValueError):
    """Input does not satisfy an operation's preconditions (shapes, ranges, schema)."""


class InvariantViolation(HybridPropError):
    """A value violates a structural invariant, e.g. a non-unitary propagator."""


class UnsupportedModel(HybridPropError):
    """The model lacks something a scheme needs (e.g. designated coordinate operators)."""


class DivergenceError(HybridPropError):
    """Non-finite values appeared during time stepping.

    ``step`` is the index of the offending step and ``trajectory`` holds the
    rows recorded before it, so callers can still write partial output.
    """

    def __init__(self, message, step, trajectory=None, scheme=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory
        self.scheme = scheme
