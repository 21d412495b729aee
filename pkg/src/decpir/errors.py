"""Exception types shared across the package."""


class BudgetViolation(ValueError):
    """A cache realization or placement request exceeds the per-database bit budget."""


class ProtocolError(RuntimeError):
    """A query referenced an unresolvable symbol or an answer set is malformed."""


class ReliabilityError(RuntimeError):
    """Decoded output failed to reproduce the requested file bit-for-bit."""


class InvariantViolation(RuntimeError):
    """A runtime invariant (such as lower-bound dominance) failed during simulation."""
