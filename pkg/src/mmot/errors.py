class InvariantViolation(AssertionError):
    """A mathematical invariant that must hold on every valid run was violated."""
