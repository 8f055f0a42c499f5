"""Exception types shared across the library."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class InvalidStateError(RuntimeError):
    """An operation was applied to state that cannot support it."""


class NumericError(ArithmeticError):
    """A numerical routine failed to converge or produced a non-finite result."""


class ConflictError(RuntimeError):
    """A mutation conflicts with the lifecycle of its target (e.g. writing to a stopped experiment)."""


class NotFoundError(KeyError):
    """Lookup of an identifier that does not exist."""
