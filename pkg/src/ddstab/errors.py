"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was called on inputs that violate its stated preconditions."""


class DataFormatError(ValueError):
    """A trajectory/gain/config file could not be parsed into a valid object."""


class SolverFailure(RuntimeError):
    """Numerical breakdown inside a feasibility solve.

    Distinct from an infeasible verdict: infeasibility is a well-formed
    negative answer, this is the absence of an answer.
    """
