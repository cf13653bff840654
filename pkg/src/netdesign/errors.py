"""Exception types shared across the package."""


class NetdesignError(Exception):
    """Base class for all package-specific errors."""


class FormatError(NetdesignError):
    """Malformed or schema-violating JSON input."""


class TemplateConsistencyError(NetdesignError):
    """Two graphs disagree on the cost model or capacity of a shared edge."""


class PathLimitExceeded(NetdesignError):
    """Simple-path enumeration exceeded the configured cap.

    Signals that an instance is too large for path-based solving.
    """

    def __init__(self, limit, trip=None):
        self.limit = limit
        self.trip = trip
        where = f" for trip {trip}" if trip is not None else ""
        super().__init__(f"more than {limit} simple paths{where}")


class DomainError(NetdesignError):
    """Cost model evaluated outside its domain (e.g. at a vertical asymptote)."""


class Infeasible(NetdesignError):
    """No flow satisfies the demand and capacity constraints."""


class Unbounded(NetdesignError):
    """Linear program objective unbounded below (never expected here)."""


class NotConverged(NetdesignError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, iterations, relative_gap):
        self.iterations = iterations
        self.relative_gap = relative_gap
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(relative gap {relative_gap:.3e})"
        )


class CapacitySaturation(NetdesignError):
    """No strictly interior starting flow exists for a congestion-priced edge."""


class Unreachable(NetdesignError):
    """A trip's sink cannot be reached from its source."""

    def __init__(self, trip):
        self.trip = trip
        super().__init__(f"no path from {trip.source} to {trip.sink}")


class UnknownScenario(NetdesignError):
    """Requested a built-in scenario that does not exist."""


class BadParams(NetdesignError):
    """Scenario or operation parameters are invalid."""
