"""Exception types raised across the package."""


class LDPError(Exception):
    """Base class for all package errors."""


class NonConvergence(LDPError):
    """An iterative solver hit its iteration cap."""


class OutOfHull(LDPError):
    """A target mean lies outside (or on the boundary of) the support hull."""


class AsymmetricInput(LDPError):
    pass


class NonUniformGrid(LDPError):
    pass


class TooLarge(LDPError):
    """Exhaustive enumeration requested beyond its configured cap."""

    def __init__(self, m, cap):
        super().__init__(f"{m} blocks exceeds the enumeration cap of {cap}")
        self.m = m
        self.cap = cap


class ZeroHits(LDPError):
    """No importance sample landed in the event.

    The degenerate estimate (``log_prob = -inf``) is attached as ``estimate``.
    """

    def __init__(self, estimate):
        super().__init__(
            f"no sample out of {estimate.samples} hit the event; "
            "increase samples or delta"
        )
        self.estimate = estimate


class AuditFailure(LDPError):
    """Heuristic and exact cut distances disagreed on event membership."""


class InfeasibleGrid(LDPError):
    pass


class NonFinite(LDPError):
    pass


class NoFeasibleCandidate(LDPError):
    pass


class BudgetExceeded(LDPError):
    """Weak regularization could not reach eps within ``max_parts`` classes."""

    def __init__(self, parts, achieved, result=None):
        super().__init__(
            f"stopped at {parts} parts with cut distance {achieved:.6g}"
        )
        self.parts = parts
        self.achieved = achieved
        self.result = result
