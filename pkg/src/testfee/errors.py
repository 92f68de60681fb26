"""Exception types raised across the package."""


class TestFeeError(ValueError):
    """Base class for all domain errors."""

    __test__ = False  # keep pytest from collecting the name


class ZeroMassBelow(TestFeeError):
    pass


class DomainMismatch(TestFeeError):
    pass


class DomainError(TestFeeError):
    pass


class NoThreshold(TestFeeError):
    pass


class NotAThreshold(TestFeeError):
    pass


class InvalidParams(TestFeeError):
    pass


class Infeasible(TestFeeError):
    pass


class EpsTooLarge(TestFeeError):
    pass


class NotNearFullSurplus(TestFeeError):
    pass


class InvalidDistribution(TestFeeError):
    pass
