"""Exception hierarchy shared by the model builders, optimizers and backtester."""


class HetRiskError(Exception):
    """Base class for all errors raised by hetrisk."""


class InvalidPanel(HetRiskError, ValueError):
    """A returns panel violates its shape or content invariants."""


class MissingData(InvalidPanel):
    """The panel contains NaN or infinite observations."""


class ZeroVariance(InvalidPanel):
    """A ticker's return series is constant."""


class DegenerateRow(InvalidPanel):
    """Two return series are perfectly (anti-)correlated."""


class TooFewObservations(InvalidPanel):
    pass


class NotSymmetric(HetRiskError, ValueError):
    pass


class NotPositiveSemidefinite(HetRiskError, ValueError):
    pass


class DimensionMismatch(HetRiskError, ValueError):
    pass


class HierarchyError(HetRiskError, ValueError):
    """Malformed industry classification (bad nesting, empty clusters...)."""


class HierarchyMismatch(HierarchyError):
    """The hierarchy does not cover the tickers of the panel."""


class EmptyCluster(HierarchyError):
    pass


class SingularTopLevel(HetRiskError, ArithmeticError):
    """The least granular factor covariance is numerically singular.

    Building with ``market_factor=True`` replaces it by a one-factor model.
    """


class ZeroSpecificRisk(HetRiskError, ArithmeticError):
    pass


class SingularFactorCovariance(HetRiskError, ArithmeticError):
    pass


class RankDeficientLoadings(HetRiskError, ValueError):
    pass


class ZeroAlpha(HetRiskError, ArithmeticError):
    """The alpha has no component left after projecting out the constraints."""


class InfeasibleBounds(HetRiskError, ValueError):
    """No bounded optimum with unit gross weight exists.

    ``gross_cap`` is the largest gross weight the bounded optimum attains
    when it is known.
    """

    def __init__(self, message: str = "", gross_cap: float | None = None):
        super().__init__(message)
        self.gross_cap = gross_cap


class NonConvergence(HetRiskError, RuntimeError):
    pass


class InvalidPrices(HetRiskError, ValueError):
    pass


class MissingPrice(InvalidPrices):
    pass


class InsufficientHistory(HetRiskError, ValueError):
    pass


class ZeroTradedShares(HetRiskError, ArithmeticError):
    pass


class ZeroVariancePnl(HetRiskError, ArithmeticError):
    pass


class InvalidSpec(HetRiskError, ValueError):
    pass


class InvalidConfig(HetRiskError, ValueError):
    pass
