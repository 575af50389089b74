"""Exception hierarchy shared by all modules.

Every error raised on purpose by this package derives from
ValuationLabError so callers (and the CLI) can map failures to exit
codes without matching on message strings.
"""


class ValuationLabError(Exception):
    """Base class for all package errors."""


# data ingestion / series construction

class MalformedRow(ValuationLabError):
    """A CSV row has the wrong shape or a non-numeric cell."""


class GapInYears(ValuationLabError):
    """Year column is not strictly consecutive."""


class NonPositive(ValuationLabError):
    """A quantity that must be positive is zero or negative."""


class TooFewRows(ValuationLabError):
    """Input table is too short for the requested construction."""


class WindowTooLarge(ValuationLabError):
    """Trailing window or bootstrap block exceeds the series length."""


# statistics kernel

class RankDeficient(ValuationLabError):
    """Design matrix does not have full column rank."""


class TooFewObservations(ValuationLabError):
    """Not enough observations for the requested estimate or test."""


class DegenerateSeries(ValuationLabError):
    """Series has no variation where variation is required."""


class SampleSizeOutOfRange(ValuationLabError):
    """Sample size outside the validity range of an approximation."""


# simulation / numerics

class LengthMismatch(ValuationLabError):
    """Two series that must be aligned have incompatible lengths."""


class StepTooLarge(ValuationLabError):
    """Euler step too coarse for the drift's Lipschitz bound."""


class GridUnstable(ValuationLabError):
    """Finite-difference grid violates a stability condition."""


class NonPositiveTheta(ValuationLabError):
    """PDE/ODE solution lost positivity."""


class NoConvergence(ValuationLabError):
    """Iterative solver exhausted its budget."""


class NonPositiveWealth(ValuationLabError):
    """Initial wealth must be strictly positive."""
