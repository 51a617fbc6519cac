"""Exception hierarchy shared across the package.

Every error raised by popstat code derives from :class:`PopstatError` so
callers (notably the CLI) can separate expected data problems from bugs.
"""


class PopstatError(Exception):
    """Base class for all popstat errors."""


# -- pyramid construction / divergence ---------------------------------------

class AllZero(PopstatError):
    """Every count in a pyramid is zero; no distribution can be formed."""


class NegativeCount(PopstatError):
    """A raw population count is negative."""


class UnknownReference(PopstatError):
    """The requested reference country is not present in the dataset."""


class KTooLarge(PopstatError):
    """More closest countries requested than exist besides the reference."""


class LengthMismatch(PopstatError):
    """Two vectors that must be paired have different lengths."""


# -- statistics ---------------------------------------------------------------

class ZeroDeaths(PopstatError):
    """A death count of zero has no log rate; caller decides drop policy."""


class NegativeDeaths(PopstatError):
    """A death count is negative."""


class NonpositivePopulation(PopstatError):
    """A population denominator is zero or negative."""


class TooFewPoints(PopstatError):
    """Not enough paired points for the requested statistic."""


class DegenerateVariance(PopstatError):
    """A sample is constant, so correlation is undefined."""


class InsufficientOverlap(PopstatError):
    """Fewer countries than required are present in both inputs."""


# -- tuning -------------------------------------------------------------------

class UnknownCause(PopstatError):
    """The requested cause has no mortality table."""


class AllDegenerate(PopstatError):
    """Every candidate reference yielded a degenerate correlation."""


# -- synthetic ----------------------------------------------------------------

class BadFactor(PopstatError):
    """A pyramid shape parameter is outside its valid range."""


class InsufficientCountries(PopstatError):
    """Too few countries to plant a correlated mortality table."""


# -- ingestion ----------------------------------------------------------------

class MissingColumn(PopstatError):
    """A required column is absent from a delimited input file."""


class BadAgeGroupLabel(PopstatError):
    """An age-group label does not belong to the bin scheme."""


class UnknownLevel(PopstatError):
    """A cause level is outside the supported 1..3 range."""
