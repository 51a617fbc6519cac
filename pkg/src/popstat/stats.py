"""Log-rate transform, Pearson correlation, and the inferential statistics
(two-tailed p, Fisher-z confidence interval, r-squared) attached to it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np
from scipy.stats import norm as _norm
from scipy.stats import t as _student_t

from .errors import (
    DegenerateVariance,
    InsufficientOverlap,
    LengthMismatch,
    NegativeDeaths,
    NonpositivePopulation,
    TooFewPoints,
    ZeroDeaths,
)
from .pyramid import CountryId

if TYPE_CHECKING:
    from .ingestion import CauseId


@dataclass(frozen=True)
class LogRateSeries:
    """Natural log of deaths per million, one value per country."""

    cause: "CauseId | None"
    values: dict[CountryId, float]

    def __post_init__(self) -> None:
        for country, value in self.values.items():
            if not math.isfinite(value):
                raise ValueError(f"non-finite log rate for {country.iso3}")


@dataclass(frozen=True)
class IndicatorSeries:
    """A named scalar indicator (median age, HDI, ...) per country."""

    name: str
    values: dict[CountryId, float]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("indicator name must be non-empty")
        for country, value in self.values.items():
            if not math.isfinite(value):
                raise ValueError(f"non-finite indicator value for {country.iso3}")


@dataclass(frozen=True)
class CorrelationReport:
    """One correlation with its full inferential context.

    ``ci_degenerate`` is set when |r| = 1, where the Fisher-z interval is
    undefined and the point interval [r, r] is reported instead.
    """

    r: float
    n: int
    p_two_tailed: float
    ci_low: float
    ci_high: float
    r_squared: float
    ci_degenerate: bool = False

    def __post_init__(self) -> None:
        if self.n < 3:
            raise TooFewPoints(f"n={self.n} < 3")
        if not -1.0 <= self.r <= 1.0:
            raise ValueError(f"r={self.r!r} outside [-1, 1]")
        if not self.ci_low <= self.r <= self.ci_high:
            raise ValueError("confidence interval does not bracket r")
        if not 0.0 <= self.p_two_tailed <= 1.0:
            raise ValueError("p-value outside [0, 1]")
        if abs(self.r_squared - self.r * self.r) > 1e-12:
            raise ValueError("r_squared is not the square of r")


def ln_death_rate(deaths: float, population: float) -> float:
    """Natural log of deaths per million population.

    Zero deaths have no log rate; :class:`ZeroDeaths` is raised and the
    caller decides whether to drop the country.
    """
    if population <= 0:
        raise NonpositivePopulation(f"population {population!r} must be positive")
    if deaths < 0:
        raise NegativeDeaths(f"deaths {deaths!r} must be non-negative")
    if deaths == 0:
        raise ZeroDeaths("zero deaths: log rate undefined")
    return math.log(deaths / population * 1e6)


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient of two equally long samples."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise LengthMismatch(f"paired samples of shapes {xv.shape} and {yv.shape}")
    n = xv.size
    if n < 3:
        raise TooFewPoints(f"n={n} < 3")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateVariance("a sample is constant")
    return float(np.dot(dx, dy)) / (math.sqrt(sxx) * math.sqrt(syy))


def p_value(r: float, n: int) -> float:
    """Two-tailed p-value for r under the exact-null Student-t with n-2 df."""
    if n < 3:
        raise TooFewPoints(f"n={n} < 3")
    if not -1.0 < r < 1.0:
        raise ValueError("p_value requires |r| < 1")
    t_stat = r * math.sqrt(n - 2) / math.sqrt(1.0 - r * r)
    return float(2.0 * _student_t.sf(abs(t_stat), n - 2))


def fisher_ci(r: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Fisher-z confidence interval for a correlation coefficient."""
    if n < 4:
        raise TooFewPoints(f"n={n} < 4")
    if not -1.0 < r < 1.0:
        raise ValueError("fisher_ci requires |r| < 1")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must lie in (0, 1)")
    z = float(_norm.ppf((1.0 + level) / 2.0))
    half_width = z / math.sqrt(n - 3)
    center = math.atanh(r)
    return math.tanh(center - half_width), math.tanh(center + half_width)


def correlation_report(
    x: Sequence[float],
    y: Sequence[float],
    level: float = 0.95,
) -> CorrelationReport:
    """Pearson r with p-value, Fisher-z interval, and r-squared in one bundle.

    A perfectly correlated sample (|r| = 1 up to rounding) cannot carry a
    Fisher interval; the report then holds the point interval and is flagged
    degenerate.
    """
    r = pearson_r(x, y)
    n = len(x)
    if abs(r) >= 1.0:
        r = math.copysign(1.0, r)
        return CorrelationReport(
            r=r,
            n=n,
            p_two_tailed=0.0,
            ci_low=r,
            ci_high=r,
            r_squared=1.0,
            ci_degenerate=True,
        )
    low, high = fisher_ci(r, n, level)
    return CorrelationReport(
        r=r,
        n=n,
        p_two_tailed=p_value(r, n),
        ci_low=low,
        ci_high=high,
        r_squared=r * r,
    )


def indicator_correlation(
    indicator: IndicatorSeries,
    rates: LogRateSeries,
    level: float = 0.95,
) -> CorrelationReport:
    """Correlation between an indicator and log death rates over the inner
    join of their country sets, joined in ascending iso3 order."""
    common = sorted(
        (c for c in indicator.values if c in rates.values), key=lambda c: c.iso3
    )
    if len(common) < 3:
        raise InsufficientOverlap(
            f"only {len(common)} countries present in both series"
        )
    x = [indicator.values[c] for c in common]
    y = [rates.values[c] for c in common]
    return correlation_report(x, y, level=level)


def paired_series(
    x_by_country: Mapping[CountryId, float],
    y_by_country: Mapping[CountryId, float],
) -> tuple[list[CountryId], list[float], list[float]]:
    """Inner-join two country-keyed maps into aligned vectors (ascending iso3)."""
    common = sorted((c for c in x_by_country if c in y_by_country), key=lambda c: c.iso3)
    return (
        common,
        [x_by_country[c] for c in common],
        [y_by_country[c] for c in common],
    )
