"""Brute-force reference-country tuning and per-cause result rows.

For a cause, every country that has both a pyramid and a usable death rate
is a candidate reference. Each candidate's divergence vector is correlated
against the log death rates and the candidate with the strongest
correlation magnitude wins (the sign is kept in the report). Ties break on
ascending ISO3 so the search is deterministic under any input ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    AllDegenerate,
    DegenerateVariance,
    InsufficientOverlap,
    PopstatError,
    UnknownCause,
    ZeroDeaths,
)
from .ingestion import CauseId, MortalityTable
from .pyramid import (
    DEFAULT_SMOOTHING,
    CountryId,
    PopulationPyramid,
    closest_countries,
    divergence_vector,
)
from .stats import (
    CorrelationReport,
    LogRateSeries,
    correlation_report,
    ln_death_rate,
    pearson_r,
)


@dataclass(frozen=True)
class PoPStatResult:
    """One reporting row: tuned reference, correlation, nearest neighbours."""

    cause: CauseId
    reference: CountryId
    report: CorrelationReport
    closest: tuple[CountryId, CountryId, CountryId]
    dropped_countries: int

    def __post_init__(self) -> None:
        if len(self.closest) != 3:
            raise ValueError("closest must hold exactly 3 countries")
        if self.reference in self.closest:
            raise ValueError("closest countries cannot include the reference")


@dataclass(frozen=True)
class BatchItem:
    """Outcome for one cause in a batch run: a result or an error string."""

    cause: CauseId
    result: PoPStatResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def tune_reference(
    pyramids: Mapping[CountryId, PopulationPyramid],
    rates: LogRateSeries,
    smoothing: float = DEFAULT_SMOOTHING,
    level: float = 0.95,
    candidates: Iterable[CountryId] | None = None,
) -> tuple[CountryId, CorrelationReport]:
    """Pick the reference country whose divergence vector correlates most
    strongly (by |r|) with the log death rates.

    The correlation sample is the overlap of ``pyramids`` and ``rates``; the
    reference itself stays in the sample with divergence zero. ``candidates``
    optionally restricts which overlap countries may serve as reference.
    """
    common = sorted((c for c in pyramids if c in rates.values), key=lambda c: c.iso3)
    if len(common) < 3:
        raise InsufficientOverlap(
            f"only {len(common)} countries have both a pyramid and a rate"
        )
    sample = {c: pyramids[c] for c in common}
    y = [rates.values[c] for c in common]

    if candidates is None:
        pool = common
    else:
        wanted = set(candidates)
        pool = [c for c in common if c in wanted]
        if not pool:
            raise InsufficientOverlap("no candidate is present in the overlap")

    best_key: tuple[float, str] | None = None
    best: tuple[CountryId, list[float]] | None = None
    for candidate in pool:
        vec = divergence_vector(candidate, sample, smoothing)
        x = [vec.values[c] for c in common]
        try:
            r = pearson_r(x, y)
        except DegenerateVariance:
            continue
        key = (-abs(r), candidate.iso3)
        if best_key is None or key < best_key:
            best_key = key
            best = (candidate, x)
    if best is None:
        raise AllDegenerate("every candidate produced a constant sample")
    reference, x = best
    return reference, correlation_report(x, y, level=level)


def log_rate_sample(
    table: MortalityTable,
    pyramids: Mapping[CountryId, PopulationPyramid],
) -> tuple[dict[CountryId, float], list[CountryId]]:
    """Log death rates for every country with both a pyramid and an entry.

    Countries whose rate is zero have no log rate and are returned in the
    dropped list instead; their count feeds the result row.
    """
    available = sorted(
        (c for c in pyramids if c in table.entries), key=lambda c: c.iso3
    )
    rates: dict[CountryId, float] = {}
    dropped: list[CountryId] = []
    for country in available:
        entry = table.entries[country]
        try:
            if entry.rate_per_million is not None:
                if entry.rate_per_million == 0:
                    raise ZeroDeaths("zero rate")
                rates[country] = math.log(entry.rate_per_million)
            else:
                rates[country] = ln_death_rate(entry.deaths, entry.population)
        except ZeroDeaths:
            dropped.append(country)
    return rates, dropped


def popstat(
    cause: CauseId,
    pyramids: Mapping[CountryId, PopulationPyramid],
    tables: Sequence[MortalityTable],
    smoothing: float = DEFAULT_SMOOTHING,
    level: float = 0.95,
) -> PoPStatResult:
    """Full pipeline for one cause: tune the reference, then report the
    correlation and the three countries closest to that reference."""
    table = next((t for t in tables if t.cause.id == cause.id), None)
    if table is None:
        raise UnknownCause(f"no mortality table for cause {cause.id!r}")
    rates, dropped = log_rate_sample(table, pyramids)
    if len(rates) < 3:
        raise InsufficientOverlap(
            f"cause {cause.id!r} usable in only {len(rates)} countries"
        )
    sample_pyramids = {c: pyramids[c] for c in rates}
    series = LogRateSeries(cause=cause, values=rates)
    reference, report = tune_reference(sample_pyramids, series, smoothing, level)
    nearest = closest_countries(reference, sample_pyramids, k=3, smoothing=smoothing)
    return PoPStatResult(
        cause=cause,
        reference=reference,
        report=report,
        closest=(nearest[0], nearest[1], nearest[2]),
        dropped_countries=len(dropped),
    )


def popstat_batch(
    causes: Sequence[CauseId],
    pyramids: Mapping[CountryId, PopulationPyramid],
    tables: Sequence[MortalityTable],
    smoothing: float = DEFAULT_SMOOTHING,
    level: float = 0.95,
) -> list[BatchItem]:
    """Run :func:`popstat` per cause, recording per-cause failures instead of
    aborting. Output order follows the input cause order."""
    items: list[BatchItem] = []
    for cause in causes:
        try:
            result = popstat(cause, pyramids, tables, smoothing, level)
        except PopstatError as exc:
            items.append(BatchItem(cause=cause, error=f"{type(exc).__name__}: {exc}"))
        else:
            items.append(BatchItem(cause=cause, result=result))
    return items
