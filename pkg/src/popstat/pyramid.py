"""Normalized age-sex population pyramids and the divergence metric between them.

A pyramid is a flat vector of proportions over (sex, age-group) bins. The
divergence of country P from reference Q is the Kullback-Leibler divergence
``sum_i P(i) * ln(P(i) / Q(i))`` evaluated after both distributions are
floored at a small smoothing constant and renormalized, which keeps the
metric finite when bins (typically the oldest strata) are empty.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    AllZero,
    BadAgeGroupLabel,
    KTooLarge,
    LengthMismatch,
    NegativeCount,
    UnknownReference,
)

#: Default floor applied to every bin before the log-ratio sum.
DEFAULT_SMOOTHING = 1e-9

_ISO3_RE = re.compile(r"^[A-Z]{3}$")


class Sex(str, Enum):
    MALE = "male"
    FEMALE = "female"


def default_age_groups() -> tuple[str, ...]:
    """Five-year age-group labels 0-4 through 95-99 plus the open 100+ stratum."""
    labels = [f"{lo}-{lo + 4}" for lo in range(0, 100, 5)]
    labels.append("100+")
    return tuple(labels)


@dataclass(frozen=True)
class BinScheme:
    """Layout of the proportion vector: male bins first, then female bins,
    each in ascending age order."""

    age_groups: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.age_groups:
            raise ValueError("bin scheme needs at least one age group")
        if len(set(self.age_groups)) != len(self.age_groups):
            raise ValueError("duplicate age-group labels in bin scheme")

    @property
    def n_age_groups(self) -> int:
        return len(self.age_groups)

    @property
    def n_bins(self) -> int:
        return 2 * len(self.age_groups)

    def age_index(self, label: str) -> int:
        try:
            return self.age_groups.index(label)
        except ValueError:
            raise BadAgeGroupLabel(f"unknown age-group label {label!r}") from None

    def flat_index(self, sex: Sex, age_group_index: int) -> int:
        if not 0 <= age_group_index < self.n_age_groups:
            raise ValueError(
                f"age_group_index {age_group_index} outside [0, {self.n_age_groups - 1}]"
            )
        offset = 0 if sex is Sex.MALE else self.n_age_groups
        return offset + age_group_index

    def bins(self) -> Iterator["AgeSexBin"]:
        for sex in (Sex.MALE, Sex.FEMALE):
            for i in range(self.n_age_groups):
                yield AgeSexBin(sex=sex, age_group_index=i)


DEFAULT_BIN_SCHEME = BinScheme(age_groups=default_age_groups())


@dataclass(frozen=True)
class AgeSexBin:
    """One (sex, age-group) cell of a pyramid."""

    sex: Sex
    age_group_index: int

    def __post_init__(self) -> None:
        if self.age_group_index < 0:
            raise ValueError("age_group_index must be non-negative")


@dataclass(frozen=True)
class CountryId:
    """ISO3-keyed country identity. Equality and hashing use the code only;
    the display name is carried along but never compared."""

    iso3: str
    canonical_name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not _ISO3_RE.match(self.iso3):
            raise ValueError(f"iso3 must match [A-Z]{{3}}, got {self.iso3!r}")

    @property
    def label(self) -> str:
        return self.canonical_name or self.iso3


@dataclass(frozen=True)
class PopulationPyramid:
    """Normalized age-sex distribution for one country-year.

    ``proportions`` is immutable, non-negative, and sums to 1 within 1e-9.
    Bin order follows :class:`BinScheme`: all male age groups ascending,
    then all female age groups ascending.
    """

    country: CountryId
    year: int
    proportions: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.proportions) < 2 or len(self.proportions) % 2:
            raise ValueError("proportions must hold an even number (>= 2) of bins")
        if any(p < 0 for p in self.proportions):
            raise NegativeCount("pyramid proportions must be non-negative")
        total = math.fsum(self.proportions)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"pyramid proportions sum to {total!r}, expected 1")

    @classmethod
    def from_counts(
        cls,
        country: CountryId,
        year: int,
        raw_counts: Sequence[float],
    ) -> "PopulationPyramid":
        return cls(country=country, year=year, proportions=normalize_pyramid(raw_counts))


@dataclass(frozen=True)
class DivergenceVector:
    """Divergence of every country from one fixed reference, in nats.

    ``values`` preserves ascending-iso3 insertion order and always contains
    the reference itself with value 0.
    """

    reference: CountryId
    values: dict[CountryId, float]

    def __post_init__(self) -> None:
        if self.reference not in self.values:
            raise UnknownReference(f"{self.reference.iso3} missing from its own vector")
        if abs(self.values[self.reference]) > 1e-12:
            raise ValueError("divergence of the reference from itself must be 0")
        if any(v < 0 for v in self.values.values()):
            raise ValueError("divergence values must be non-negative")


def normalize_pyramid(raw_counts: Sequence[float]) -> tuple[float, ...]:
    """Rescale raw bin counts to proportions that sum to 1.

    Already-normalized input (sum within 1e-12 of 1) is returned unchanged,
    which makes the operation idempotent and lets serialized pyramids
    round-trip bit-for-bit.
    """
    counts = [float(c) for c in raw_counts]
    if any(math.isnan(c) or math.isinf(c) for c in counts):
        raise ValueError("counts must be finite")
    if any(c < 0 for c in counts):
        raise NegativeCount("counts must be non-negative")
    total = math.fsum(counts)
    if total == 0.0:
        raise AllZero("all counts are zero")
    if abs(total - 1.0) <= 1e-12:
        return tuple(counts)
    return tuple(c / total for c in counts)


def _smoothed(proportions: Sequence[float], smoothing: float) -> np.ndarray:
    v = np.maximum(np.asarray(proportions, dtype=float), smoothing)
    return v / v.sum()


def pop_divergence(
    p: PopulationPyramid,
    q: PopulationPyramid,
    smoothing: float = DEFAULT_SMOOTHING,
) -> float:
    """Divergence of pyramid ``p`` from reference pyramid ``q`` in nats.

    Both distributions are floored at ``smoothing`` and renormalized before
    the log-ratio sum, so the result is finite for any valid pyramids and
    zero exactly when the smoothed distributions coincide. The summation
    runs in ascending bin order and is deterministic.
    """
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    if len(p.proportions) != len(q.proportions):
        raise LengthMismatch(
            f"pyramids have {len(p.proportions)} and {len(q.proportions)} bins"
        )
    pt = _smoothed(p.proportions, smoothing)
    qt = _smoothed(q.proportions, smoothing)
    total = float(np.sum(pt * np.log(pt / qt)))
    # Gibbs' inequality guarantees >= 0; near-identical inputs can round to
    # a tiny negative residue, which collapses to exact zero here.
    return total if total > 0.0 else 0.0


def divergence_vector(
    reference: CountryId,
    pyramids: Mapping[CountryId, PopulationPyramid],
    smoothing: float = DEFAULT_SMOOTHING,
) -> DivergenceVector:
    """Divergence of every pyramid in ``pyramids`` from ``reference``.

    Entries are computed and stored in ascending iso3 order so repeated runs
    are bit-identical regardless of the input mapping's iteration order.
    """
    if reference not in pyramids:
        raise UnknownReference(f"reference {reference.iso3} has no pyramid")
    q = pyramids[reference]
    values: dict[CountryId, float] = {}
    for country in sorted(pyramids, key=lambda c: c.iso3):
        values[country] = pop_divergence(pyramids[country], q, smoothing)
    return DivergenceVector(reference=reference, values=values)


def closest_countries(
    reference: CountryId,
    pyramids: Mapping[CountryId, PopulationPyramid],
    k: int,
    smoothing: float = DEFAULT_SMOOTHING,
) -> list[CountryId]:
    """The ``k`` countries whose pyramids diverge least from the reference.

    The reference itself is excluded. Ordering is ascending divergence with
    ties broken by ascending iso3.
    """
    if k < 1:
        raise ValueError("k must be positive")
    available = sum(1 for c in pyramids if c != reference)
    if k > available:
        raise KTooLarge(f"k={k} but only {available} countries besides the reference")
    vec = divergence_vector(reference, pyramids, smoothing)
    ranked = sorted(
        (value, country.iso3, country)
        for country, value in vec.values.items()
        if country != reference
    )
    return [country for _, _, country in ranked[:k]]
