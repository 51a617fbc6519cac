"""Seeded synthetic data: pyramids shaped like the classic expansive,
stationary, and constrictive archetypes, plus mortality tables whose log
rates are constructed to hit an exact target correlation with the
divergence vector of a chosen reference country. Everything here is pure
and deterministic given its seed, which makes desk-scale pipeline tests
possible without any real extracts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .errors import (
    BadFactor,
    DegenerateVariance,
    InsufficientCountries,
    UnknownReference,
)
from .ingestion import CauseId, MortalityEntry, MortalityTable
from .pyramid import (
    DEFAULT_BIN_SCHEME,
    DEFAULT_SMOOTHING,
    BinScheme,
    CountryId,
    PopulationPyramid,
    divergence_vector,
    normalize_pyramid,
)

#: Largest allowed per-bin jitter; keeps expansive pyramids strictly
#: decreasing for factors up to 0.95 (0.95 * e**(2*0.02) < 1).
MAX_JITTER = 0.02

#: Geometric factor at the youthful extreme of the generated transition sweep.
_SWEEP_EXTREME_FACTOR = 0.78


class PyramidShape(str, Enum):
    EXPANSIVE = "expansive"
    STATIONARY = "stationary"
    CONSTRICTIVE = "constrictive"


@dataclass(frozen=True)
class PyramidShapeSpec:
    """Parameters for one synthetic pyramid.

    ``decay_or_growth`` is the per-stratum geometric factor in (0, 1]:
    expansive pyramids lose mass by that factor per age group moving old-ward,
    constrictive ones gain it, and stationary ones stay uniform below a
    cutoff and then decay. A factor of 1 degenerates to the uniform pyramid
    for every shape. ``jitter`` adds seeded multiplicative noise per age
    group (shared by both sexes) of at most ``MAX_JITTER``.
    """

    shape: PyramidShape
    decay_or_growth: float
    sex_ratio: float = 0.5
    seed: int = 0
    jitter: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.decay_or_growth <= 1.0:
            raise BadFactor(
                f"decay_or_growth {self.decay_or_growth!r} outside (0, 1]"
            )
        if not 0.0 < self.sex_ratio < 1.0:
            raise BadFactor(f"sex_ratio {self.sex_ratio!r} outside (0, 1)")
        if not 0.0 <= self.jitter <= MAX_JITTER:
            raise BadFactor(f"jitter {self.jitter!r} outside [0, {MAX_JITTER}]")


def _age_mass(spec: PyramidShapeSpec, n_groups: int) -> np.ndarray:
    f = spec.decay_or_growth
    g = np.arange(n_groups, dtype=float)
    if spec.shape is PyramidShape.EXPANSIVE:
        mass = f ** g
    elif spec.shape is PyramidShape.CONSTRICTIVE:
        mass = f ** (n_groups - 1 - g)
    else:
        # Uniform through the working ages, geometric decay in the last
        # third of the strata (the elderly tail).
        cutoff = max(1, n_groups - n_groups // 3)
        mass = np.where(g < cutoff, 1.0, f ** (g - cutoff + 1))
    if spec.jitter > 0.0:
        rng = np.random.default_rng(spec.seed)
        mass = mass * np.exp(rng.uniform(-spec.jitter, spec.jitter, n_groups))
    return mass


def generate_pyramid(
    spec: PyramidShapeSpec,
    country: CountryId = CountryId("AAA", "Synthetic AAA"),
    year: int = 2021,
    bin_scheme: BinScheme = DEFAULT_BIN_SCHEME,
) -> PopulationPyramid:
    """Build one valid normalized pyramid from a shape spec.

    With jitter 0 the output is the exact normalized geometric profile, so
    expansive pyramids with factor < 0.95 have strictly decreasing age-group
    mass; with jitter up to ``MAX_JITTER`` that monotonicity still holds.
    """
    mass = _age_mass(spec, bin_scheme.n_age_groups)
    male = mass * spec.sex_ratio
    female = mass * (1.0 - spec.sex_ratio)
    counts = np.concatenate([male, female])
    return PopulationPyramid(
        country=country,
        year=year,
        proportions=normalize_pyramid(counts.tolist()),
    )


def synthetic_iso3(index: int) -> str:
    """Deterministic ISO3-shaped code for the index-th synthetic country."""
    if not 0 <= index < 26 ** 3:
        raise ValueError("index outside the 3-letter code space")
    a, rest = divmod(index, 26 * 26)
    b, c = divmod(rest, 26)
    return chr(65 + a) + chr(65 + b) + chr(65 + c)


def generate_countries(
    n: int,
    seed: int,
    year: int = 2021,
    bin_scheme: BinScheme = DEFAULT_BIN_SCHEME,
    shape: PyramidShape | None = None,
    factor: float | None = None,
    jitter: float = 0.01,
) -> dict[CountryId, PopulationPyramid]:
    """Generate ``n`` distinct synthetic countries.

    By default the countries sweep the demographic transition: stratified
    positions map onto geometric profiles running from strongly expansive
    through uniform to strongly constrictive, with per-country jitter.
    Passing ``shape`` (and optionally ``factor``) pins every country to one
    archetype instead.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    pyramids: dict[CountryId, PopulationPyramid] = {}
    for i in range(n):
        iso3 = synthetic_iso3(i)
        country = CountryId(iso3=iso3, canonical_name=f"Synthetic {iso3}")
        sex_ratio = float(rng.uniform(0.47, 0.53))
        bin_seed = int(rng.integers(0, 2**31 - 1))
        if shape is not None:
            spec = PyramidShapeSpec(
                shape=shape,
                decay_or_growth=factor if factor is not None else 0.9,
                sex_ratio=sex_ratio,
                seed=bin_seed,
                jitter=jitter,
            )
        else:
            position = (i + float(rng.uniform(0.2, 0.8))) / n
            log_f = math.log(_SWEEP_EXTREME_FACTOR) * (1.0 - 2.0 * position)
            f = math.exp(log_f)
            if f <= 1.0:
                spec = PyramidShapeSpec(
                    shape=PyramidShape.EXPANSIVE, decay_or_growth=f,
                    sex_ratio=sex_ratio, seed=bin_seed, jitter=jitter,
                )
            else:
                spec = PyramidShapeSpec(
                    shape=PyramidShape.CONSTRICTIVE, decay_or_growth=1.0 / f,
                    sex_ratio=sex_ratio, seed=bin_seed, jitter=jitter,
                )
        pyramids[country] = generate_pyramid(
            spec, country=country, year=year, bin_scheme=bin_scheme
        )
    return pyramids


def generate_mortality(
    pyramids: Mapping[CountryId, PopulationPyramid],
    target_reference: CountryId,
    target_r: float,
    noise_seed: int,
    cause: CauseId | None = None,
    year: int = 2021,
    smoothing: float = DEFAULT_SMOOTHING,
    base_log_rate: float = math.log(500.0),
    log_spread: float = 1.2,
) -> MortalityTable:
    """Mortality table whose log rates hit ``target_r`` against the
    divergence vector of ``target_reference``.

    The log rates are an affine image of ``r * u + sqrt(1 - r^2) * e`` where
    ``u`` is the standardized divergence vector and ``e`` a seeded random
    direction orthogonal to it, so the realized correlation equals the
    target up to floating-point rounding. Deaths and populations are emitted
    (rather than precomputed rates) so the full log-rate path is exercised
    downstream.
    """
    if not -1.0 <= target_r <= 1.0:
        raise ValueError(f"target_r {target_r!r} outside [-1, 1]")
    if target_reference not in pyramids:
        raise UnknownReference(f"{target_reference.iso3} has no pyramid")
    if len(pyramids) < 4:
        raise InsufficientCountries(f"need >= 4 countries, got {len(pyramids)}")

    countries = sorted(pyramids, key=lambda c: c.iso3)
    vec = divergence_vector(target_reference, pyramids, smoothing)
    d = np.array([vec.values[c] for c in countries])
    centered = d - d.mean()
    norm_d = float(np.linalg.norm(centered))
    if norm_d == 0.0:
        raise DegenerateVariance("all pyramids are identical to the reference")
    u = centered / norm_d

    rng = np.random.default_rng(noise_seed)
    for _ in range(16):
        eps = rng.standard_normal(len(countries))
        eps = eps - eps.mean()
        eps = eps - float(np.dot(eps, u)) * u
        norm_e = float(np.linalg.norm(eps))
        if norm_e > 1e-9:
            break
    else:  # pragma: no cover - would need 16 consecutive degenerate draws
        raise DegenerateVariance("could not draw a noise direction")
    e = eps / norm_e

    y_unit = target_r * u + math.sqrt(max(0.0, 1.0 - target_r * target_r)) * e
    scale = log_spread * math.sqrt(len(countries) - 1)
    log_rates = base_log_rate + scale * y_unit

    populations = 10.0 ** rng.uniform(6.0, 8.5, len(countries))
    entries: dict[CountryId, MortalityEntry] = {}
    for i, country in enumerate(countries):
        rate = math.exp(float(log_rates[i]))
        population = float(populations[i])
        entries[country] = MortalityEntry(
            deaths=rate * population / 1e6, population=population
        )
    table_cause = cause or CauseId(id="synthetic", name="Synthetic cause", level=1)
    return MortalityTable(cause=table_cause, year=year, entries=entries)
