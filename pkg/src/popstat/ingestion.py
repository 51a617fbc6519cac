"""Delimited-file ingestion: population pyramids, cause-level mortality,
scalar indicators, and country-name aliases.

File schemas (comma-delimited, UTF-8, header row required):

* population: ``iso3,name,year,sex,age_group,count``
* mortality:  ``cause_id,cause_name,level,parent_id,iso3,year,deaths,population``
  (``population`` may be replaced or supplemented by ``rate_per_million``)
* indicator:  ``iso3,value``
* alias:      ``name,iso3``

Parsers never drop rows silently: every data row is either accepted,
skipped by an explicit filter (year or level), or recorded in the parse
report with its file line number.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    MissingColumn,
    NegativeDeaths,
    NonpositivePopulation,
    UnknownLevel,
)
from .pyramid import (
    DEFAULT_BIN_SCHEME,
    BinScheme,
    CountryId,
    PopulationPyramid,
    Sex,
    normalize_pyramid,
)
from .stats import IndicatorSeries

_ISO3_RE = re.compile(r"^[A-Z]{3}$")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CauseId:
    """Node of the cause hierarchy. Level-1 causes are roots; levels 2 and 3
    point at a parent exactly one level up."""

    id: str
    name: str
    level: int
    parent: "CauseId | None" = None

    def __post_init__(self) -> None:
        if self.level not in (1, 2, 3):
            raise UnknownLevel(f"cause level {self.level} outside 1..3")
        if self.level == 1 and self.parent is not None:
            raise ValueError(f"level-1 cause {self.id} cannot have a parent")
        if self.level > 1:
            if self.parent is None:
                raise ValueError(f"level-{self.level} cause {self.id} needs a parent")
            if self.parent.level != self.level - 1:
                raise ValueError(
                    f"cause {self.id} at level {self.level} has a parent at "
                    f"level {self.parent.level}"
                )


@dataclass(frozen=True)
class MortalityEntry:
    """Deaths and population for one country, or a precomputed rate."""

    deaths: float | None = None
    population: float | None = None
    rate_per_million: float | None = None

    def __post_init__(self) -> None:
        if self.rate_per_million is not None:
            if self.rate_per_million < 0:
                raise NegativeDeaths("rate_per_million must be non-negative")
            return
        if self.deaths is None or self.population is None:
            raise ValueError("entry needs deaths+population or rate_per_million")
        if self.deaths < 0:
            raise NegativeDeaths(f"deaths {self.deaths!r} must be non-negative")
        if self.population <= 0:
            raise NonpositivePopulation(
                f"population {self.population!r} must be positive"
            )

    def resolved_rate(self) -> float:
        """Deaths per million, whichever representation the entry holds."""
        if self.rate_per_million is not None:
            return self.rate_per_million
        assert self.deaths is not None and self.population is not None
        return self.deaths / self.population * 1e6


@dataclass(frozen=True)
class MortalityTable:
    """Per-country mortality for one cause in one year."""

    cause: CauseId
    year: int
    entries: dict[CountryId, MortalityEntry]


@dataclass(frozen=True)
class CountryAliasMap:
    """Free-text country spellings mapped onto ISO3 codes."""

    entries: dict[str, str]

    def __post_init__(self) -> None:
        for name, iso3 in self.entries.items():
            if not _ISO3_RE.match(iso3):
                raise ValueError(f"alias {name!r} targets malformed iso3 {iso3!r}")

    def resolve(self, raw: str) -> str | None:
        """ISO3 for a raw country cell, or None if it cannot be resolved."""
        if _ISO3_RE.match(raw):
            return raw
        return self.entries.get(raw)


EMPTY_ALIASES = CountryAliasMap(entries={})


# ---------------------------------------------------------------------------
# parse reporting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RowIssue:
    """One rejected row (or country-level rejection) with its location."""

    line: int | None  # 1-based file line; header is line 1
    where: str        # raw country key or cause id, "" when not applicable
    code: str         # e.g. "BadAgeGroupLabel", "NegativeDeaths"
    message: str


@dataclass
class ParseReport:
    """Row accounting for one parsed file.

    Invariant: ``rows_parsed == rows_accepted + rows_errored + rows_skipped``.
    Skipped rows are those excluded by an explicit year or level filter.
    """

    path: str
    rows_parsed: int = 0
    rows_accepted: int = 0
    rows_errored: int = 0
    rows_skipped: int = 0
    issues: list[RowIssue] = field(default_factory=list)

    def add_issue(self, line: int | None, where: str, code: str, message: str) -> None:
        self.issues.append(RowIssue(line=line, where=where, code=code, message=message))

    def codes(self) -> list[str]:
        return [issue.code for issue in self.issues]


def _require_columns(fieldnames: Sequence[str] | None, required: Iterable[str], path: str) -> None:
    present = set(fieldnames or ())
    missing = [c for c in required if c not in present]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")


def _resolve_country(raw: str, aliases: CountryAliasMap) -> str | None:
    return aliases.resolve(raw.strip())


# ---------------------------------------------------------------------------
# population
# ---------------------------------------------------------------------------

def parse_population_file(
    path: str | Path,
    year: int = 2021,
    bin_scheme: BinScheme = DEFAULT_BIN_SCHEME,
    aliases: CountryAliasMap = EMPTY_ALIASES,
) -> tuple[dict[CountryId, PopulationPyramid], ParseReport]:
    """Read one normalized pyramid per country for the requested year.

    Bins absent from the file default to zero. A country whose counts are all
    zero is rejected as a whole and every one of its rows is accounted as
    errored.
    """
    path = Path(path)
    report = ParseReport(path=str(path))
    counts: dict[str, list[float]] = {}
    names: dict[str, str] = {}
    filled: dict[str, set[int]] = {}
    country_rows: dict[str, int] = {}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(
            reader.fieldnames,
            ("iso3", "name", "year", "sex", "age_group", "count"),
            str(path),
        )
        for line, row in enumerate(reader, start=2):
            report.rows_parsed += 1
            raw_key = (row["iso3"] or "").strip()
            try:
                row_year = int((row["year"] or "").strip())
            except ValueError:
                report.rows_errored += 1
                report.add_issue(line, raw_key, "BadNumber", "year is not an integer")
                continue
            if row_year != year:
                report.rows_skipped += 1
                continue
            iso3 = _resolve_country(raw_key, aliases)
            if iso3 is None:
                report.rows_errored += 1
                report.add_issue(
                    line, raw_key, "UnknownCountry",
                    f"{raw_key!r} is not an ISO3 code and has no alias",
                )
                continue
            sex_label = (row["sex"] or "").strip().lower()
            try:
                sex = Sex(sex_label)
            except ValueError:
                report.rows_errored += 1
                report.add_issue(line, iso3, "BadSexLabel", f"unknown sex {sex_label!r}")
                continue
            age_label = (row["age_group"] or "").strip()
            if age_label not in bin_scheme.age_groups:
                report.rows_errored += 1
                report.add_issue(
                    line, iso3, "BadAgeGroupLabel",
                    f"unknown age-group label {age_label!r}",
                )
                continue
            try:
                count = float((row["count"] or "").strip())
            except ValueError:
                report.rows_errored += 1
                report.add_issue(line, iso3, "BadNumber", "count is not numeric")
                continue
            if not math.isfinite(count):
                report.rows_errored += 1
                report.add_issue(line, iso3, "BadNumber", "count is not finite")
                continue
            if count < 0:
                report.rows_errored += 1
                report.add_issue(line, iso3, "NegativeCount", f"count {count!r} < 0")
                continue
            idx = bin_scheme.flat_index(sex, bin_scheme.age_index(age_label))
            bins = filled.setdefault(iso3, set())
            if idx in bins:
                report.rows_errored += 1
                report.add_issue(
                    line, iso3, "DuplicateBin",
                    f"bin ({sex.value}, {age_label}) appears twice",
                )
                continue
            bins.add(idx)
            counts.setdefault(iso3, [0.0] * bin_scheme.n_bins)[idx] = count
            names.setdefault(iso3, (row["name"] or "").strip() or iso3)
            country_rows[iso3] = country_rows.get(iso3, 0) + 1
            report.rows_accepted += 1

    pyramids: dict[CountryId, PopulationPyramid] = {}
    for iso3 in sorted(counts):
        vector = counts[iso3]
        if all(c == 0.0 for c in vector):
            report.rows_accepted -= country_rows[iso3]
            report.rows_errored += country_rows[iso3]
            report.add_issue(None, iso3, "AllZero", "every count for the country is zero")
            continue
        country = CountryId(iso3=iso3, canonical_name=names[iso3])
        pyramids[country] = PopulationPyramid(
            country=country, year=year, proportions=normalize_pyramid(vector)
        )
    return pyramids, report


def write_population_file(
    path: str | Path,
    pyramids: Mapping[CountryId, PopulationPyramid],
    bin_scheme: BinScheme = DEFAULT_BIN_SCHEME,
) -> None:
    """Serialize pyramids back into the population schema at full precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iso3", "name", "year", "sex", "age_group", "count"])
        for country in sorted(pyramids, key=lambda c: c.iso3):
            pyramid = pyramids[country]
            for sex in (Sex.MALE, Sex.FEMALE):
                for i, label in enumerate(bin_scheme.age_groups):
                    value = pyramid.proportions[bin_scheme.flat_index(sex, i)]
                    writer.writerow(
                        [country.iso3, country.label, pyramid.year, sex.value,
                         label, repr(value)]
                    )


# ---------------------------------------------------------------------------
# mortality
# ---------------------------------------------------------------------------

@dataclass
class MortalityParseResult:
    tables: list[MortalityTable]
    hierarchy: dict[str, CauseId]
    report: ParseReport


def parse_mortality_file(
    path: str | Path,
    level_filter: int | None = None,
    aliases: CountryAliasMap = EMPTY_ALIASES,
) -> MortalityParseResult:
    """Read mortality rows into one table per (cause, year).

    The cause hierarchy is assembled from every row regardless of
    ``level_filter``; the filter only restricts which tables are built.
    A cause whose definition is invalid (unknown level, missing or
    wrong-level parent) is excluded together with all of its rows.
    """
    path = Path(path)
    report = ParseReport(path=str(path))

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or ())
        _require_columns(
            reader.fieldnames,
            ("cause_id", "cause_name", "level", "parent_id", "iso3", "year", "deaths"),
            str(path),
        )
        has_population = "population" in fields
        has_rate = "rate_per_million" in fields
        if not has_population and not has_rate:
            raise MissingColumn(
                f"{path}: needs a population or rate_per_million column"
            )

        defs: dict[str, tuple[str, int, str]] = {}
        pending: list[tuple[int, str, int, str, float | None, float | None, float | None]] = []
        for line, row in enumerate(reader, start=2):
            report.rows_parsed += 1
            cause_id = (row["cause_id"] or "").strip()
            if not cause_id:
                report.rows_errored += 1
                report.add_issue(line, "", "BadCauseDefinition", "empty cause_id")
                continue
            try:
                level = int((row["level"] or "").strip())
            except ValueError:
                report.rows_errored += 1
                report.add_issue(line, cause_id, "UnknownLevel", "level is not an integer")
                continue
            if level not in (1, 2, 3):
                report.rows_errored += 1
                report.add_issue(line, cause_id, "UnknownLevel", f"level {level} outside 1..3")
                continue
            definition = (
                (row["cause_name"] or "").strip(),
                level,
                (row["parent_id"] or "").strip(),
            )
            known = defs.setdefault(cause_id, definition)
            if known != definition:
                report.rows_errored += 1
                report.add_issue(
                    line, cause_id, "BadCauseDefinition",
                    "cause redefined with a different name, level, or parent",
                )
                continue
            try:
                year = int((row["year"] or "").strip())
            except ValueError:
                report.rows_errored += 1
                report.add_issue(line, cause_id, "BadNumber", "year is not an integer")
                continue
            iso3 = _resolve_country((row["iso3"] or "").strip(), aliases)
            if iso3 is None:
                report.rows_errored += 1
                report.add_issue(
                    line, (row["iso3"] or "").strip(), "UnknownCountry",
                    "country cell is not an ISO3 code and has no alias",
                )
                continue

            rate_cell = (row.get("rate_per_million") or "").strip() if has_rate else ""
            deaths_cell = (row["deaths"] or "").strip()
            pop_cell = (row.get("population") or "").strip() if has_population else ""
            rate = deaths = population = None
            try:
                if rate_cell:
                    rate = float(rate_cell)
                    if rate < 0:
                        raise NegativeDeaths(f"rate {rate!r} < 0")
                else:
                    deaths = float(deaths_cell)
                    population = float(pop_cell)
                    if deaths < 0:
                        raise NegativeDeaths(f"deaths {deaths!r} < 0")
                    if population <= 0:
                        raise NonpositivePopulation(f"population {population!r} <= 0")
            except NegativeDeaths as exc:
                report.rows_errored += 1
                report.add_issue(line, iso3, "NegativeDeaths", str(exc))
                continue
            except NonpositivePopulation as exc:
                report.rows_errored += 1
                report.add_issue(line, iso3, "NonpositivePopulation", str(exc))
                continue
            except ValueError:
                report.rows_errored += 1
                report.add_issue(
                    line, iso3, "BadNumber",
                    "deaths/population (or rate_per_million) is not numeric",
                )
                continue
            if level_filter is not None and level != level_filter:
                report.rows_skipped += 1
                continue
            pending.append((line, cause_id, year, iso3, deaths, population, rate))

    hierarchy: dict[str, CauseId] = {}
    bad_causes: set[str] = set()
    for level in (1, 2, 3):
        for cause_id in sorted(defs):
            name, cause_level, parent_id = defs[cause_id]
            if cause_level != level or cause_id in bad_causes:
                continue
            if level == 1:
                if parent_id:
                    bad_causes.add(cause_id)
                    report.add_issue(
                        None, cause_id, "BadCauseDefinition",
                        "level-1 cause declares a parent",
                    )
                    continue
                hierarchy[cause_id] = CauseId(id=cause_id, name=name, level=1)
                continue
            parent = hierarchy.get(parent_id)
            if parent is None or parent.level != level - 1:
                bad_causes.add(cause_id)
                report.add_issue(
                    None, cause_id, "UnknownParent",
                    f"parent {parent_id!r} missing or not at level {level - 1}",
                )
                continue
            hierarchy[cause_id] = CauseId(id=cause_id, name=name, level=level, parent=parent)

    grouped: dict[tuple[str, int], dict[CountryId, MortalityEntry]] = {}
    for line, cause_id, year, iso3, deaths, population, rate in pending:
        if cause_id in bad_causes:
            report.rows_errored += 1
            report.add_issue(
                line, cause_id, "BadCauseDefinition",
                "row belongs to a cause with an invalid definition",
            )
            continue
        entries = grouped.setdefault((cause_id, year), {})
        country = CountryId(iso3=iso3, canonical_name=iso3)
        if country in entries:
            report.rows_errored += 1
            report.add_issue(
                line, iso3, "DuplicateCountry",
                f"country repeated for cause {cause_id}, year {year}",
            )
            continue
        entries[country] = MortalityEntry(
            deaths=deaths, population=population, rate_per_million=rate
        )
        report.rows_accepted += 1

    tables = [
        MortalityTable(
            cause=hierarchy[cause_id],
            year=year,
            entries={c: grouped[(cause_id, year)][c]
                     for c in sorted(grouped[(cause_id, year)], key=lambda c: c.iso3)},
        )
        for cause_id, year in sorted(grouped)
    ]
    return MortalityParseResult(tables=tables, hierarchy=hierarchy, report=report)


def write_mortality_file(path: str | Path, tables: Iterable[MortalityTable]) -> None:
    """Serialize mortality tables into the mortality schema at full precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["cause_id", "cause_name", "level", "parent_id", "iso3", "year",
             "deaths", "population", "rate_per_million"]
        )
        for table in sorted(tables, key=lambda t: (t.cause.id, t.year)):
            cause = table.cause
            parent_id = cause.parent.id if cause.parent else ""
            for country in sorted(table.entries, key=lambda c: c.iso3):
                entry = table.entries[country]
                writer.writerow(
                    [cause.id, cause.name, cause.level, parent_id, country.iso3,
                     table.year,
                     "" if entry.deaths is None else repr(entry.deaths),
                     "" if entry.population is None else repr(entry.population),
                     "" if entry.rate_per_million is None else repr(entry.rate_per_million)]
                )


# ---------------------------------------------------------------------------
# indicators and aliases
# ---------------------------------------------------------------------------

def parse_indicator_file(
    path: str | Path,
    indicator_name: str,
    aliases: CountryAliasMap = EMPTY_ALIASES,
) -> tuple[IndicatorSeries, ParseReport]:
    """Read one scalar value per country; bad rows are reported, others kept."""
    path = Path(path)
    report = ParseReport(path=str(path))
    values: dict[CountryId, float] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("iso3", "value"), str(path))
        for line, row in enumerate(reader, start=2):
            report.rows_parsed += 1
            raw_key = (row["iso3"] or "").strip()
            iso3 = _resolve_country(raw_key, aliases)
            if iso3 is None:
                report.rows_errored += 1
                report.add_issue(
                    line, raw_key, "UnknownCountry",
                    f"{raw_key!r} is not an ISO3 code and has no alias",
                )
                continue
            cell = (row["value"] or "").strip()
            try:
                value = float(cell)
            except ValueError:
                report.rows_errored += 1
                report.add_issue(line, iso3, "BadNumber", f"value {cell!r} is not numeric")
                continue
            if not math.isfinite(value):
                report.rows_errored += 1
                report.add_issue(line, iso3, "BadNumber", "value is not finite")
                continue
            country = CountryId(iso3=iso3, canonical_name=iso3)
            if country in values:
                report.rows_errored += 1
                report.add_issue(line, iso3, "DuplicateCountry", "country repeated")
                continue
            values[country] = value
            report.rows_accepted += 1
    ordered = {c: values[c] for c in sorted(values, key=lambda c: c.iso3)}
    return IndicatorSeries(name=indicator_name, values=ordered), report


def write_indicator_file(path: str | Path, series: IndicatorSeries) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iso3", "value"])
        for country in sorted(series.values, key=lambda c: c.iso3):
            writer.writerow([country.iso3, repr(series.values[country])])


def parse_alias_file(path: str | Path) -> tuple[CountryAliasMap, ParseReport]:
    """Read free-text country name to ISO3 mappings."""
    path = Path(path)
    report = ParseReport(path=str(path))
    entries: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("name", "iso3"), str(path))
        for line, row in enumerate(reader, start=2):
            report.rows_parsed += 1
            name = (row["name"] or "").strip()
            iso3 = (row["iso3"] or "").strip()
            if not name or not _ISO3_RE.match(iso3):
                report.rows_errored += 1
                report.add_issue(line, name, "BadAlias", f"bad alias row {name!r} -> {iso3!r}")
                continue
            if name in entries and entries[name] != iso3:
                report.rows_errored += 1
                report.add_issue(
                    line, name, "BadAlias", f"{name!r} maps to both {entries[name]} and {iso3}"
                )
                continue
            entries[name] = iso3
            report.rows_accepted += 1
    return CountryAliasMap(entries=entries), report


# ---------------------------------------------------------------------------
# joining
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JoinReport:
    """Countries that fell out of the inner join, by source side."""

    only_in_pyramids: tuple[str, ...]
    only_in_tables: tuple[str, ...]
    n_joined: int


@dataclass(frozen=True)
class JoinResult:
    pyramids: dict[CountryId, PopulationPyramid]
    tables: list[MortalityTable]
    report: JoinReport


def join_countries(
    pyramids: Mapping[CountryId, PopulationPyramid],
    tables: Sequence[MortalityTable],
    aliases: CountryAliasMap = EMPTY_ALIASES,
) -> JoinResult:
    """Inner-join pyramids and mortality tables on ISO3.

    A table country absent from the pyramid set gets one rescue attempt
    through the alias map via its display name (covers tables assembled
    with placeholder codes for unrecognized country spellings). The join
    report lists ISO3 codes present on exactly one side.
    """
    pyramid_iso3 = {c.iso3 for c in pyramids}

    rekeyed_tables: list[MortalityTable] = []
    table_iso3: set[str] = set()
    for table in tables:
        entries: dict[CountryId, MortalityEntry] = {}
        for country, entry in table.entries.items():
            key = country
            if country.iso3 not in pyramid_iso3:
                target = aliases.entries.get(country.canonical_name)
                if target and target in pyramid_iso3:
                    key = CountryId(iso3=target, canonical_name=country.canonical_name)
            entries[key] = entry
        rekeyed_tables.append(
            MortalityTable(cause=table.cause, year=table.year, entries=entries)
        )
        table_iso3.update(c.iso3 for c in entries)

    joined = pyramid_iso3 & table_iso3
    result_pyramids = {
        c: p for c, p in sorted(pyramids.items(), key=lambda kv: kv[0].iso3)
        if c.iso3 in joined
    }
    result_tables = [
        MortalityTable(
            cause=t.cause,
            year=t.year,
            entries={c: e for c, e in sorted(t.entries.items(), key=lambda kv: kv[0].iso3)
                     if c.iso3 in joined},
        )
        for t in rekeyed_tables
    ]
    report = JoinReport(
        only_in_pyramids=tuple(sorted(pyramid_iso3 - table_iso3)),
        only_in_tables=tuple(sorted(table_iso3 - pyramid_iso3)),
        n_joined=len(joined),
    )
    return JoinResult(pyramids=result_pyramids, tables=result_tables, report=report)
