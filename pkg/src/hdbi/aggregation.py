"""Regional aggregation and decade summaries.

Countries are grouped into seven world regions built from UN geoscheme
subregions. Regional supplies are population-weighted per-capita means;
decade HDBI summaries are unweighted means over country-years with a
normal-approximation 95% interval.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .core import REPORTING_GROUPS, FoodGroupSupply, HdbiScore, total_energy
from .errors import DataError, EmptyBin, MissingColumn, MissingPopulation, UnassignedCountry
from .fmt import read_csv

WORLD = "World"

REGIONS: tuple[str, ...] = (
    "East Asia & Pacific",
    "Europe & Central Asia",
    "Latin America & Caribbean",
    "North America",
    "South Asia",
    "Sub-Saharan Africa",
    "Western Asia & North Africa",
)

SUBREGION_TO_REGION: Mapping[str, str] = MappingProxyType(
    {
        "Eastern Asia": "East Asia & Pacific",
        "South-eastern Asia": "East Asia & Pacific",
        "Australia and New Zealand": "East Asia & Pacific",
        "Melanesia": "East Asia & Pacific",
        "Micronesia": "East Asia & Pacific",
        "Polynesia": "East Asia & Pacific",
        "Eastern Europe": "Europe & Central Asia",
        "Northern Europe": "Europe & Central Asia",
        "Southern Europe": "Europe & Central Asia",
        "Western Europe": "Europe & Central Asia",
        "Central Asia": "Europe & Central Asia",
        "Caribbean": "Latin America & Caribbean",
        "Central America": "Latin America & Caribbean",
        "South America": "Latin America & Caribbean",
        "Northern America": "North America",
        "Southern Asia": "South Asia",
        "Eastern Africa": "Sub-Saharan Africa",
        "Middle Africa": "Sub-Saharan Africa",
        "Southern Africa": "Sub-Saharan Africa",
        "Western Africa": "Sub-Saharan Africa",
        "Western Asia": "Western Asia & North Africa",
        "Northern Africa": "Western Asia & North Africa",
    }
)

Z_95 = 1.96


@dataclass(frozen=True)
class RegionScheme:
    assignments: Mapping[str, str]

    def __post_init__(self):
        bad = sorted({r for r in self.assignments.values() if r not in REGIONS})
        if bad:
            raise DataError(f"unknown region labels {bad}")
        object.__setattr__(self, "assignments", MappingProxyType(dict(self.assignments)))

    def __contains__(self, country_id) -> bool:
        return country_id in self.assignments


def load_region_scheme(source=None) -> RegionScheme:
    """Read ``country_id`` plus a ``region`` or UN ``subregion`` column.

    ``None`` or ``"default"`` loads the bundled FAO area table.
    """
    if source is None or source == "default":
        with resources.files("hdbi.data").joinpath("countries.csv").open(encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        name = "default region scheme"
    else:
        rows = read_csv(Path(source))
        name = str(source)
    if not rows:
        return RegionScheme({})
    if "country_id" not in rows[0]:
        raise MissingColumn("country_id", name)
    out = {}
    for r in rows:
        region = (r.get("region") or "").strip()
        if not region:
            sub = (r.get("subregion") or "").strip()
            if sub not in SUBREGION_TO_REGION:
                raise DataError(f"{name}: {r['country_id']!r} has unknown subregion {sub!r}")
            region = SUBREGION_TO_REGION[sub]
        out[r["country_id"]] = region
    return RegionScheme(out)


def assign_region(country_id: str, scheme: RegionScheme) -> str:
    try:
        return scheme.assignments[country_id]
    except KeyError:
        raise UnassignedCountry(country_id) from None


@dataclass(frozen=True)
class PopulationSeries:
    values: Mapping[tuple[str, int], float]

    def __post_init__(self):
        for key, v in self.values.items():
            if not v > 0:
                raise DataError(f"population for {key} must be positive, got {v}")
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))

    def get(self, country_id: str, year: int) -> float:
        try:
            return self.values[(country_id, year)]
        except KeyError:
            raise MissingPopulation(country_id, year) from None

    def has(self, country_id: str, year: int) -> bool:
        return (country_id, year) in self.values

    def overridden(self, other: "PopulationSeries") -> "PopulationSeries":
        return PopulationSeries({**self.values, **other.values})


def load_population_csv(path) -> PopulationSeries:
    rows = read_csv(Path(path))
    for col in ("country_id", "year", "population"):
        if rows and col not in rows[0]:
            raise MissingColumn(col, str(path))
    return PopulationSeries({(r["country_id"], int(r["year"])): float(r["population"]) for r in rows})


def regional_supply(
    supplies: Sequence[FoodGroupSupply],
    pop: PopulationSeries,
    scheme: RegionScheme,
    *,
    include_world: bool = True,
) -> list[FoodGroupSupply]:
    """Population-weighted per-capita supply for each region-year (and World).

    Only countries present in a year contribute to it. Output is sorted by
    region label then year, with World rows labelled ``"World"``.
    """
    if not supplies:
        return []
    labels = sorted({assign_region(s.country_id, scheme) for s in supplies})
    if include_world:
        labels.append(WORLD)
    years = sorted({s.year for s in supplies})
    seg_of = {(r, y): i for i, (r, y) in enumerate((r, y) for r in labels for y in years)}

    ordered = sorted(supplies, key=lambda s: (s.country_id, s.year))
    values = np.array([s.vector() for s in ordered])
    weights = np.array([pop.get(s.country_id, s.year) for s in ordered])
    regions = [assign_region(s.country_id, scheme) for s in ordered]
    seg = np.array([seg_of[(r, s.year)] for r, s in zip(regions, ordered)], dtype=np.int64)
    if include_world:
        values = np.vstack([values, values])
        weights = np.concatenate([weights, weights])
        seg = np.concatenate([seg, np.array([seg_of[(WORLD, s.year)] for s in ordered], dtype=np.int64)])
    means, den = kernels.weighted_segment_mean(values, weights, seg, len(seg_of))
    out = []
    for (label, year), i in seg_of.items():
        if den[i] > 0:
            out.append(FoodGroupSupply(label, year, dict(zip(REPORTING_GROUPS, map(float, means[i])))))
    return out


# -- decades --------------------------------------------------------------------

DATA_FIRST_YEAR = 1961
DATA_LAST_YEAR = 2020


def decade_start(decade: int | str) -> int:
    if isinstance(decade, str):
        decade = int(decade.strip().rstrip("s"))
    if decade % 10:
        raise ValueError(f"not a decade start: {decade}")
    return decade


def decade_years(
    decade: int | str,
    first_year: int = DATA_FIRST_YEAR,
    last_year: int = DATA_LAST_YEAR,
    fold_final_year: bool = True,
) -> range:
    """Years in a decade bin, clipped to the data window.

    A final year that opens a new decade on its own (2020) joins the
    previous bin, so the 2010s run 2010-2020.
    """
    start = decade_start(decade)
    lo = max(start, first_year)
    hi = min(start + 9, last_year)
    if fold_final_year and last_year % 10 == 0:
        if start + 10 == last_year:
            hi = last_year
        elif start == last_year:
            return range(0)
    return range(lo, hi + 1)


def decade_of(year: int, last_year: int = DATA_LAST_YEAR, fold_final_year: bool = True) -> int:
    if fold_final_year and year == last_year and year % 10 == 0:
        return year - 10
    return year - year % 10


@dataclass(frozen=True)
class DecadeSummary:
    region: str
    decade: int
    mean_hdbi: float
    ci_low: float
    ci_high: float
    n_country_years: int
    n_units: int
    degenerate: bool

    @property
    def label(self) -> str:
        return f"{self.decade}s"


def _mean_ci(values: Sequence[float]) -> tuple[float, float, float, bool]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, mean, mean, True
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    half = Z_95 * sd / math.sqrt(n)
    return mean, mean - half, mean + half, False


SAMPLING_UNITS = ("country-year", "country-decade")


def decade_mean_hdbi(
    scores: Iterable[HdbiScore],
    scheme: RegionScheme,
    decade: int | str,
    *,
    regions: Sequence[str] | None = None,
    sampling_unit: str = "country-year",
    first_year: int = DATA_FIRST_YEAR,
    last_year: int = DATA_LAST_YEAR,
    include_world: bool = False,
) -> list[DecadeSummary]:
    """Unweighted mean of country HDBI per region over one decade bin.

    ``sampling_unit="country-decade"`` first averages each country over the
    bin and builds the interval over those country means instead.
    """
    if sampling_unit not in SAMPLING_UNITS:
        raise ValueError(f"sampling_unit must be one of {SAMPLING_UNITS}")
    scores = list(scores)
    start = decade_start(decade)
    years = set(decade_years(start, first_year, last_year))
    if regions is None:
        regions = sorted({assign_region(s.country_id, scheme) for s in scores})
    groups: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for s in scores:
        if s.year not in years:
            continue
        r = assign_region(s.country_id, scheme)
        groups[r][s.country_id].append(s.hdbi)
        if include_world:
            groups[WORLD][s.country_id].append(s.hdbi)
    targets = list(regions) + ([WORLD] if include_world else [])
    out = []
    for r in targets:
        by_country = groups.get(r)
        if not by_country:
            raise EmptyBin(r, start)
        if sampling_unit == "country-year":
            sample = [v for c in sorted(by_country) for v in by_country[c]]
        else:
            sample = [math.fsum(v) / len(v) for _, v in sorted(by_country.items())]
        mean, lo, hi, degenerate = _mean_ci(sample)
        n_cy = sum(len(v) for v in by_country.values())
        out.append(DecadeSummary(r, start, mean, lo, hi, n_cy, len(sample), degenerate))
    return out


@dataclass(frozen=True)
class DecadeEnergy:
    region: str
    decade: int
    mean_kcal: float
    n_years: int


def decade_mean_energy(
    supplies: Sequence[FoodGroupSupply],
    pop: PopulationSeries,
    scheme: RegionScheme,
    decade: int | str,
    *,
    first_year: int = DATA_FIRST_YEAR,
    last_year: int = DATA_LAST_YEAR,
    include_world: bool = True,
) -> list[DecadeEnergy]:
    """Mean over the bin's years of population-weighted regional total energy."""
    start = decade_start(decade)
    years = set(decade_years(start, first_year, last_year))
    in_bin = [s for s in supplies if s.year in years]
    if not in_bin:
        raise EmptyBin(WORLD if include_world else "any region", start)
    per_year = defaultdict(list)
    for rs in regional_supply(in_bin, pop, scheme, include_world=include_world):
        per_year[rs.country_id].append(total_energy(rs))
    return [
        DecadeEnergy(r, start, math.fsum(v) / len(v), len(v))
        for r, v in sorted(per_year.items(), key=lambda kv: (kv[0] == WORLD, kv[0]))
    ]
