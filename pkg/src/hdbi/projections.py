"""Scenario projections from IMPACT multipliers.

IMPACT reports, per modelling unit (a country or a group of countries),
the change in per-capita food energy relative to 2010. Projected supply is
observed 2010 supply times that multiplier; regions are then aggregated
with 2010 population weights held fixed.
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .aggregation import WORLD, PopulationSeries, RegionScheme, assign_region, regional_supply
from .core import DEFAULT_TARGETS, REPORTING_GROUPS, FoodGroup, FoodGroupSupply, HdbTargets, score_many
from .errors import DataError, InvalidDelta, MissingColumn, MissingDelta, MissingMember
from .fmt import read_csv
from .ingest import SupplyObservation
from .mapping import CommodityMap, classify

BASE_YEAR = 2010
DECADE_GRID = (2010, 2020, 2030, 2040, 2050)

SCENARIOS = ("Reference", "CompInvest", "RnD", "Infrastructure", "Irrigation", "Soils")
_SCENARIO_ALIASES = {
    "reference scenario": "Reference",
    "comp. investments": "CompInvest",
    "comprehensive investments": "CompInvest",
    "r&d": "RnD",
    "infrastructure/marketing": "Infrastructure",
    "soils/water-holding": "Soils",
}


def scenario_id(label: str) -> str:
    s = label.strip()
    if s in SCENARIOS:
        return s
    try:
        return _SCENARIO_ALIASES[s.lower()]
    except KeyError:
        raise DataError(f"unknown scenario {label!r}; expected one of {SCENARIOS}") from None


@dataclass(frozen=True)
class ImpactUnit:
    unit_id: str
    members: tuple[str, ...]
    excluded_from_figures: bool = False

    def __post_init__(self):
        if not self.members:
            raise DataError(f"IMPACT unit {self.unit_id!r} has no members")

    def missing_members(self, available: Iterable[str]) -> list[str]:
        have = set(available)
        return [m for m in self.members if m not in have]

    def is_disaggregable(self, available: Iterable[str]) -> bool:
        return not self.missing_members(available)


def load_impact_units(source=None) -> list[ImpactUnit]:
    """Read ``unit_id,member_country_id,excluded_flag``; ``None`` loads the bundled table."""
    if source is None or source == "default":
        with resources.files("hdbi.data").joinpath("impact_units.csv").open(encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        name = "default IMPACT units"
    else:
        rows = read_csv(Path(source))
        name = str(source)
    for col in ("unit_id", "member_country_id"):
        if rows and col not in rows[0]:
            raise MissingColumn(col, name)
    members: dict[str, list[str]] = defaultdict(list)
    excluded: dict[str, bool] = {}
    owner: dict[str, str] = {}
    for r in rows:
        u, m = r["unit_id"].strip(), r["member_country_id"].strip()
        if m in owner and owner[m] != u:
            raise DataError(f"{name}: {m!r} belongs to both {owner[m]!r} and {u!r}")
        owner[m] = u
        members[u].append(m)
        flag = (r.get("excluded_flag") or "0").strip().lower() in {"1", "true", "yes", "y"}
        excluded[u] = excluded.get(u, False) or flag
    return [ImpactUnit(u, tuple(ms), excluded[u]) for u, ms in sorted(members.items())]


# -- deltas -------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioDelta:
    scenario: str
    unit: str
    group: FoodGroup
    year: int
    multiplier: float


@dataclass(frozen=True)
class DeltaTable:
    """Multipliers keyed by (scenario, unit, group, year).

    ``unit`` may also be a region label, used for every unit in that region
    that has no series of its own. A series without a 2010 row is taken to
    be 1 in 2010.
    """

    values: Mapping[tuple[str, str, FoodGroup, int], float] = field(default_factory=dict)

    @classmethod
    def from_deltas(cls, deltas: Iterable[ScenarioDelta]) -> "DeltaTable":
        values = {}
        for d in deltas:
            key = (d.scenario, d.unit, d.group, d.year)
            if key in values:
                raise InvalidDelta(f"duplicate multiplier for {key}")
            if not (math.isfinite(d.multiplier) and d.multiplier > 0):
                raise InvalidDelta(f"multiplier must be positive and finite, got {d.multiplier} for {key}")
            if d.year == BASE_YEAR and d.multiplier != 1.0:
                raise InvalidDelta(f"multiplier in {BASE_YEAR} must be 1, got {d.multiplier} for {key}")
            values[key] = d.multiplier
        return cls(values)

    @property
    def scenarios(self) -> list[str]:
        return sorted({k[0] for k in self.values}, key=SCENARIOS.index)

    def years(self, scenario: str) -> list[int]:
        return sorted({k[3] for k in self.values if k[0] == scenario} | {BASE_YEAR})

    def lookup(self, scenario: str, unit: str, group: FoodGroup, year: int, region: str | None = None) -> float:
        for who in (unit, region):
            if who is None:
                continue
            m = self.values.get((scenario, who, group, year))
            if m is not None:
                return m
        if year == BASE_YEAR:
            return 1.0
        raise MissingDelta(scenario, unit, group.value, year)


def load_deltas(source=None) -> DeltaTable:
    """Read ``scenario,unit,group,year,multiplier`` rows.

    ``None`` loads the bundled region-level multipliers derived from the
    published 2010-2050 regional ratios (Reference and CompInvest only).
    """
    if source is None or source == "default":
        with resources.files("hdbi.data").joinpath("impact_deltas_s3.csv").open(encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        name = "default deltas"
    else:
        rows = read_csv(Path(source))
        name = str(source)
    for col in ("scenario", "unit", "group", "year", "multiplier"):
        if rows and col not in rows[0]:
            raise MissingColumn(col, name)
    deltas = []
    for r in rows:
        try:
            deltas.append(
                ScenarioDelta(
                    scenario_id(r["scenario"]),
                    r["unit"].strip(),
                    FoodGroup.parse(r["group"]),
                    int(r["year"]),
                    float(r["multiplier"]),
                )
            )
        except ValueError as e:
            raise InvalidDelta(f"{name}: bad row {r}: {e}") from None
    return DeltaTable.from_deltas(deltas)


def commodity_to_group_deltas(
    item_deltas: Iterable[tuple[str, str, int, int, float]],
    base_item_kcal: Mapping[tuple[str, int], float],
    cmap: CommodityMap,
) -> list[ScenarioDelta]:
    """Collapse per-commodity multipliers to per-group ones.

    ``item_deltas`` holds ``(scenario, unit, item_code, year, multiplier)``;
    each group multiplier is the base-year kcal-weighted mean of its items'
    multipliers. A group with no base-year kcal gets multiplier 1.
    """
    num = defaultdict(float)
    den = defaultdict(float)
    seen = set()
    for scenario, unit, item, year, m in sorted(item_deltas, key=lambda t: (t[0], t[1], t[3], t[2])):
        g = classify(item, cmap)
        if g is FoodGroup.EXCLUDED:
            continue
        w = base_item_kcal.get((unit, item), 0.0)
        key = (scenario_id(scenario), unit, g, year)
        seen.add(key)
        num[key] += w * m
        den[key] += w
    return [
        ScenarioDelta(s, u, g, y, (num[(s, u, g, y)] / den[(s, u, g, y)]) if den[(s, u, g, y)] > 0 else 1.0)
        for (s, u, g, y) in sorted(seen, key=lambda k: (k[0], k[1], k[2].value, k[3]))
    ]


def unit_item_base(
    observations: Iterable[SupplyObservation],
    pop: PopulationSeries,
    units: Sequence[ImpactUnit],
    base_year: int = BASE_YEAR,
) -> dict[tuple[str, int], float]:
    """Population-weighted base-year kcal per (unit, item), for the converter."""
    unit_of = {m: u.unit_id for u in units for m in u.members}
    num = defaultdict(float)
    den = defaultdict(float)
    for o in sorted(observations, key=lambda o: o.key):
        if o.year != base_year or o.country_id not in unit_of:
            continue
        p = pop.get(o.country_id, base_year)
        num[(unit_of[o.country_id], o.item_code)] += p * o.kcal_per_capita_day
    for u in units:
        total = sum(pop.get(m, base_year) for m in u.members if pop.has(m, base_year))
        den[u.unit_id] = total
    return {k: v / den[k[0]] for k, v in num.items() if den[k[0]] > 0}


# -- base and projection --------------------------------------------------------


@dataclass(frozen=True)
class UnitDrop:
    unit_id: str
    reason: str
    missing: tuple[str, ...] = ()


@dataclass
class ImpactBase:
    supplies: dict[str, FoodGroupSupply]
    members: dict[str, tuple[str, ...]]
    dropped: list[UnitDrop]

    def report(self) -> list[dict]:
        return [{"unit": d.unit_id, "reason": d.reason, "missing": list(d.missing)} for d in self.dropped]


def build_impact_base(
    supplies: Sequence[FoodGroupSupply],
    pop: PopulationSeries,
    units: Sequence[ImpactUnit],
    base_year: int = BASE_YEAR,
    *,
    strict: bool = False,
) -> ImpactBase:
    """Base-year supply per IMPACT unit as the population-weighted member mean.

    Units with any member lacking base-year supply or population, and units
    flagged as excluded from figures, are dropped and reported. With
    ``strict=True`` a missing member raises ``MissingMember`` instead.
    """
    by_country = {s.country_id: s for s in supplies if s.year == base_year}
    out, members, dropped = {}, {}, []
    for u in units:
        missing = tuple(m for m in u.members if m not in by_country or not pop.has(m, base_year))
        if missing:
            if strict:
                raise MissingMember(u.unit_id, missing[0])
            dropped.append(UnitDrop(u.unit_id, "MissingMember", missing))
            continue
        if u.excluded_from_figures:
            dropped.append(UnitDrop(u.unit_id, "excluded from figures"))
            continue
        weights = [pop.get(m, base_year) for m in u.members]
        total_w = math.fsum(weights)
        kcal = {}
        for g in REPORTING_GROUPS:
            kcal[g] = math.fsum(w * by_country[m].kcal[g] for w, m in zip(weights, u.members)) / total_w
        out[u.unit_id] = FoodGroupSupply(u.unit_id, base_year, kcal)
        members[u.unit_id] = u.members
    return ImpactBase(out, members, dropped)


def apply_deltas(
    base: FoodGroupSupply,
    deltas: DeltaTable,
    scenario: str,
    year: int,
    *,
    unit: str | None = None,
    region: str | None = None,
) -> FoodGroupSupply:
    """Projected supply: base kcal times the (scenario, unit, group, year) multiplier.

    ``unit`` defaults to ``base.country_id``; ``region`` enables the
    region-level fallback series. Groups with zero base kcal need no
    multiplier.
    """
    unit = base.country_id if unit is None else unit
    kcal = {}
    for g in REPORTING_GROUPS:
        q = base.kcal[g]
        if q == 0.0:
            kcal[g] = 0.0
            continue
        kcal[g] = q * deltas.lookup(scenario, unit, g, year, region)
    return FoodGroupSupply(base.country_id, year, kcal)


@dataclass(frozen=True)
class Trajectory:
    scenario: str
    region: str
    year: int
    ratios: Mapping[FoodGroup, float]
    hdbi: float


def projected_country_supplies(
    base: ImpactBase,
    supplies: Sequence[FoodGroupSupply],
    deltas: DeltaTable,
    scenario: str,
    year: int,
    scheme: RegionScheme,
    base_year: int = BASE_YEAR,
) -> list[FoodGroupSupply]:
    by_country = {s.country_id: s for s in supplies if s.year == base_year}
    out = []
    for unit_id in sorted(base.members):
        for m in base.members[unit_id]:
            projected = apply_deltas(
                by_country[m], deltas, scenario, year, unit=unit_id, region=assign_region(m, scheme)
            )
            out.append(projected)
    return out


def trajectory(
    scenario: str,
    base: ImpactBase,
    supplies: Sequence[FoodGroupSupply],
    deltas: DeltaTable,
    scheme: RegionScheme,
    pop: PopulationSeries,
    *,
    years: Sequence[int] | None = None,
    targets: HdbTargets = DEFAULT_TARGETS,
    base_year: int = BASE_YEAR,
) -> list[Trajectory]:
    """Regional and World ratios and HDBI for one scenario over ``years``.

    Member countries of every kept unit are scaled by their unit's
    multipliers, then aggregated with base-year population weights.
    """
    scenario = scenario_id(scenario)
    years = list(years) if years is not None else [y for y in DECADE_GRID if y in deltas.years(scenario)]
    members = [m for ms in base.members.values() for m in ms]
    frozen_pop = PopulationSeries({(m, y): pop.get(m, base_year) for m in members for y in years})
    out = []
    for year in years:
        projected = projected_country_supplies(base, supplies, deltas, scenario, year, scheme, base_year)
        regional = regional_supply(projected, frozen_pop, scheme)
        for sc in score_many(regional, targets):
            out.append(Trajectory(scenario, sc.country_id, sc.year, sc.ratios, sc.hdbi))
    out.sort(key=lambda t: (t.region == WORLD, t.region, t.year))
    return out
