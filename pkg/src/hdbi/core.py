"""Healthy Diet Basket targets, adequacy ratios and the HDBI."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels


class FoodGroup(enum.Enum):
    STARCHY_STAPLES = "StarchyStaples"
    FRUITS = "Fruits"
    VEGETABLES = "Vegetables"
    ANIMAL_SOURCE_FOODS = "AnimalSourceFoods"
    LEGUMES_NUTS_SEEDS = "LegumesNutsSeeds"
    OILS_FATS = "OilsFats"
    SUGARS = "Sugars"
    EXCLUDED = "Excluded"

    @property
    def column(self) -> str:
        return _COLUMNS[self]

    @classmethod
    def parse(cls, label: str) -> "FoodGroup":
        key = label.strip()
        for g in cls:
            if key == g.value or key == g.name or key == _COLUMNS.get(g):
                return g
        raise ValueError(label)


_COLUMNS = {
    FoodGroup.ANIMAL_SOURCE_FOODS: "asf",
    FoodGroup.FRUITS: "fruits",
    FoodGroup.LEGUMES_NUTS_SEEDS: "lns",
    FoodGroup.OILS_FATS: "oils_fats",
    FoodGroup.STARCHY_STAPLES: "starchy_staples",
    FoodGroup.SUGARS: "sugars",
    FoodGroup.VEGETABLES: "vegetables",
    FoodGroup.EXCLUDED: "excluded",
}

# the six groups that enter the index
HDB_GROUPS: tuple[FoodGroup, ...] = (
    FoodGroup.STARCHY_STAPLES,
    FoodGroup.FRUITS,
    FoodGroup.VEGETABLES,
    FoodGroup.ANIMAL_SOURCE_FOODS,
    FoodGroup.LEGUMES_NUTS_SEEDS,
    FoodGroup.OILS_FATS,
)
REPORTING_GROUPS: tuple[FoodGroup, ...] = HDB_GROUPS + (FoodGroup.SUGARS,)

# column order of the published country and region tables
TABLE_GROUPS: tuple[FoodGroup, ...] = tuple(sorted(REPORTING_GROUPS, key=lambda g: g.column))


@dataclass(frozen=True)
class HdbTargets:
    """Target kcal/day per HDB group plus the sugar reference intake."""

    kcal: Mapping[FoodGroup, float] = field(
        default_factory=lambda: {
            FoodGroup.STARCHY_STAPLES: 1160.0,
            FoodGroup.FRUITS: 160.0,
            FoodGroup.VEGETABLES: 110.0,
            FoodGroup.ANIMAL_SOURCE_FOODS: 300.0,
            FoodGroup.LEGUMES_NUTS_SEEDS: 300.0,
            FoodGroup.OILS_FATS: 300.0,
        }
    )
    # WHO: free sugars at most 10% of energy, here 10% of 2330
    sugar_reference_kcal: float = 233.0

    def __post_init__(self):
        if set(self.kcal) != set(HDB_GROUPS):
            raise ValueError("targets must cover exactly the six HDB groups")
        if any(v <= 0 for v in self.kcal.values()) or self.sugar_reference_kcal <= 0:
            raise ValueError("targets must be strictly positive")
        object.__setattr__(self, "kcal", MappingProxyType(dict(self.kcal)))

    @property
    def total(self) -> float:
        return sum(self.kcal[g] for g in HDB_GROUPS)

    def reference(self, group: FoodGroup) -> float:
        if group is FoodGroup.SUGARS:
            return self.sugar_reference_kcal
        if group is FoodGroup.EXCLUDED:
            raise ValueError("Excluded items have no target")
        return self.kcal[group]

    def reference_vector(self, groups: Sequence[FoodGroup] = REPORTING_GROUPS) -> np.ndarray:
        return np.array([self.reference(g) for g in groups])


DEFAULT_TARGETS = HdbTargets()


@dataclass(frozen=True)
class FoodGroupSupply:
    """kcal/capita/day per reporting group for one population-year.

    ``country_id`` holds a region label for aggregated supplies.
    """

    country_id: str
    year: int
    kcal: Mapping[FoodGroup, float]

    def __post_init__(self):
        missing = [g.value for g in REPORTING_GROUPS if g not in self.kcal]
        if missing:
            raise ValueError(f"supply for {self.country_id} {self.year} lacks groups {missing}")
        clean = {g: float(self.kcal[g]) for g in REPORTING_GROUPS}
        if any(not v >= 0.0 for v in clean.values()):
            raise ValueError(f"negative or NaN kcal in supply for {self.country_id} {self.year}")
        object.__setattr__(self, "kcal", MappingProxyType(clean))

    @classmethod
    def of(cls, country_id: str, year: int, kcal: Mapping[FoodGroup, float]) -> "FoodGroupSupply":
        """Build a supply, filling groups absent from ``kcal`` with 0."""
        return cls(country_id, year, {g: kcal.get(g, 0.0) for g in REPORTING_GROUPS})

    def vector(self, groups: Sequence[FoodGroup] = REPORTING_GROUPS) -> np.ndarray:
        return np.array([self.kcal[g] for g in groups])

    @property
    def total_kcal(self) -> float:
        return total_energy(self)


@dataclass(frozen=True)
class HdbiScore:
    country_id: str
    year: int
    ratios: Mapping[FoodGroup, float]
    hdbi: float


def adequacy_ratio(
    supply: FoodGroupSupply, group: FoodGroup, targets: HdbTargets = DEFAULT_TARGETS
) -> float:
    """Available kcal over target kcal; for Sugars, over the WHO reference."""
    return supply.kcal[group] / targets.reference(group)


def hdbi(ratios: Mapping[FoodGroup, float] | Sequence[float]) -> float:
    """One minus the mean shortfall below target across the six HDB groups.

    Accepts a mapping keyed by group (extra keys such as Sugars are ignored)
    or a sequence of six ratios. Surpluses count as zero shortfall.
    """
    if isinstance(ratios, Mapping):
        values = [ratios[g] for g in HDB_GROUPS]
    else:
        values = list(ratios)
        if len(values) != len(HDB_GROUPS):
            raise ValueError(f"expected 6 ratios, got {len(values)}")
    values = [float(v) for v in values]
    if not all(v >= 0.0 for v in values):
        raise ValueError("adequacy ratios must be non-negative and not NaN")
    # same operation order as kernels.hdbi_rows, so results are bit-identical
    total = 0.0
    for gap in sorted(max(1.0 - v, 0.0) for v in values):
        total += gap
    return 1.0 - total / len(values)


def total_energy(supply: FoodGroupSupply) -> float:
    """Six HDB groups plus sugars; Excluded items never appear in a supply."""
    total = 0.0
    for g in REPORTING_GROUPS:
        total += supply.kcal[g]
    return total


def score(supply: FoodGroupSupply, targets: HdbTargets = DEFAULT_TARGETS) -> HdbiScore:
    return score_many([supply], targets)[0]


def score_many(
    supplies: Iterable[FoodGroupSupply], targets: HdbTargets = DEFAULT_TARGETS
) -> list[HdbiScore]:
    supplies = list(supplies)
    if not supplies:
        return []
    kcal = np.array([s.vector() for s in supplies])
    ratios = kcal / targets.reference_vector()
    n_hdb = len(HDB_GROUPS)
    values = kernels.hdbi_rows(ratios[:, :n_hdb])
    return [
        HdbiScore(
            s.country_id,
            s.year,
            MappingProxyType(dict(zip(REPORTING_GROUPS, map(float, row)))),
            float(v),
        )
        for s, row, v in zip(supplies, ratios, values)
    ]
