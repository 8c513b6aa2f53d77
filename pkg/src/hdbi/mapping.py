"""FAO commodity -> HDB food group classification."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .core import REPORTING_GROUPS, FoodGroup, FoodGroupSupply
from .errors import DataError, DuplicateMapping, MissingColumn, UnknownGroup, Unmapped
from .ingest import SupplyObservation

__all__ = [
    "CommodityMap",
    "FoodGroup",
    "classify",
    "group_supply",
    "load_commodity_map",
    "unmapped_codes",
]


@dataclass(frozen=True)
class CommodityMap:
    entries: Mapping[int, FoodGroup]
    provenance: Mapping[int, str]

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    def __contains__(self, item_code) -> bool:
        return item_code in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def _rows_from(source) -> tuple[list[dict[str, str]], str]:
    if source is None or source == "default":
        text = resources.files("hdbi.data").joinpath("commodity_map.csv").read_text(encoding="utf-8")
        name = "default commodity map"
    elif isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8-sig")
        name = str(source)
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8-sig")
        name = getattr(source, "name", "commodity map")
    dialect = csv.Sniffer().sniff(text.splitlines()[0], delimiters=",;\t|") if text.strip() else csv.excel
    return list(csv.DictReader(io.StringIO(text), dialect=dialect)), name


def load_commodity_map(source=None) -> CommodityMap:
    """Read an ``item_code,group[,note]`` table; ``None`` loads the bundled map."""
    rows, name = _rows_from(source)
    if rows:
        for col in ("item_code", "group"):
            if col not in rows[0]:
                raise MissingColumn(col, name)
    entries: dict[int, FoodGroup] = {}
    notes: dict[int, str] = {}
    for r in rows:
        try:
            code = int(r["item_code"].strip())
        except ValueError:
            raise DataError(f"{name}: bad item code {r['item_code']!r}") from None
        try:
            group = FoodGroup.parse(r["group"])
        except ValueError:
            raise UnknownGroup(r["group"]) from None
        if code in entries:
            raise DuplicateMapping(code)
        entries[code] = group
        notes[code] = (r.get("note") or "").strip()
    return CommodityMap(entries, notes)


def classify(item_code: int, cmap: CommodityMap) -> FoodGroup:
    try:
        return cmap.entries[item_code]
    except KeyError:
        raise Unmapped(item_code) from None


def unmapped_codes(item_codes: Iterable[int], cmap: CommodityMap) -> list[int]:
    return sorted({c for c in item_codes if c not in cmap.entries})


_GROUP_INDEX = {g: i for i, g in enumerate(REPORTING_GROUPS)}


def group_supply(
    observations: Sequence[SupplyObservation], cmap: CommodityMap
) -> list[FoodGroupSupply]:
    """Sum item kcal into food groups, one supply per (country_id, year).

    Excluded items are dropped; groups with no items get 0. Output is sorted
    by country id then year.
    """
    missing = unmapped_codes((o.item_code for o in observations), cmap)
    if missing:
        raise Unmapped(missing[0])
    keys = sorted({(o.country_id, o.year) for o in observations})
    row_of = {k: i for i, k in enumerate(keys)}
    rows, cols, vals = [], [], []
    # fixed accumulation order makes the float sums independent of input order
    ordered = sorted(observations, key=lambda o: (o.country_id, o.year, o.item_code, o.kcal_per_capita_day))
    for o in ordered:
        g = cmap.entries[o.item_code]
        if g is FoodGroup.EXCLUDED:
            continue
        rows.append(row_of[(o.country_id, o.year)])
        cols.append(_GROUP_INDEX[g])
        vals.append(o.kcal_per_capita_day)
    totals = kernels.scatter_sum(
        np.array(rows, dtype=np.int64),
        np.array(cols, dtype=np.int64),
        np.array(vals, dtype=np.float64),
        (len(keys), len(REPORTING_GROUPS)),
    )
    return [
        FoodGroupSupply(cid, year, dict(zip(REPORTING_GROUPS, map(float, row))))
        for (cid, year), row in zip(keys, totals)
    ]
