"""FAOSTAT Food Balance Sheet ingestion.

Reads the bulk CSV exports of the old-methodology (FBSH, to 2013) and
new-methodology (FBS, 2010 onward) series, in either the normalized long
layout or the wide ``Y1961, Y1962, ...`` layout, keeps the per-capita
dietary energy element and splices the two series into one panel.
"""
from __future__ import annotations

import csv
import enum
import io
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from .errors import DataError, MissingColumn, OverlapConflict, SpliceConfigError
from .fmt import fixed3, read_csv, write_csv

ENERGY_ELEMENT_CODE = 664  # Food supply (kcal/capita/day)
POPULATION_ELEMENT_CODE = 511  # Total Population - Both sexes
POPULATION_ITEM_CODE = 2501

# FAOSTAT area codes from 5000 up are regional and world rollups
AGGREGATE_AREA_MIN = 5000
# China (351) is kept; its components would double count
CHINA_COMPONENT_AREAS = frozenset({41, 96, 128, 214})

YEAR_MIN, YEAR_MAX = 1961, 2100

_WIDE_YEAR = re.compile(r"^Y(\d{4})$")


class Variant(str, enum.Enum):
    FBSH = "FBSH"
    FBS = "FBS"


class Methodology(str, enum.Enum):
    OLD = "OldMethodology"
    NEW = "NewMethodology"


VARIANT_SOURCE = {Variant.FBSH: Methodology.OLD, Variant.FBS: Methodology.NEW}


@dataclass(frozen=True, slots=True)
class FbsRecord:
    area_code: int
    area_name: str
    item_code: int
    item_name: str
    element_code: int
    element_name: str
    year: int
    unit: str
    value: float


@dataclass(frozen=True, slots=True)
class SupplyObservation:
    country_id: str
    item_code: int
    year: int
    kcal_per_capita_day: float
    source: Methodology

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.country_id, self.item_code, self.year)


@dataclass(frozen=True)
class BadNumeric:
    row: int
    column: str
    raw: str


@dataclass
class ParseReport:
    source: str = ""
    variant: str = ""
    layout: str = ""
    rows_read: int = 0
    records: int = 0
    empty_cells: int = 0
    bad_numeric: list[BadNumeric] = field(default_factory=list)
    dropped_areas: Counter = field(default_factory=Counter)

    def as_dict(self) -> dict:
        return {
            "source": self.source,
            "variant": self.variant,
            "layout": self.layout,
            "rows_read": self.rows_read,
            "records": self.records,
            "empty_cells": self.empty_cells,
            "bad_numeric": len(self.bad_numeric),
            "bad_numeric_sample": [
                {"row": b.row, "column": b.column, "raw": b.raw} for b in self.bad_numeric[:20]
            ],
            "dropped_area_records": dict(sorted(self.dropped_areas.items())),
        }


def _open_text(stream) -> IO[str]:
    if isinstance(stream, (str, Path)):
        raw = Path(stream).read_bytes()
    elif isinstance(stream, (bytes, bytearray)):
        raw = bytes(stream)
    else:
        data = stream.read()
        if isinstance(data, str):
            return io.StringIO(data)
        raw = data
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError:
        # older FAOSTAT bulk files are Latin-1
        text = raw.decode("latin-1")
    return io.StringIO(text, newline="")


def _norm(name: str) -> str:
    return " ".join(name.replace("﻿", "").strip().lower().split())


def _to_int(raw: str) -> int:
    s = raw.strip().strip("'")
    if not s:
        raise ValueError
    return int(float(s)) if "." in s else int(s)


def parse_fbs_csv(
    stream,
    schema_variant: str | Variant,
    *,
    report: ParseReport | None = None,
    elements: Iterable[int] | None = None,
    source: str = "",
) -> list[FbsRecord]:
    """Parse one FAOSTAT bulk export into records, in file order.

    Empty value cells are skipped. Cells that fail to parse are appended to
    ``report.bad_numeric`` and the row (or year cell, in the wide layout) is
    omitted. ``elements`` restricts output to the given element codes, which
    keeps memory down on full bulk files.
    """
    variant = Variant(schema_variant)
    if report is None:
        report = ParseReport()
    report.variant = variant.value
    report.source = source or getattr(stream, "name", "") or report.source
    keep = None if elements is None else frozenset(elements)

    fh = _open_text(stream)
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn("Area Code", report.source) from None
    cols = {_norm(h): i for i, h in reversed(list(enumerate(header)))}

    def need(name):
        if _norm(name) not in cols:
            raise MissingColumn(name, report.source)
        return cols[_norm(name)]

    i_area, i_item, i_elem, i_unit = (need(n) for n in ("Area Code", "Item Code", "Element Code", "Unit"))
    i_area_name = cols.get("area")
    i_item_name = cols.get("item")
    i_elem_name = cols.get("element")

    wide = [(int(m.group(1)), i) for i, h in enumerate(header) if (m := _WIDE_YEAR.match(h.strip()))]
    if "value" in cols:
        report.layout = "long"
        i_year = need("Year")
        i_value = cols["value"]
    elif wide:
        report.layout = "wide"
    else:
        raise MissingColumn("Value", report.source)

    out: list[FbsRecord] = []
    seen: set[tuple[int, int, int, int]] = set()
    width = len(header)

    def cell(row, i):
        return row[i] if i is not None and i < len(row) else ""

    for row in reader:
        if not row or all(not c.strip() for c in row):
            continue
        line = reader.line_num
        report.rows_read += 1
        if len(row) < width:
            row = row + [""] * (width - len(row))
        codes = []
        for col, i in (("Area Code", i_area), ("Item Code", i_item), ("Element Code", i_elem)):
            try:
                codes.append(_to_int(row[i]))
            except ValueError:
                report.bad_numeric.append(BadNumeric(line, col, row[i]))
                codes = None
                break
        if codes is None:
            continue
        area, item, elem = codes
        if keep is not None and elem not in keep:
            continue
        if report.layout == "long":
            try:
                year = _to_int(row[i_year])
            except ValueError:
                report.bad_numeric.append(BadNumeric(line, "Year", row[i_year]))
                continue
            cells = [(year, "Value", row[i_value])]
        else:
            cells = [(y, header[i], row[i]) for y, i in wide]

        for year, col, raw in cells:
            s = raw.strip()
            if not s:
                report.empty_cells += 1
                continue
            try:
                value = float(s)
            except ValueError:
                report.bad_numeric.append(BadNumeric(line, col, raw))
                continue
            if not math.isfinite(value) or not (YEAR_MIN <= year <= YEAR_MAX) or (
                elem == ENERGY_ELEMENT_CODE and value < 0
            ):
                report.bad_numeric.append(BadNumeric(line, col, raw))
                continue
            key = (area, item, elem, year)
            if key in seen:
                raise OverlapConflict(key, f"repeated within {report.source or 'input'}")
            seen.add(key)
            out.append(
                FbsRecord(
                    area_code=area,
                    area_name=cell(row, i_area_name).strip(),
                    item_code=item,
                    item_name=cell(row, i_item_name).strip(),
                    element_code=elem,
                    element_name=cell(row, i_elem_name).strip(),
                    year=year,
                    unit=row[i_unit].strip(),
                    value=value,
                )
            )
    report.records += len(out)
    return out


def is_energy_element(rec: FbsRecord) -> bool:
    if rec.element_code == ENERGY_ELEMENT_CODE:
        return True
    return _norm(rec.element_name) == "food supply (kcal/capita/day)"


def filter_energy_supply(records: Iterable[FbsRecord]) -> list[FbsRecord]:
    """Keep only the food-supply energy element (kcal/capita/day)."""
    return [r for r in records if is_energy_element(r)]


# -- areas ---------------------------------------------------------------------


def load_area_names(path: str | Path | None = None) -> dict[int, str]:
    """FAO area code -> canonical country id, from ``area_code,country_id`` CSV."""
    if path is None:
        with resources.files("hdbi.data").joinpath("countries.csv").open(encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
    else:
        rows = read_csv(Path(path))
    return {int(r["area_code"]): r["country_id"] for r in rows}


def is_dropped_area(area_code: int, drop_areas: frozenset[int] = CHINA_COMPONENT_AREAS) -> bool:
    return area_code >= AGGREGATE_AREA_MIN or area_code in drop_areas


def to_observations(
    records: Iterable[FbsRecord],
    variant: str | Variant,
    *,
    area_names: Mapping[int, str] | None = None,
    drop_areas: frozenset[int] = CHINA_COMPONENT_AREAS,
    report: ParseReport | None = None,
) -> list[SupplyObservation]:
    """Energy records -> observations keyed by canonical country id.

    FAOSTAT rollup areas are dropped so that all aggregation is recomputed
    with one method. Areas unknown to ``area_names`` keep their file name.
    """
    source = VARIANT_SOURCE[Variant(variant)]
    names = area_names or {}
    out = []
    for r in records:
        if not is_energy_element(r):
            continue
        if is_dropped_area(r.area_code, drop_areas):
            if report is not None:
                report.dropped_areas[r.area_name or str(r.area_code)] += 1
            continue
        cid = names.get(r.area_code) or r.area_name or str(r.area_code)
        out.append(SupplyObservation(cid, r.item_code, r.year, r.value, source))
    return out


def population_from_records(
    records: Iterable[FbsRecord],
    *,
    area_names: Mapping[int, str] | None = None,
    drop_areas: frozenset[int] = CHINA_COMPONENT_AREAS,
) -> dict[tuple[str, int], float]:
    """(country_id, year) -> persons, from the population element in FBS files."""
    names = area_names or {}
    out = {}
    for r in records:
        if r.element_code != POPULATION_ELEMENT_CODE or is_dropped_area(r.area_code, drop_areas):
            continue
        scale = 1000.0 if r.unit.strip().startswith("1000") else 1.0
        cid = names.get(r.area_code) or r.area_name or str(r.area_code)
        out[(cid, r.year)] = r.value * scale
    return out


# -- splice --------------------------------------------------------------------


@dataclass(frozen=True)
class Succession:
    predecessor: str
    successors: tuple[str, ...]
    transition_year: int


DEFAULT_SUCCESSION: tuple[Succession, ...] = (
    Succession(
        "USSR",
        (
            "Armenia", "Azerbaijan", "Belarus", "Estonia", "Georgia", "Kazakhstan",
            "Kyrgyzstan", "Latvia", "Lithuania", "Republic of Moldova",
            "Russian Federation", "Tajikistan", "Turkmenistan", "Ukraine", "Uzbekistan",
        ),
        1992,
    ),
    Succession("Czechoslovakia", ("Czechia", "Slovakia"), 1993),
    Succession(
        "Yugoslav SFR",
        ("Bosnia and Herzegovina", "Croatia", "North Macedonia", "Serbia and Montenegro", "Slovenia"),
        1992,
    ),
    Succession("Serbia and Montenegro", ("Montenegro", "Serbia"), 2006),
    Succession("Ethiopia PDR", ("Eritrea", "Ethiopia"), 1993),
    Succession("Belgium-Luxembourg", ("Belgium", "Luxembourg"), 2000),
    Succession("Sudan (former)", ("South Sudan", "Sudan"), 2012),
)

SPLICE_WINDOW = (2010, 2013)


@dataclass(frozen=True)
class SpliceConfig:
    splice_year: int = 2010
    country_succession: tuple[Succession, ...] = DEFAULT_SUCCESSION

    def __post_init__(self):
        lo, hi = SPLICE_WINDOW
        if not lo <= self.splice_year <= hi:
            raise SpliceConfigError(f"splice_year {self.splice_year} outside overlap window {lo}-{hi}")
        succession = tuple(
            s if isinstance(s, Succession) else Succession(s[0], tuple(s[1]), int(s[2]))
            for s in self.country_succession
        )
        object.__setattr__(self, "country_succession", succession)
        start_of = {}
        for s in succession:
            for c in s.successors:
                start_of[c] = s.transition_year
        graph = defaultdict(set)
        for s in succession:
            graph[s.predecessor].update(s.successors)
            # a successor that is itself dissolved must outlive its own start
            if s.predecessor in start_of and s.transition_year <= start_of[s.predecessor]:
                raise SpliceConfigError(
                    f"{s.predecessor} dissolves in {s.transition_year} before it starts "
                    f"in {start_of[s.predecessor]}"
                )
        _check_acyclic(graph)


def _check_acyclic(graph: Mapping[str, set]) -> None:
    state: dict[str, int] = {}

    def visit(node, path):
        mark = state.get(node)
        if mark == 1:
            raise SpliceConfigError(f"cyclic succession through {' -> '.join(path + [node])}")
        if mark == 2:
            return
        state[node] = 1
        for nxt in sorted(graph.get(node, ())):
            visit(nxt, path + [node])
        state[node] = 2

    for node in sorted(graph):
        visit(node, [])


def _era(year: int, cfg: SpliceConfig) -> Methodology:
    return Methodology.NEW if year >= cfg.splice_year else Methodology.OLD


def splice_series(
    old: Sequence[SupplyObservation],
    new: Sequence[SupplyObservation],
    cfg: SpliceConfig = SpliceConfig(),
) -> list[SupplyObservation]:
    """Merge the two methodologies into one panel, sorted by key.

    Years before ``cfg.splice_year`` come from old-methodology observations
    and later years from new-methodology ones; selection follows each
    observation's ``source`` tag, so re-splicing a spliced panel is a no-op.
    Predecessor states stay separate country ids.
    """
    chosen: dict[tuple[str, int, int], SupplyObservation] = {}
    for obs in (*old, *new):
        if obs.source is not _era(obs.year, cfg):
            continue
        if obs.key in chosen:
            raise OverlapConflict(obs.key, f"twice in {obs.source.value} input")
        chosen[obs.key] = obs

    years = defaultdict(set)
    for cid, _, year in chosen:
        years[cid].add(year)
    for s in cfg.country_succession:
        late = {y for y in years.get(s.predecessor, ()) if y >= s.transition_year}
        for succ in s.successors:
            both = late & years.get(succ, set())
            if both:
                raise OverlapConflict(
                    (s.predecessor, succ, min(both)),
                    f"{s.predecessor} and successor {succ} both report {min(both)}",
                )
    return [chosen[k] for k in sorted(chosen)]


# -- normalized panel file -------------------------------------------------------

SUPPLY_HEADER = ("country_id", "item_code", "year", "kcal", "source")


def write_supply_csv(path: str | Path, observations: Iterable[SupplyObservation]) -> None:
    rows = sorted(observations, key=lambda o: o.key)
    write_csv(
        Path(path),
        SUPPLY_HEADER,
        ((o.country_id, o.item_code, o.year, fixed3(o.kcal_per_capita_day), o.source.value) for o in rows),
    )


def read_supply_csv(path: str | Path) -> list[SupplyObservation]:
    rows = read_csv(Path(path))
    if rows and set(SUPPLY_HEADER) - set(rows[0]):
        raise MissingColumn(sorted(set(SUPPLY_HEADER) - set(rows[0]))[0], str(path))
    try:
        return [
            SupplyObservation(
                r["country_id"], int(r["item_code"]), int(r["year"]), float(r["kcal"]), Methodology(r["source"])
            )
            for r in rows
        ]
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e
