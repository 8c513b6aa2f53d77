"""Configuration, validation and staged execution of the full pipeline.

Stages run in order ingest -> score -> aggregate -> project. Each stage
writes its artifacts into the output directory; a later stage invoked on
its own reuses the artifacts already there and runs missing upstream
stages first. Every stage reads the normalized ``supply.csv`` rather than
in-memory ingest results, so a one-shot run and a staged run agree.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from . import aggregation as agg
from . import ingest
from . import projections as proj
from .core import DEFAULT_TARGETS, REPORTING_GROUPS, TABLE_GROUPS, FoodGroupSupply, score_many
from .errors import ConfigError, DataError, HdbiError, MissingColumn, OverlapConflict
from .fmt import fixed3, read_csv, write_csv
from .mapping import CommodityMap, group_supply, load_commodity_map, unmapped_codes

STAGES = ("ingest", "score", "aggregate", "project")
DEFAULT = "default"
POPULATION_FROM_FBS = "fbs"

# artifacts each stage writes
ARTIFACTS = {
    "ingest": ("supply.csv", "population.csv"),
    "score": ("country_group_supply.csv", "country_scores.csv"),
    "aggregate": (
        "region_supply.csv",
        "region_scores.csv",
        "decade_hdbi.csv",
        "decade_energy.csv",
        "plot_region_ratios.csv",
        "plot_decade_hdbi.csv",
    ),
    "project": (
        "projection_ratios.csv",
        "projection_hdbi.csv",
        "projection_dropped_units.csv",
        "plot_projection_hdbi.csv",
    ),
}


class StageError(HdbiError):
    """A stage failed; wraps the original error with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


# -- config ---------------------------------------------------------------------


@dataclass
class PipelineConfig:
    fbsh: list[str] = field(default_factory=list)
    fbs: list[str] = field(default_factory=list)
    commodity_map: str | None = None
    region_scheme: str | None = None
    area_names: str = DEFAULT
    population: str = POPULATION_FROM_FBS
    impact_units: str = DEFAULT
    deltas: list[str] = field(default_factory=lambda: [DEFAULT])
    splice_year: int = 2010
    succession: Any = DEFAULT
    stages: list[str] = field(default_factory=lambda: list(STAGES))
    scenarios: list[str] | None = None
    sampling_unit: str = "country-year"
    first_year: int = agg.DATA_FIRST_YEAR
    last_year: int = agg.DATA_LAST_YEAR
    output_dir: str | None = None
    base_dir: str = "."

    REQUIRED = ("fbsh", "fbs", "commodity_map", "region_scheme")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: str | Path = ".") -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        kw = dict(data)
        for key in ("fbsh", "fbs", "deltas"):
            if isinstance(kw.get(key), str):
                kw[key] = [kw[key]]
        if isinstance(kw.get("scenarios"), str):
            kw["scenarios"] = [kw["scenarios"]]
        cfg = cls(**kw, base_dir=str(base_dir))
        try:
            cfg.splice_year = int(cfg.splice_year)
            cfg.first_year = int(cfg.first_year)
            cfg.last_year = int(cfg.last_year)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"year fields must be integers: {e}") from None
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        """Read a YAML or JSON config; relative paths resolve against its folder."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot parse {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_mapping(data, path.parent)

    def resolve(self, p: str) -> str:
        if p in (DEFAULT, POPULATION_FROM_FBS):
            return p
        q = Path(p)
        return str(q if q.is_absolute() else Path(self.base_dir) / q)

    def splice_config(self) -> ingest.SpliceConfig:
        succ = ingest.DEFAULT_SUCCESSION
        if self.succession not in (None, DEFAULT):
            try:
                succ = tuple(
                    ingest.Succession(s["predecessor"], tuple(s["successors"]), int(s["transition_year"]))
                    for s in self.succession
                )
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"bad succession entry: {e}") from None
        return ingest.SpliceConfig(self.splice_year, succ)

    def echo(self) -> dict:
        """Config as used, for the manifest (paths as written, not resolved)."""
        return {
            "fbsh": list(self.fbsh),
            "fbs": list(self.fbs),
            "commodity_map": self.commodity_map,
            "region_scheme": self.region_scheme,
            "area_names": self.area_names,
            "population": self.population,
            "impact_units": self.impact_units,
            "deltas": list(self.deltas),
            "splice_year": self.splice_year,
            "succession": self.succession if self.succession == DEFAULT else list(self.succession),
            "stages": list(self.stages),
            "scenarios": None if self.scenarios is None else list(self.scenarios),
            "sampling_unit": self.sampling_unit,
            "first_year": self.first_year,
            "last_year": self.last_year,
        }


# -- validation -------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    field: str
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.kind}: {self.message}"


def _parse_inputs(cfg: PipelineConfig, reports: list | None = None):
    area_names = ingest.load_area_names(None if cfg.area_names == DEFAULT else cfg.resolve(cfg.area_names))
    wanted = (ingest.ENERGY_ELEMENT_CODE, ingest.POPULATION_ELEMENT_CODE)
    obs = {ingest.Variant.FBSH: [], ingest.Variant.FBS: []}
    population: dict[tuple[str, int], float] = {}
    for variant, paths in ((ingest.Variant.FBSH, cfg.fbsh), (ingest.Variant.FBS, cfg.fbs)):
        for p in paths:
            rep = ingest.ParseReport()
            records = ingest.parse_fbs_csv(cfg.resolve(p), variant, report=rep, elements=wanted, source=p)
            obs[variant].extend(ingest.to_observations(records, variant, area_names=area_names, report=rep))
            pop = ingest.population_from_records(records, area_names=area_names)
            # new-methodology files take precedence where both report a year
            for key, v in pop.items():
                if variant is ingest.Variant.FBS or key not in population:
                    population[key] = v
            if reports is not None:
                reports.append(rep.as_dict())
    return obs[ingest.Variant.FBSH], obs[ingest.Variant.FBS], population


def _population_series(cfg: PipelineConfig, from_fbs: Mapping) -> agg.PopulationSeries:
    pop = agg.PopulationSeries(dict(from_fbs))
    if cfg.population != POPULATION_FROM_FBS:
        pop = pop.overridden(agg.load_population_csv(cfg.resolve(cfg.population)))
    return pop


def validate(cfg: PipelineConfig, out_dir: str | Path | None = None) -> list[Violation]:
    """Every problem that would stop a run, without writing anything."""
    v: list[Violation] = []
    for name in PipelineConfig.REQUIRED:
        if not getattr(cfg, name):
            v.append(Violation(name, "Missing", "required field is not set"))
    bad_stages = [s for s in cfg.stages if s not in STAGES]
    if bad_stages:
        v.append(Violation("stages", "Invalid", f"unknown stages {bad_stages}; choose from {STAGES}"))
    if cfg.sampling_unit not in agg.SAMPLING_UNITS:
        v.append(Violation("sampling_unit", "Invalid", f"must be one of {agg.SAMPLING_UNITS}"))
    try:
        splice = cfg.splice_config()
    except ConfigError as e:
        v.append(Violation("splice_year" if "splice_year" in str(e) else "succession", "Invalid", str(e)))
        splice = None
    if cfg.scenarios:
        for s in cfg.scenarios:
            try:
                proj.scenario_id(s)
            except DataError as e:
                v.append(Violation("scenarios", "Invalid", str(e)))

    def check_path(name, p):
        if p in (None, DEFAULT, POPULATION_FROM_FBS):
            return True
        q = Path(cfg.resolve(p))
        if not q.is_file() or not os.access(q, os.R_OK):
            v.append(Violation(name, "Unreadable", f"{p} is not a readable file"))
            return False
        return True

    files_ok = all(
        [check_path("fbsh", p) for p in cfg.fbsh]
        + [check_path("fbs", p) for p in cfg.fbs]
        + [check_path(n, getattr(cfg, n)) for n in ("commodity_map", "region_scheme", "area_names", "population")]
    )
    projecting = "project" in cfg.stages
    if projecting:
        files_ok &= check_path("impact_units", cfg.impact_units)
        files_ok &= all([check_path("deltas", p) for p in cfg.deltas])

    out = out_dir if out_dir is not None else cfg.output_dir
    if not out:
        v.append(Violation("output_dir", "Missing", "set output_dir or pass --out"))
    else:
        parent = Path(out)
        while not parent.exists() and parent != parent.parent:
            parent = parent.parent
        if not os.access(parent, os.W_OK):
            v.append(Violation("output_dir", "Unwritable", f"{out} is not writable"))

    if not files_ok or any(x.kind == "Missing" for x in v) or splice is None:
        return v

    cmap = scheme = None
    try:
        cmap = load_commodity_map(cfg.resolve(cfg.commodity_map))
    except DataError as e:
        v.append(Violation("commodity_map", type(e).__name__, str(e)))
    try:
        scheme = agg.load_region_scheme(cfg.resolve(cfg.region_scheme))
    except DataError as e:
        v.append(Violation("region_scheme", type(e).__name__, str(e)))
    try:
        old, new, pop_fbs = _parse_inputs(cfg)
        panel = ingest.splice_series(old, new, splice)
    except DataError as e:
        v.append(Violation("fbsh/fbs", type(e).__name__, str(e)))
        return v

    if cmap is not None:
        for code in unmapped_codes((o.item_code for o in panel), cmap):
            v.append(Violation("commodity_map", "Unmapped", f"item code {code} is in the panel but not mapped"))
    countries = sorted({o.country_id for o in panel})
    if scheme is not None:
        for c in countries:
            if c not in scheme:
                v.append(Violation("region_scheme", "UnassignedCountry", f"{c!r} has no region"))
    try:
        pop = _population_series(cfg, pop_fbs)
    except DataError as e:
        v.append(Violation("population", type(e).__name__, str(e)))
    else:
        for c, y in sorted({(o.country_id, o.year) for o in panel}):
            if not pop.has(c, y):
                v.append(Violation("population", "MissingPopulation", f"no population for {c!r} in {y}"))
    if projecting:
        try:
            proj.load_impact_units(cfg.resolve(cfg.impact_units))
            for p in cfg.deltas:
                proj.load_deltas(cfg.resolve(p))
        except DataError as e:
            v.append(Violation("impact_units/deltas", type(e).__name__, str(e)))
    return v


# -- stages -------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class _Context:
    cfg: PipelineConfig
    out: Path  # final output directory (cached artifacts are read from here)
    stage_dir: Path  # where this run writes
    manifest: dict
    written: list[str] = field(default_factory=list)

    def artifact(self, name: str) -> Path:
        p = self.stage_dir / name
        return p if p.exists() else self.out / name

    def write(self, name: str, header, rows) -> None:
        write_csv(self.stage_dir / name, header, rows)
        self.written.append(name)


def _stage_ingest(ctx: _Context) -> None:
    cfg = ctx.cfg
    reports: list[dict] = []
    old, new, pop_fbs = _parse_inputs(cfg, reports)
    panel = ingest.splice_series(old, new, cfg.splice_config())
    pop = _population_series(cfg, pop_fbs)
    ingest.write_supply_csv(ctx.stage_dir / "supply.csv", panel)
    ctx.written.append("supply.csv")
    needed = sorted({(o.country_id, o.year) for o in panel})
    for c, y in needed:
        pop.get(c, y)
    ctx.write(
        "population.csv",
        ("country_id", "year", "population"),
        ((c, y, repr(pop.get(c, y))) for c, y in needed),
    )
    ctx.manifest["parse_reports"] = reports


def _load_group_supplies(ctx: _Context) -> list[FoodGroupSupply]:
    cmap = load_commodity_map(ctx.cfg.resolve(ctx.cfg.commodity_map))
    return group_supply(ingest.read_supply_csv(ctx.artifact("supply.csv")), cmap)


def _load_population(ctx: _Context) -> agg.PopulationSeries:
    return agg.load_population_csv(ctx.artifact("population.csv"))


def _ratio_row(label: str, year: int, sc) -> list:
    return [label, year] + [fixed3(sc.ratios[g]) for g in TABLE_GROUPS] + [fixed3(sc.hdbi)]


_SCORE_HEADER_TAIL = tuple(g.column for g in TABLE_GROUPS) + ("hdbi",)


def _stage_score(ctx: _Context) -> None:
    supplies = _load_group_supplies(ctx)
    ctx.write(
        "country_group_supply.csv",
        ("country_id", "year", "group", "kcal"),
        (
            (s.country_id, s.year, g.value, fixed3(s.kcal[g]))
            for s in supplies
            for g in sorted(REPORTING_GROUPS, key=lambda g: g.value)
        ),
    )
    scores = score_many(supplies, DEFAULT_TARGETS)
    ctx.write(
        "country_scores.csv",
        ("country_id", "year") + _SCORE_HEADER_TAIL,
        (_ratio_row(sc.country_id, sc.year, sc) for sc in scores),
    )


def _region_order(label: str):
    return (label == agg.WORLD, label)


def _stage_aggregate(ctx: _Context) -> None:
    cfg = ctx.cfg
    supplies = _load_group_supplies(ctx)
    pop = _load_population(ctx)
    scheme = agg.load_region_scheme(cfg.resolve(cfg.region_scheme))
    regional = agg.regional_supply(supplies, pop, scheme)
    regional.sort(key=lambda s: (_region_order(s.country_id), s.year))
    groups = sorted(REPORTING_GROUPS, key=lambda g: g.value)
    ctx.write(
        "region_supply.csv",
        ("region", "year", "group", "kcal"),
        ((s.country_id, s.year, g.value, fixed3(s.kcal[g])) for s in regional for g in groups),
    )
    rscores = score_many(regional, DEFAULT_TARGETS)
    ctx.write(
        "region_scores.csv",
        ("region", "year") + _SCORE_HEADER_TAIL,
        (_ratio_row(sc.country_id, sc.year, sc) for sc in rscores),
    )
    ctx.write(
        "plot_region_ratios.csv",
        ("region", "year", "group", "ratio"),
        ((sc.country_id, sc.year, g.value, fixed3(sc.ratios[g])) for sc in rscores for g in groups),
    )

    cscores = score_many(supplies, DEFAULT_TARGETS)
    years = sorted({s.year for s in supplies if cfg.first_year <= s.year <= cfg.last_year})
    decades = sorted({agg.decade_of(y, cfg.last_year) for y in years})
    hdbi_rows, energy_rows = [], []
    for d in decades:
        for ds in agg.decade_mean_hdbi(
            cscores,
            scheme,
            d,
            regions=sorted({agg.assign_region(s.country_id, scheme) for s in cscores if agg.decade_of(s.year, cfg.last_year) == d}),
            sampling_unit=cfg.sampling_unit,
            first_year=cfg.first_year,
            last_year=cfg.last_year,
            include_world=True,
        ):
            hdbi_rows.append(ds)
        energy_rows.extend(
            agg.decade_mean_energy(supplies, pop, scheme, d, first_year=cfg.first_year, last_year=cfg.last_year)
        )
    hdbi_rows.sort(key=lambda r: (_region_order(r.region), r.decade))
    energy_rows.sort(key=lambda r: (_region_order(r.region), r.decade))
    ctx.write(
        "decade_hdbi.csv",
        ("region", "decade", "mean_hdbi", "ci_low", "ci_high", "n"),
        (
            (r.region, r.label, fixed3(r.mean_hdbi), fixed3(r.ci_low), fixed3(r.ci_high), r.n_units)
            for r in hdbi_rows
        ),
    )
    ctx.write(
        "decade_energy.csv",
        ("region", "decade", "mean_kcal", "n_years"),
        ((r.region, f"{r.decade}s", fixed3(r.mean_kcal), r.n_years) for r in energy_rows),
    )
    ctx.write(
        "plot_decade_hdbi.csv",
        ("region", "decade", "mean_hdbi", "ci_low", "ci_high", "n", "degenerate"),
        (
            (r.region, r.label, fixed3(r.mean_hdbi), fixed3(r.ci_low), fixed3(r.ci_high), r.n_units, int(r.degenerate))
            for r in hdbi_rows
        ),
    )
    ctx.manifest["aggregation"] = {
        "regional_supply": "population-weighted mean of member countries",
        "decade_hdbi": f"unweighted mean over {cfg.sampling_unit} values, 95% normal interval",
        "decade_energy": "mean over bin years of population-weighted total energy",
    }


def _merge_deltas(tables: Sequence[proj.DeltaTable]) -> proj.DeltaTable:
    merged: dict = {}
    for t in tables:
        for k, m in t.values.items():
            if k in merged and merged[k] != m:
                raise OverlapConflict(k, "multiplier given twice with different values")
            merged[k] = m
    return proj.DeltaTable(merged)


def _stage_project(ctx: _Context) -> None:
    cfg = ctx.cfg
    supplies = _load_group_supplies(ctx)
    pop = _load_population(ctx)
    scheme = agg.load_region_scheme(cfg.resolve(cfg.region_scheme))
    units = proj.load_impact_units(cfg.resolve(cfg.impact_units))
    deltas = _merge_deltas([proj.load_deltas(cfg.resolve(p)) for p in cfg.deltas])
    base = proj.build_impact_base(supplies, pop, units)
    if not base.members:
        raise DataError(f"no IMPACT unit has complete {proj.BASE_YEAR} data")
    scenarios = deltas.scenarios if cfg.scenarios is None else [proj.scenario_id(s) for s in cfg.scenarios]

    groups = sorted(REPORTING_GROUPS, key=lambda g: g.value)
    traj = []
    for s in scenarios:
        traj.extend(proj.trajectory(s, base, supplies, deltas, scheme, pop))
    traj.sort(key=lambda t: (proj.SCENARIOS.index(t.scenario), _region_order(t.region), t.year))
    ctx.write(
        "projection_ratios.csv",
        ("scenario", "region", "year", "group", "ratio"),
        ((t.scenario, t.region, t.year, g.value, fixed3(t.ratios[g])) for t in traj for g in groups),
    )
    ctx.write(
        "projection_hdbi.csv",
        ("scenario", "region", "year", "hdbi"),
        ((t.scenario, t.region, t.year, fixed3(t.hdbi)) for t in traj),
    )
    by_region = sorted(traj, key=lambda t: (_region_order(t.region), t.year, proj.SCENARIOS.index(t.scenario)))
    ctx.write(
        "plot_projection_hdbi.csv",
        ("region", "year", "scenario", "hdbi"),
        ((t.region, t.year, t.scenario, fixed3(t.hdbi)) for t in by_region),
    )
    ctx.write(
        "projection_dropped_units.csv",
        ("unit_id", "reason", "missing_members"),
        ((d.unit_id, d.reason, ";".join(d.missing)) for d in base.dropped),
    )
    ctx.manifest["projection"] = {
        "scenarios": scenarios,
        "population_weights": f"frozen at {proj.BASE_YEAR}",
        "units_used": len(base.members),
        "units_dropped": len(base.dropped),
    }


_STAGE_FUNCS = {
    "ingest": _stage_ingest,
    "score": _stage_score,
    "aggregate": _stage_aggregate,
    "project": _stage_project,
}
_UPSTREAM_INPUTS = {
    "score": ("supply.csv",),
    "aggregate": ("supply.csv", "population.csv"),
    "project": ("supply.csv", "population.csv"),
}


def _input_digests(cfg: PipelineConfig) -> dict:
    out = {}

    def add(name, p):
        if p in (None, DEFAULT, POPULATION_FROM_FBS):
            out[name] = p
        else:
            out[name] = {"path": p, "sha256": _sha256(Path(cfg.resolve(p)))}

    for i, p in enumerate(cfg.fbsh):
        add(f"fbsh[{i}]", p)
    for i, p in enumerate(cfg.fbs):
        add(f"fbs[{i}]", p)
    for name in ("commodity_map", "region_scheme", "area_names", "population"):
        add(name, getattr(cfg, name))
    if "project" in cfg.stages:
        add("impact_units", cfg.impact_units)
        for i, p in enumerate(cfg.deltas):
            add(f"deltas[{i}]", p)
    return out


def run(
    cfg: PipelineConfig,
    out_dir: str | Path | None = None,
    stages: Sequence[str] | None = None,
) -> list[str]:
    """Run ``stages`` (default: those enabled in the config) and return written files.

    Missing upstream artifacts are produced first. All files are staged in
    a scratch directory next to the output and moved in only on success,
    so a failure leaves the output directory as it was.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir or "")
    if not str(out):
        raise ConfigError("no output directory")
    wanted = list(stages) if stages is not None else [s for s in STAGES if s in cfg.stages]
    plan = []
    for s in STAGES:
        if s in wanted:
            plan.append(s)
    # pull in upstream producers of artifacts that are not cached
    needed = {a for s in plan for a in _UPSTREAM_INPUTS.get(s, ())}
    if "ingest" not in plan and any(not (out / a).exists() for a in needed):
        plan.insert(0, "ingest")

    out.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".hdbi-", dir=out.parent))
    manifest: dict = {
        "config": cfg.echo(),
        "stages": plan,
        "inputs": _input_digests(cfg),
        "format": {"decimals": 3, "rounding": "half-even", "encoding": "utf-8"},
    }
    ctx = _Context(cfg, out, scratch, manifest)
    try:
        for s in plan:
            try:
                _STAGE_FUNCS[s](ctx)
            except HdbiError as e:
                raise StageError(s, e) from e
        if "parse_reports" not in manifest and (out / "manifest.json").exists():
            # keep the reports from the run that produced the cached panel
            prev = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
            manifest["parse_reports"] = prev.get("parse_reports", [])
        manifest["outputs"] = {
            name: _sha256(scratch / name) for name in sorted(ctx.written)
        }
        (scratch / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        for name in sorted(ctx.written) + ["manifest.json"]:
            os.replace(scratch / name, out / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    return sorted(ctx.written)
