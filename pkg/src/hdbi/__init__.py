"""Healthy Diet Basket adequacy ratios and index from FAO Food Balance Sheets."""
from .core import (
    DEFAULT_TARGETS,
    HDB_GROUPS,
    REPORTING_GROUPS,
    FoodGroup,
    FoodGroupSupply,
    HdbiScore,
    HdbTargets,
    adequacy_ratio,
    hdbi,
    score,
    score_many,
    total_energy,
)
from .errors import (
    ConfigError,
    DataError,
    DuplicateMapping,
    EmptyBin,
    HdbiError,
    InvalidDelta,
    MissingColumn,
    MissingDelta,
    MissingMember,
    MissingPopulation,
    OverlapConflict,
    SpliceConfigError,
    UnassignedCountry,
    UnknownGroup,
    Unmapped,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "DEFAULT_TARGETS",
    "DataError",
    "DuplicateMapping",
    "EmptyBin",
    "FoodGroup",
    "FoodGroupSupply",
    "HDB_GROUPS",
    "HdbTargets",
    "HdbiError",
    "HdbiScore",
    "InvalidDelta",
    "MissingColumn",
    "MissingDelta",
    "MissingMember",
    "MissingPopulation",
    "OverlapConflict",
    "REPORTING_GROUPS",
    "SpliceConfigError",
    "UnassignedCountry",
    "UnknownGroup",
    "Unmapped",
    "adequacy_ratio",
    "hdbi",
    "score",
    "score_many",
    "total_energy",
]
