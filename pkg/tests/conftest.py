import csv
from pathlib import Path

import pytest

from hdbi.core import HDB_GROUPS, REPORTING_GROUPS, FoodGroup, FoodGroupSupply

FIXTURES = Path(__file__).parent / "fixtures"
MINI = FIXTURES / "mini"


def read_table(name):
    with open(FIXTURES / name, encoding="utf-8") as f:
        return list(csv.DictReader(f))


def ratios_of(row):
    """The six index ratios of a published-table row, keyed by group."""
    return {g: float(row[g.column]) for g in HDB_GROUPS}


def supply(cid, year, **kcal):
    """FoodGroupSupply from column-style keywords, e.g. ``starchy_staples=500``."""
    by_col = {g.column: g for g in REPORTING_GROUPS}
    return FoodGroupSupply.of(cid, year, {by_col[k]: v for k, v in kcal.items()})


@pytest.fixture
def mini_config(tmp_path):
    """Copy of the mini fixture directory; returns the config path inside it."""
    import shutil

    dst = tmp_path / "mini"
    shutil.copytree(MINI, dst, ignore=shutil.ignore_patterns("golden", "__pycache__"))
    return dst / "config.yaml"


__all__ = ["ACCEPTANCE", "FIXTURES", "MINI", "FoodGroup", "read_table", "ratios_of", "supply"]


# acceptance criteria record their verdicts here; printed after the run
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[1])):
        terminalreporter.write_line(f"{key}: {ACCEPTANCE[key]}")
