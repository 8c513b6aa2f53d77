"""Deterministic CSV output."""
from __future__ import annotations

import csv
import math
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Iterable, Sequence

_Q = Decimal("0.001")


def fixed3(x: float) -> str:
    """Three decimals, half-even on the shortest decimal form of ``x``."""
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    d = Decimal(repr(float(x))).quantize(_Q, rounding=ROUND_HALF_EVEN)
    if d == 0:
        d = abs(d)
    return f"{d:.3f}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8-sig") as f:
        return list(csv.DictReader(f))
