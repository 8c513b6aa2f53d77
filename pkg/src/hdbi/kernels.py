"""Array kernels behind the scoring and aggregation stages.

Each kernel has a numba version and a numpy version that accumulate in the
same order, so both backends give bit-identical results. ``BACKEND`` names
the one in use; pass ``backend=`` to pick explicitly.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAS_NUMBA, njit

BACKEND = "numba" if HAS_NUMBA else "numpy"

N_HDB_GROUPS = 6


# -- numba -------------------------------------------------------------------


@njit(cache=True)
def _hdbi_rows_nb(ratios, out):
    n, k = ratios.shape
    gaps = np.empty(k)
    for i in range(n):
        # insertion sort; k is 6
        for j in range(k):
            gap = 1.0 - ratios[i, j]
            gap = gap if gap > 0.0 else 0.0
            m = j
            while m > 0 and gaps[m - 1] > gap:
                gaps[m] = gaps[m - 1]
                m -= 1
            gaps[m] = gap
        total = 0.0
        for j in range(k):
            total += gaps[j]
        out[i] = 1.0 - total / k


@njit(cache=True)
def _scatter_sum_nb(rows, cols, values, out):
    for i in range(values.shape[0]):
        out[rows[i], cols[i]] += values[i]


@njit(cache=True)
def _weighted_segment_sums_nb(values, weights, seg, num, den):
    n, g = values.shape
    for i in range(n):
        s = seg[i]
        w = weights[i]
        den[s] += w
        for j in range(g):
            num[s, j] += w * values[i, j]


# -- numpy -------------------------------------------------------------------


def _hdbi_rows_np(ratios, out):
    gaps = np.sort(np.maximum(1.0 - ratios, 0.0), axis=1)
    total = np.zeros(ratios.shape[0])
    # column by column so the sum order matches the compiled loop
    for j in range(ratios.shape[1]):
        total += gaps[:, j]
    out[:] = 1.0 - total / ratios.shape[1]


def _scatter_sum_np(rows, cols, values, out):
    np.add.at(out, (rows, cols), values)


def _weighted_segment_sums_np(values, weights, seg, num, den):
    np.add.at(den, seg, weights)
    np.add.at(num, seg, weights[:, None] * values)


_IMPL = {
    "numba": (_hdbi_rows_nb, _scatter_sum_nb, _weighted_segment_sums_nb),
    "numpy": (_hdbi_rows_np, _scatter_sum_np, _weighted_segment_sums_np),
}


def _impl(backend):
    backend = backend or BACKEND
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is disabled or missing")
    try:
        return _IMPL[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}; use 'numba' or 'numpy'") from None


# -- public ------------------------------------------------------------------


def _check_index(idx: np.ndarray, bound: int, name: str) -> None:
    # numba kernels do not bounds-check
    if idx.size and (idx.min() < 0 or idx.max() >= bound):
        raise ValueError(f"{name} index out of range [0, {bound})")


def hdbi_rows(ratios, backend: str | None = None) -> np.ndarray:
    """HDBI for each row of an ``(n, 6)`` array of adequacy ratios.

    Ratios at or above 1 contribute no shortfall; the index is one minus
    the mean clamped shortfall. Shortfalls are summed in ascending order,
    which makes the result exactly invariant to column permutations.
    """
    r = np.ascontiguousarray(ratios, dtype=np.float64)
    if r.ndim != 2 or r.shape[1] != N_HDB_GROUPS:
        raise ValueError(f"expected shape (n, {N_HDB_GROUPS}), got {r.shape}")
    if not np.all(r >= 0.0):
        raise ValueError("adequacy ratios must be non-negative and not NaN")
    out = np.empty(r.shape[0])
    _impl(backend)[0](r, out)
    return out


def scatter_sum(rows, cols, values, shape, backend: str | None = None) -> np.ndarray:
    """Accumulate ``values`` into a zero matrix at ``(rows, cols)``, in input order."""
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
        raise ValueError("rows, cols and values must be 1-d arrays of equal length")
    _check_index(rows, shape[0], "rows")
    _check_index(cols, shape[1], "cols")
    out = np.zeros(shape)
    _impl(backend)[1](rows, cols, values, out)
    return out


def weighted_segment_mean(values, weights, seg, n_seg: int, backend: str | None = None):
    """Weighted mean of the rows of ``values`` within each segment.

    Returns ``(means, weight_totals)``; segments with no weight get NaN means.
    """
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    w = np.ascontiguousarray(weights, dtype=np.float64)
    seg = np.ascontiguousarray(seg, dtype=np.int64)
    if not (w.shape == seg.shape == v.shape[:1]):
        raise ValueError("values, weights and seg must have the same number of rows")
    _check_index(seg, n_seg, "seg")
    num = np.zeros((n_seg, v.shape[1]))
    den = np.zeros(n_seg)
    _impl(backend)[2](v, w, seg, num, den)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = num / den[:, None]
    means[den == 0] = np.nan
    return means, den
