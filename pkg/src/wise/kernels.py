"""Hot numeric kernels, each with a numba loop version and a numpy version.

``wise_matrix`` scores a whole fleet at once and ``segment_stats`` reduces
many utilization series to mean and nearest-rank percentiles. The exported
names point at the numba versions unless numba is missing or disabled through
``WISE_DISABLE_NUMBA``.
"""

from __future__ import annotations

import numpy as np

from wise._accel import NUMBA_ENABLED, njit

__all__ = [
    "wise_matrix",
    "wise_matrix_numpy",
    "wise_matrix_numba",
    "segment_stats",
    "segment_stats_numpy",
    "segment_stats_numba",
    "nearest_rank_index",
]


def nearest_rank_index(k, n):
    """1-based nearest-rank position ``ceil(k * n / 100)`` in integer arithmetic."""
    return (k * n + 99) // 100


# --------------------------------------------------------------------------
# fleet scoring
# --------------------------------------------------------------------------


@njit(cache=False)
def wise_matrix_numba(rates, target, spread, weight, rmax, alpha, has_target, has_max):
    m, k = rates.shape
    z = np.empty((m, k))
    st = np.empty((m, k))
    se = np.empty((m, k))
    pen = np.zeros((m, k))
    scores = np.empty((m, 4))
    for i in range(m):
        n = 0
        l1_tanh = 0.0
        sq_tanh = 0.0
        l1_exp = 0.0
        sq_exp = 0.0
        total_pen = 0.0
        for j in range(k):
            x = rates[i, j]
            if has_max[i, j] and x >= rmax[i, j]:
                pen[i, j] = alpha[i, j]
                total_pen += alpha[i, j]
            if has_target[i, j]:
                zz = (x - target[i, j]) / spread[i, j]
                t = np.tanh(zz)
                e = np.exp(-abs(zz))
                w = weight[i, j]
                z[i, j] = zz
                st[i, j] = t
                se[i, j] = e
                l1_tanh += w * abs(t)
                sq_tanh += (w * t) * (w * t)
                l1_exp += w * e
                sq_exp += (w * e) * (w * e)
                n += 1
            else:
                z[i, j] = np.nan
                st[i, j] = np.nan
                se[i, j] = np.nan
        if n == 0:
            for c in range(4):
                scores[i, c] = np.nan
        else:
            scores[i, 0] = min(l1_tanh / n + total_pen, 1.0)
            scores[i, 1] = min(np.sqrt(sq_tanh) / n + total_pen, 1.0)
            scores[i, 2] = max(l1_exp / n - total_pen, 0.0)
            scores[i, 3] = max(np.sqrt(sq_exp) / n - total_pen, 0.0)
    return z, st, se, pen, scores


def wise_matrix_numpy(rates, target, spread, weight, rmax, alpha, has_target, has_max):
    """Vectorized twin of :func:`wise_matrix_numba`.

    All inputs are ``(machines, resources)`` arrays. Returns z-scores, tanh and
    exp resource scores (NaN where a resource has no target), penalty terms and
    a ``(machines, 4)`` array of S1..S4. Machines without any target-bearing
    resource get NaN scores; callers reject those.
    """
    has_target = np.asarray(has_target, dtype=bool)
    has_max = np.asarray(has_max, dtype=bool)
    safe_spread = np.where(has_target, spread, 1.0)
    z = np.where(has_target, (rates - np.where(has_target, target, 0.0)) / safe_spread, np.nan)
    zf = np.where(has_target, z, 0.0)
    st_all = np.tanh(zf)
    se_all = np.exp(-np.abs(zf))
    st = np.where(has_target, st_all, np.nan)
    se = np.where(has_target, se_all, np.nan)
    pen = np.where(has_max & (rates >= np.where(has_max, rmax, np.inf)), alpha, 0.0)

    w = np.where(has_target, weight, 0.0)
    n = has_target.sum(axis=1).astype(np.float64)
    total_pen = pen.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s1 = np.minimum((w * np.abs(st_all)).sum(axis=1) / n + total_pen, 1.0)
        s2 = np.minimum(np.sqrt(((w * st_all) ** 2).sum(axis=1)) / n + total_pen, 1.0)
        s3 = np.maximum((w * se_all).sum(axis=1) / n - total_pen, 0.0)
        s4 = np.maximum(np.sqrt(((w * se_all) ** 2).sum(axis=1)) / n - total_pen, 0.0)
    scores = np.stack([s1, s2, s3, s4], axis=1)
    scores[n == 0] = np.nan
    return z, st, se, pen, scores


# --------------------------------------------------------------------------
# series aggregation
# --------------------------------------------------------------------------


@njit(cache=False)
def segment_stats_numba(values, offsets, ks):
    nseg = offsets.shape[0] - 1
    means = np.empty(nseg)
    pct = np.empty((nseg, ks.shape[0]))
    for s in range(nseg):
        lo = offsets[s]
        hi = offsets[s + 1]
        n = hi - lo
        seg = np.sort(values[lo:hi])
        acc = 0.0
        for i in range(lo, hi):
            acc += values[i]
        means[s] = acc / n
        for j in range(ks.shape[0]):
            pct[s, j] = seg[(ks[j] * n + 99) // 100 - 1]
    return means, pct


def segment_stats_numpy(values, offsets, ks):
    """Mean and nearest-rank percentiles for consecutive segments of ``values``.

    ``offsets`` has one more entry than there are segments; segment ``s`` is
    ``values[offsets[s]:offsets[s + 1]]`` and must be non-empty. ``ks`` holds
    integer percentiles in 1..99. Returns ``(means, pct)`` with
    ``pct[s, j]`` the ``ks[j]``-th percentile of segment ``s``.
    """
    values = np.asarray(values, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    ks = np.asarray(ks, dtype=np.int64)
    lengths = np.diff(offsets)
    seg_ids = np.repeat(np.arange(lengths.size), lengths)
    order = np.lexsort((values, seg_ids))
    ordered = values[order]
    means = np.add.reduceat(values, offsets[:-1]) / lengths if lengths.size else np.empty(0)
    idx = offsets[:-1, None] + nearest_rank_index(ks[None, :], lengths[:, None]) - 1
    return means, ordered[idx]


if NUMBA_ENABLED:
    wise_matrix = wise_matrix_numba
    segment_stats = segment_stats_numba
else:
    wise_matrix = wise_matrix_numpy
    segment_stats = segment_stats_numpy
