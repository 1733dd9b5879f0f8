"""Post-hoc sparsification of posterior draws and the greedy rank search.

Sparsification clusters the absolute values of each draw with 1-d 2-means:
the low cluster is split repeatedly while the sub-cluster means stay more
than a gap ``b`` apart, and whatever remains is counted as that draw's zero
set.  The median zero-count across draws then decides how many of the
smallest posterior-median magnitudes are zeroed in the point estimate.  The
result depends on ``b``, so reports carry it prominently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "default_gap",
    "sequential_2means",
    "SparsifiedEstimate",
    "rank_search",
    "RankSearchTrace",
]

_LLOYD_CAP = 100


def _two_means(values: np.ndarray):
    """1-d 2-means (Lloyd) with extreme-value initialization.

    Returns ``(low_mask, low_mean, high_mean)`` or ``None`` when the values
    cannot be split (all equal).  Assignment uses the midpoint threshold with
    ties going to the low cluster, so the result is deterministic.
    """
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        return None
    c_lo, c_hi = lo, hi
    mask = values <= 0.5 * (c_lo + c_hi)
    for _ in range(_LLOYD_CAP):
        mask = values <= 0.5 * (c_lo + c_hi)
        new_lo = float(values[mask].mean())
        new_hi = float(values[~mask].mean())
        if new_lo == c_lo and new_hi == c_hi:
            break
        c_lo, c_hi = new_lo, new_hi
    return mask, c_lo, c_hi


def _zero_count(draw_abs: np.ndarray, b: float) -> int:
    """Estimated number of zero-valued entries in one draw (by |value|)."""
    split = _two_means(draw_abs)
    if split is None:
        # single degenerate cluster: no separation anywhere
        return draw_abs.size
    low = draw_abs[split[0]]
    while True:
        split = _two_means(low)
        if split is None:
            break  # homogeneous cluster
        mask, m_lo, m_hi = split
        if m_hi - m_lo <= b:
            break  # sub-clusters indistinguishable at gap b: stop, keep both
        low = low[mask]
        if low.size < 2:
            break
    return int(low.size)


@dataclass
class SparsifiedEstimate:
    estimate: np.ndarray
    n_zero: int
    zero_counts: np.ndarray  # per-draw estimated zero counts
    gap: float


def default_gap(draws: np.ndarray) -> float:
    """Default separation threshold: 1e-3 times the median (over draws) of
    each draw's largest magnitude."""
    draws = np.asarray(draws, dtype=np.float64)
    return 1e-3 * float(np.median(np.abs(draws).max(axis=1)))


def sequential_2means(draws, b: float | None = None) -> SparsifiedEstimate:
    """Sparse point estimate from an (S, P) matrix of posterior draws.

    Per draw, iterated 2-means on absolute values estimates how many entries
    are zero; the median count ``n_zero`` across draws is then applied to the
    elementwise posterior median, zeroing its ``n_zero`` smallest magnitudes
    (exact zeros count toward that set first).
    """
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim == 1:
        draws = draws[None, :]
    s, p = draws.shape
    if s < 1:
        raise ValueError("need at least one draw")
    if p < 2:
        raise ValueError("need at least two parameters to cluster")
    if b is None:
        b = default_gap(draws)
    b = float(b)
    if not b > 0.0:
        raise ValueError(f"gap threshold must be positive, got {b!r}")
    counts = np.fromiter(
        (_zero_count(np.abs(draws[i]), b) for i in range(s)), dtype=np.int64, count=s
    )
    n_zero = int(np.sort(counts)[(s - 1) // 2])  # lower median: integer count
    estimate = np.median(draws, axis=0)
    order = np.argsort(np.abs(estimate), kind="stable")
    estimate = estimate.copy()
    estimate[order[:n_zero]] = 0.0
    return SparsifiedEstimate(estimate=estimate, n_zero=n_zero,
                              zero_counts=counts, gap=b)


# ----------------------------------------------------------------------
# rank search


@dataclass
class RankSearchTrace:
    visited: list       # [(ranks tuple, dic float)] in fit order
    selected: tuple

    def as_dict(self) -> dict:
        return dict(self.visited)


def rank_search(fit_dic: Callable[[tuple], float], order: int,
                max_rank: int) -> RankSearchTrace:
    """Greedy DIC search over rank vectors.

    Phase 1 fits equal ranks ``(r, ..., r)`` for increasing ``r`` until the
    DIC stops decreasing.  Phase 2 repeatedly tries decrementing one margin of
    the current best ranks (last margin first), moving to the best strictly
    improving candidate; equal-DIC improvements prefer the lowest margin
    index.  No rank vector is fitted twice; fit failures score ``inf``.
    """
    if max_rank < 1:
        raise ValueError("max_rank must be >= 1")

    seen: dict = {}

    def evaluate(ranks: tuple) -> float:
        try:
            value = float(fit_dic(ranks))
        except Exception:
            value = float("inf")
        seen[ranks] = value
        return value

    # phase 1: equal ranks until DIC rises
    best_ranks = (1,) * order
    best_dic = evaluate(best_ranks)
    for r in range(2, max_rank + 1):
        ranks = (r,) * order
        value = evaluate(ranks)
        if value >= best_dic:
            break
        best_ranks, best_dic = ranks, value

    # phase 2: single-margin decrements from the running baseline
    while True:
        candidates = []
        for j in range(order - 1, -1, -1):  # last margin first
            if best_ranks[j] <= 1:
                continue
            cand = best_ranks[:j] + (best_ranks[j] - 1,) + best_ranks[j + 1 :]
            if cand in seen:
                continue
            candidates.append((j, cand))
        if not candidates:
            break
        scored = [(evaluate(cand), j, cand) for j, cand in candidates]
        value, _, cand = min(scored, key=lambda item: (item[0], item[1]))
        if value >= best_dic:
            break
        best_ranks, best_dic = cand, value

    visited = list(seen.items())
    return RankSearchTrace(visited=visited, selected=best_ranks)
