"""Copy-offset difference counts for fast exact correlations.

Fix a base stage ``s``.  The stage-K tower contains ``W_K / W_s`` copies of
the stage-s tower at positions ``C_K``.  Write ``N_K(t)`` for the number of
ordered pairs ``(c, c')`` in ``C_K`` with ``c' - c = t``.  For level sets
``A, B`` at stage ``s``, the number of stage-K level pairs ``(x, y)`` with
``x`` in refined ``A``, ``y`` in refined ``B`` and ``y - x = n`` is

    sum_d  cross(A, B)(d) * N_K(n - d)

where ``cross(A, B)(d)`` counts pairs of stage-s levels at distance ``d``.
Since ``C_{K} = union_i (o_i + C_{K-1})`` we have
``N_K(t) = sum_{i, i'} N_{K-1}(t - (o_i' - o_i))``, which is evaluated on
windows so that towers of height ~10^13 never get enumerated.

This is an int64 fast path; callers check :func:`fits_int64` first.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from .construction import ConstructionSpec

TABLE_LIMIT = 1 << 24
WINDOW_CACHE = 256
_I64_SAFE = 1 << 62


def fits_int64(spec: ConstructionSpec, s: int, K: int, weight: int) -> bool:
    """True when positions at stage K and weighted counts stay inside int64."""
    copies = spec.width_denominator(K) // spec.width_denominator(s)
    # for fixed t each copy c has at most one partner c', so N_K(t) <= copies
    return spec.height(K) < _I64_SAFE and copies * max(weight, 1) < _I64_SAFE


def cross_counts(a_runs, b_runs, h: int) -> np.ndarray:
    """``out[d + h] = #{(x, y) : x in A, y in B, y - x = d}`` for |d| <= h."""
    size = 2 * h + 1
    second = np.zeros(size + 3, dtype=np.int64)
    if not a_runs or not b_runs:
        return second[:size]
    a = np.array(a_runs, dtype=np.int64)
    b = np.array(b_runs, dtype=np.int64)
    a1, b1 = a[:, 0][:, None], a[:, 1][:, None]
    a2, b2 = b[:, 0][None, :], b[:, 1][None, :]
    # second difference of the box cross-correlation
    for pos, sign in ((a2 - b1, 1), (a2 - a1 + 1, -1), (b2 - b1 + 1, -1), (b2 - a1 + 2, 1)):
        np.add.at(second, (pos + h).ravel(), sign)
    return np.cumsum(np.cumsum(second))[:size]


class LagTable:
    """Windows of ``N_K`` for one spec and base stage, with cached full tables."""

    def __init__(self, spec: ConstructionSpec, base_stage: int, table_limit: int = TABLE_LIMIT):
        self.spec = spec
        self.s = base_stage
        self.table_limit = table_limit
        self._tables: dict[int, np.ndarray] = {}
        self._offsets: dict[int, np.ndarray] = {}
        self._windows: OrderedDict = OrderedDict()
        self._h_s = spec.height(base_stage)

    @classmethod
    def for_spec(cls, spec: ConstructionSpec, base_stage: int) -> "LagTable":
        key = ("lagtable", base_stage)
        if key not in spec._cache:
            spec._cache[key] = cls(spec, base_stage)
        return spec._cache[key]

    def span(self, K: int) -> int:
        return self.spec.height(K) - self._h_s

    def _offs(self, j: int) -> np.ndarray:
        if j not in self._offsets:
            self._offsets[j] = np.array(self.spec.stage(j).offsets, dtype=np.int64)
        return self._offsets[j]

    def _tabulable(self, K: int) -> bool:
        return 2 * self.span(K) + 1 <= self.table_limit

    def table(self, K: int) -> np.ndarray:
        if K not in self._tables:
            H = self.span(K)
            if K == self.s:
                self._tables[K] = np.ones(1, dtype=np.int64)
            else:
                self._tables[K] = self._compose(K, -H, H)
        return self._tables[K]

    def window(self, K: int, lo: int, hi: int) -> np.ndarray:
        """``N_K(t)`` for ``lo <= t <= hi``."""
        out = np.zeros(hi - lo + 1, dtype=np.int64)
        H = self.span(K)
        a, b = max(lo, -H), min(hi, H)
        if a > b:
            return out
        if self._tabulable(K):
            out[a - lo : b - lo + 1] = self.table(K)[a + H : b + H + 1]
            return out
        key = (K, a, b)
        part = self._windows.get(key)
        if part is None:
            part = self._compose(K, a, b)
            self._windows[key] = part
            if len(self._windows) > WINDOW_CACHE:
                self._windows.popitem(last=False)
        else:
            self._windows.move_to_end(key)
        out[a - lo : b - lo + 1] = part
        return out

    def _pair_deltas(self, j: int, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """Distinct offset differences ``o_i' - o_i`` of stage j in [lo, hi], with multiplicity."""
        o = self._offs(j)
        start = np.searchsorted(o, o + lo, side="left")
        stop = np.searchsorted(o, o + hi, side="right")
        lens = stop - start
        total = int(lens.sum())
        if total == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        ii = np.repeat(np.arange(len(o)), lens)
        first = np.repeat(start - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
        jj = first + np.arange(total)
        return np.unique(o[jj] - o[ii], return_counts=True)

    def _compose(self, K: int, a: int, b: int) -> np.ndarray:
        res = np.zeros(b - a + 1, dtype=np.int64)
        Hp = self.span(K - 1)
        deltas, counts = self._pair_deltas(K - 1, a - Hp, b + Hp)
        x0 = np.maximum(a - deltas, -Hp)
        x1 = np.minimum(b - deltas, Hp)
        if self._tabulable(K - 1):
            src = self.table(K - 1)
            for d, c, u, v in zip(deltas.tolist(), counts.tolist(), x0.tolist(), x1.tolist()):
                res[u + d - a : v + d - a + 1] += c * src[u + Hp : v + Hp + 1]
            return res
        # merge the requested sub-windows of N_{K-1} into disjoint blocks
        order = np.argsort(x0, kind="stable")
        blocks: list[list[int]] = []
        for u, v in zip(x0[order].tolist(), x1[order].tolist()):
            if blocks and u <= blocks[-1][1] + 1:
                blocks[-1][1] = max(blocks[-1][1], v)
            else:
                blocks.append([u, v])
        starts = [blk[0] for blk in blocks]
        data = [self.window(K - 1, u, v) for u, v in blocks]
        which = np.searchsorted(np.array(starts, dtype=np.int64), x0, side="right") - 1
        for d, c, u, v, w in zip(deltas.tolist(), counts.tolist(), x0.tolist(), x1.tolist(), which.tolist()):
            src = data[w]
            bu = starts[w]
            res[u + d - a : v + d - a + 1] += c * src[u - bu : v - bu + 1]
        return res
