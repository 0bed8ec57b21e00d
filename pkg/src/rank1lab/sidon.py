"""Double Sidon constructions (infinite measure) and the staircase time-set P.

``P(h, eps) = {d*h + d(d-1)/2 : d = 1..floor((1-eps) h)}`` has strictly
increasing gaps ``h + d``; its self-overlap ``|P & (P + m)|`` is computed
exactly for single ``m`` (two pointers) or for every ``m`` at once (a
vectorized histogram of all pairwise differences).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .construction import ConstructionSpec, make_spec, total_measure
from .dynamics import correlation
from .errors import EmptyPSet, InvalidParameters
from .levelsets import LevelSet, measure
from .wlp import THETA, FitReport, WeakLimitHypothesis, _tie_key


def sidon_spec(h1: int, r_schedule: int | Sequence[int], growth: int = 2, max_stage: int = 5) -> ConstructionSpec:
    """Double Sidon recipe; ``r_schedule`` gives r'_j (half the cutting number)."""
    if growth < 2:
        raise InvalidParameters("growth factor must be >= 2")
    if isinstance(r_schedule, int):
        halves = [r_schedule] * max_stage
    else:
        halves = list(r_schedule)
    if len(halves) < max_stage or any(r < 1 for r in halves):
        raise InvalidParameters("r_schedule must give r'_j >= 1 for every stage")
    cutting = {"rule": "explicit", "values": [2 * r for r in halves[:max_stage]]}
    return make_spec("double_sidon", h1, cutting, {"rule": "sidon", "growth": growth}, max_stage)


def total_measure_growth(spec: ConstructionSpec) -> list[Fraction]:
    """Raw measure of each stage tower, 1..max_stage+1."""
    return [total_measure(spec, J)[0] for J in range(1, spec.max_stage + 2)]


@dataclass(frozen=True)
class PSet:
    h: int
    eps: float
    elements: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.elements)


def p_set(h: int, eps: float) -> PSet:
    if h < 1 or not 0 < eps < 1:
        raise InvalidParameters("p_set needs h >= 1 and 0 < eps < 1")
    # decimal reading of eps, so that 0.2 means 1/5 rather than its binary float
    count = math.floor((1 - Fraction(repr(float(eps)))) * h)
    if count < 1:
        raise EmptyPSet(f"floor((1 - {eps}) * {h}) = {count}")
    return PSet(h, eps, tuple(d * h + d * (d - 1) // 2 for d in range(1, count + 1)))


def p_overlap(h: int, eps: float, m: int, pset: PSet | None = None) -> int:
    """``|P & (P + m)|`` by a two-pointer sweep."""
    P = (pset or p_set(h, eps)).elements
    m = abs(m)
    i = k = count = 0
    while i < len(P) and k < len(P):
        target = P[k] + m
        if P[i] == target:
            count += 1
            i += 1
            k += 1
        elif P[i] < target:
            i += 1
        else:
            k += 1
    return count


def p_overlap_counts(h: int, eps: float) -> np.ndarray:
    """``out[m] = |P & (P + m)|`` for ``0 <= m <= max(P)``."""
    P = np.array(p_set(h, eps).elements, dtype=np.int64)
    diffs = np.concatenate([P[lag:] - P[:-lag] for lag in range(1, len(P))] or [np.zeros(0, np.int64)])
    out = np.bincount(diffs, minlength=int(P[-1]) + 1)
    out[0] = len(P)
    return out.astype(np.int64)


def p_overlap_profile(h: int, eps: float, m_range: Iterable[int]) -> tuple[list[tuple[int, int]], int, int]:
    """``[(m, count)]`` over ``m_range`` plus the argmax and max."""
    counts = p_overlap_counts(h, eps)
    rows = [(m, int(counts[abs(m)]) if abs(m) < len(counts) else 0) for m in m_range]
    if not rows:
        return rows, 0, 0
    arg, best = max(rows, key=lambda row: (row[1], -abs(row[0])))
    return rows, arg, best


def iter_profile(h: int, eps: float, m_from: int, m_to: int) -> Iterator[tuple[int, int]]:
    counts = p_overlap_counts(h, eps)
    for m in range(m_from, m_to + 1):
        yield m, int(counts[abs(m)]) if abs(m) < len(counts) else 0


def half_time(spec: ConstructionSpec, j: int) -> int:
    """Distance between column i and column r'+i of the stage-j cut."""
    stage = spec.stage(j)
    return stage.offsets[stage.r // 2]


def sidon_wlp_check(
    spec: ConstructionSpec,
    n: int,
    family: Sequence[tuple[LevelSet, LevelSet]],
    m_max: int = 4,
    k_window: tuple[int, int] = (-8, 8),
) -> FitReport:
    """Fit raw correlations against ``2^-m corr(A, B, k)`` and the zero limit.

    Raw units throughout; the residual is the largest deviation divided by
    ``min(mu(A), mu(B))`` of the pair, so it is scale free.
    """
    if not family:
        raise ValueError("family must be nonempty")
    scales = [min(measure(spec, A), measure(spec, B)) for A, B in family]
    observed = [correlation(spec, A, B, n, strict=False) for A, B in family]
    ks = range(k_window[0], k_window[1] + 1)
    by_k = {k: [correlation(spec, A, B, k, strict=False).raw for A, B in family] for k in ks}

    def residual(hyp: WeakLimitHypothesis) -> float:
        worst = 0.0
        for i, (o, s) in enumerate(zip(observed, scales)):
            pred = Fraction(0) if hyp.is_theta else by_k[hyp.k][i] * hyp.weight()
            worst = max(worst, float(abs(o.raw - pred) / s))
        return worst

    candidates = [WeakLimitHypothesis(THETA)] + [WeakLimitHypothesis(m, k) for m in range(m_max + 1) for k in ks]
    grid = {}
    best, best_res = None, math.inf
    for hyp in candidates:
        res = residual(hyp)
        grid["0" if hyp.is_theta else f"2^-{hyp.m} T^{hyp.k}"] = res
        if res < best_res or (res == best_res and _tie_key(hyp.m, hyp.k) < _tie_key(best.m, best.k)):
            best, best_res = hyp, res
    per_set = []
    for i, ((A, B), o, s) in enumerate(zip(family, observed, scales)):
        pred = Fraction(0) if best.is_theta else by_k[best.k][i] * best.weight()
        per_set.append({"A": A.to_json(), "B": B.to_json(), "observed": float(o.raw), "predicted": float(pred), "scale": float(s)})
    return FitReport(
        n=n,
        best_m=best.m,
        best_k=best.k if not best.is_theta else 0,
        residual=best_res,
        theta_residual=grid["0"],
        per_set=per_set,
        grid=grid,
        max_unresolved=max(float(o.unresolved / s) for o, s in zip(observed, scales)),
        normalize_stage=0,
        notes=["infinite measure: the zero hypothesis replaces Theta", "witness times are exploratory"],
    )


def witness_scan(
    spec: ConstructionSpec,
    family: Sequence[tuple[LevelSet, LevelSet]],
    ns: Iterable[int],
    threshold: float = 0.05,
) -> list[int]:
    """Powers where some pair correlates above ``threshold * min(mu(A), mu(B))``."""
    hits = []
    for n in ns:
        for A, B in family:
            rec = correlation(spec, A, B, n, strict=False)
            if rec.raw + rec.unresolved > threshold * min(measure(spec, A), measure(spec, B)):
                hits.append(n)
                break
    return hits


def sample_away(lo: int, hi: int, avoid: Sequence[int], margin: int, count: int, seed: int = 0) -> list[int]:
    """``count`` powers in ``[lo, hi]`` at distance > ``margin`` from every entry of ``avoid``."""
    rng = random.Random(seed)
    avoid = sorted(avoid)
    out: list[int] = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > 1000 * count:
            raise RuntimeError("could not sample enough powers away from the witness windows")
        n = rng.randint(lo, hi)
        if all(abs(n - a) > margin for a in avoid):
            out.append(n)
    return out
