"""Powers of the transformation on level sets and exact set correlations.

Within a stage-J tower the map moves level ``k`` to ``k + 1``.  Mass that
would leave the tower is only determined by the next cut, so
:func:`apply_power` refines exactly the overflowing runs one stage at a time.

:func:`correlation` computes ``mu(T^n A & B)`` by counting stage-K level
pairs ``(x, x + n)`` with ``x`` in ``A`` and ``x + n`` in ``B``.  Pairs whose
orbit segment leaves the stage-K tower are not seen yet; their mass is the
``unresolved`` bound of the record, so the true value always lies in
``[raw, raw + unresolved]``.  When ``unresolved`` is zero the value is exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import lags
from .construction import ConstructionSpec, total_measure
from .errors import Rank1Error, TooLarge, UnresolvableAtCap
from .levelsets import (
    LevelSet,
    canonical,
    check_stage,
    common_stage,
    intersect,
    levels_at_least,
    measure,
    refine_to,
)

# refining beyond this many runs is refused by the direct counting path
MAX_DIRECT_RUNS = 2_000_000


@dataclass(frozen=True)
class CorrelationRecord:
    n: int
    raw: Fraction
    normalized: float
    product_term: float
    working_stage: int
    normalize_stage: int
    unresolved: Fraction = Fraction(0)
    error: str | None = field(default=None, compare=False)

    @property
    def deviation(self) -> float:
        return self.normalized - self.product_term

    @property
    def exact(self) -> bool:
        return self.unresolved == 0 and self.error is None


def stage_cap_of(spec: ConstructionSpec, stage_cap: int | None) -> int:
    cap = spec.max_stage + 1 if stage_cap is None else stage_cap
    check_stage(spec, cap)
    return cap


def apply_power(spec: ConstructionSpec, A: LevelSet, n: int, stage_cap: int | None = None) -> LevelSet:
    """``T^n(A)`` as a level set, refining only the runs that leave the tower.

    The result lives at the deepest stage the recursion needed.  Raises
    :class:`UnresolvableAtCap` if some mass still leaves the stage-``stage_cap``
    tower, and :class:`TooLarge` if the exact result would need more than
    ``MAX_DIRECT_RUNS`` runs.  Downward overflow out of the first column never resolves (there
    are no spacers below a tower), so negative powers only resolve for sets
    that stay clear of the tower bottoms.
    """
    cap = stage_cap_of(spec, stage_cap)
    if n == 0:
        return A
    placed: dict[int, list] = {}
    pending = list(A.runs)
    K = A.stage
    while True:
        h = spec.height(K)
        safe, bad = [], []
        for a, b in pending:
            lo, hi = max(a, -n), min(b, h - n)
            if lo <= hi:
                safe.append((lo + n, hi + n))
            if a < -n:
                bad.append((a, min(b, -n - 1)))
            if b > h - n:
                bad.append((max(a, h - n + 1), b))
        placed[K] = safe
        if not bad:
            break
        if K >= cap:
            lost = sum(b - a + 1 for a, b in bad)
            raise UnresolvableAtCap(
                f"T^{n}: {lost} level(s) of stage {K} still leave the tower at stage cap {cap}"
            )
        bad.sort()
        offsets = spec.stage(K).offsets
        pending = [(a + o, b + o) for o in offsets for a, b in bad]
        K += 1
    pieces = sum(len(safe) * _copies(spec, k, K) for k, safe in placed.items())
    if pieces > MAX_DIRECT_RUNS:
        raise TooLarge(f"T^{n} resolves at stage {K} but needs about {pieces} runs there")
    runs: list = []
    for k, safe in placed.items():
        if safe:
            runs.extend(refine_to(spec, LevelSet(k, canonical(safe)), K).runs)
    return LevelSet(K, canonical(runs))


def unresolved_levels(spec: ConstructionSpec, A: LevelSet, B: LevelSet, n: int, K: int) -> int:
    """Stage-K levels whose n-step orbit leaves the tower, min over the A and B sides."""
    h = spec.height(K)
    if n >= 0:
        a_side = levels_at_least(spec, A, K, h - n + 1)
        b_side = B.size * _copies(spec, B.stage, K) - levels_at_least(spec, B, K, n)
    else:
        a_side = A.size * _copies(spec, A.stage, K) - levels_at_least(spec, A, K, -n)
        b_side = levels_at_least(spec, B, K, h + n + 1)
    return min(a_side, b_side)


def _copies(spec: ConstructionSpec, s: int, K: int) -> int:
    return spec.width_denominator(K) // spec.width_denominator(s)


def shifted_overlap(A: LevelSet, B: LevelSet, n: int) -> int:
    """``|(A + n) & B|`` counted over run pairs at a shared stage."""
    ra, rb = A.runs, B.runs
    i = k = 0
    total = 0
    while i < len(ra) and k < len(rb):
        a0, a1 = ra[i][0] + n, ra[i][1] + n
        b0, b1 = rb[k]
        lo, hi = max(a0, b0), min(a1, b1)
        if lo <= hi:
            total += hi - lo + 1
        if a1 < b1:
            i += 1
        else:
            k += 1
    return total


def pair_count(spec: ConstructionSpec, A: LevelSet, B: LevelSet, n: int, K: int) -> int:
    """Stage-K level pairs ``(x, x + n)`` with x in refined A and x + n in refined B."""
    s = A.stage
    if K == s:
        return shifted_overlap(A, B, n)
    h_s = spec.height(s)
    if 2 * h_s + 1 <= lags.TABLE_LIMIT and lags.fits_int64(spec, s, K, (h_s + 1) ** 2):
        table = lags.LagTable.for_spec(spec, s)
        ab = lags.cross_counts(A.runs, B.runs, h_s)
        window = table.window(K, n - h_s, n + h_s)
        return int(np.dot(ab, window[::-1]))
    if (len(A.runs) + len(B.runs)) * _copies(spec, s, K) > MAX_DIRECT_RUNS:
        raise TooLarge(f"sets at stage {s} are too large to count pairs at stage {K}")
    return shifted_overlap(refine_to(spec, A, K), refine_to(spec, B, K), n)


def normalizer(spec: ConstructionSpec, normalize_stage: int | None = None) -> tuple[Fraction, int]:
    J = spec.max_stage + 1 if normalize_stage is None else normalize_stage
    return total_measure(spec, J)[0], J


def correlation(
    spec: ConstructionSpec,
    A: LevelSet,
    B: LevelSet,
    n: int,
    stage_cap: int | None = None,
    strict: bool = True,
    normalize_stage: int | None = None,
) -> CorrelationRecord:
    """``mu(T^n A & B)`` at the first stage where every orbit segment resolves.

    With ``strict=False`` an unresolved computation returns the stage-cap
    value together with its exact ``unresolved`` bound instead of raising.
    """
    cap = stage_cap_of(spec, stage_cap)
    A, B = common_stage(spec, A, B)
    total, J = normalizer(spec, normalize_stage)
    K = A.stage
    missing = unresolved_levels(spec, A, B, n, K)
    while missing and K < cap:
        K += 1
        missing = unresolved_levels(spec, A, B, n, K)
    if missing and strict:
        raise UnresolvableAtCap(f"correlation at n={n} still has unresolved mass at stage cap {cap}")
    W = spec.width_denominator(K)
    raw = Fraction(pair_count(spec, A, B, n, K), W)
    mA, mB = measure(spec, A), measure(spec, B)
    return CorrelationRecord(
        n=n,
        raw=raw,
        normalized=float(raw / total),
        product_term=float(mA * mB / (total * total)),
        working_stage=K,
        normalize_stage=J,
        unresolved=Fraction(missing, W),
    )


def correlation_by_sets(spec: ConstructionSpec, A: LevelSet, B: LevelSet, n: int, stage_cap: int | None = None) -> Fraction:
    """Reference route: shift A as a level set, intersect, measure."""
    image = apply_power(spec, A, n, stage_cap)
    image, B = common_stage(spec, image, B)
    return measure(spec, intersect(image, B))


def correlation_scan(
    spec: ConstructionSpec,
    A: LevelSet,
    B: LevelSet,
    n_list: Sequence[int],
    threads: int = 1,
    **kwargs,
) -> list[CorrelationRecord]:
    """Correlations in input order; failures become records with ``error`` set."""

    def one(n: int) -> CorrelationRecord:
        try:
            return correlation(spec, A, B, n, **kwargs)
        except Rank1Error as exc:
            return CorrelationRecord(n, Fraction(0), float("nan"), float("nan"), -1, -1, Fraction(0), f"{exc.code}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, n_list))
    return [one(n) for n in n_list]


def avg_correlation(
    spec: ConstructionSpec,
    A: LevelSet,
    B: LevelSet,
    d: int,
    r: int,
    base_shift: int = 0,
    **kwargs,
) -> Fraction:
    """``(1/r) * sum_{i=1..r} mu(T^(base_shift + d*i) A & B)``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    total = sum((correlation(spec, A, B, base_shift + d * i, **kwargs).raw for i in range(1, r + 1)), Fraction(0))
    return total / r
