"""Unions of tower levels, stored as sorted runs of level indices.

A :class:`LevelSet` names a stage ``j`` and a tuple of closed runs
``(a, b)`` with ``0 <= a <= b <= h_j``.  Runs are kept canonical: sorted,
disjoint and never adjacent.  Level sets may live at any stage from 1 up to
``spec.max_stage + 1``; the top one is the tower produced by the last
materialized cut.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .construction import ConstructionSpec
from .errors import IndexOutOfRange, InvalidParameters, StageMismatch, StageOutOfRange

Run = tuple[int, int]


@dataclass(frozen=True)
class LevelSet:
    stage: int
    runs: tuple[Run, ...]

    def __len__(self) -> int:
        return len(self.runs)

    @property
    def size(self) -> int:
        """Number of levels in the set."""
        return sum(b - a + 1 for a, b in self.runs)

    @property
    def is_empty(self) -> bool:
        return not self.runs

    def to_json(self) -> dict:
        return {"stage": self.stage, "runs": [[a, b] for a, b in self.runs]}

    @classmethod
    def from_json(cls, spec: ConstructionSpec, data: dict) -> "LevelSet":
        return from_runs(spec, int(data["stage"]), data["runs"])


def canonical(runs: Iterable[Sequence[int]]) -> tuple[Run, ...]:
    """Sort and merge overlapping or adjacent runs."""
    out: list[list[int]] = []
    for a, b in sorted((int(a), int(b)) for a, b in runs):
        if a > b:
            continue
        if out and a <= out[-1][1] + 1:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def _merge_sorted(runs: Iterable[Run]) -> tuple[Run, ...]:
    # input already sorted by start and pairwise disjoint
    out: list[Run] = []
    for a, b in runs:
        if out and a == out[-1][1] + 1:
            out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return tuple(out)


def check_stage(spec: ConstructionSpec, j: int) -> None:
    if not 1 <= j <= spec.max_stage + 1:
        raise StageOutOfRange(f"stage {j} outside 1..{spec.max_stage + 1}")


def from_runs(spec: ConstructionSpec, stage: int, runs: Iterable[Sequence[int]]) -> LevelSet:
    check_stage(spec, stage)
    h = spec.height(stage)
    runs = canonical(runs)
    if runs and (runs[0][0] < 0 or runs[-1][1] > h):
        raise IndexOutOfRange(f"runs {runs[0]}..{runs[-1]} exceed levels 0..{h} of stage {stage}")
    return LevelSet(stage, runs)


def full(spec: ConstructionSpec, stage: int) -> LevelSet:
    check_stage(spec, stage)
    return LevelSet(stage, ((0, spec.height(stage)),))


def base(spec: ConstructionSpec, stage: int) -> LevelSet:
    check_stage(spec, stage)
    return LevelSet(stage, ((0, 0),))


def empty(stage: int) -> LevelSet:
    return LevelSet(stage, ())


def make_levelset(spec: ConstructionSpec, stage: int, selector="full") -> LevelSet:
    """``selector`` is ``"full"``, ``"base"``, a level index, or a run list."""
    if selector == "full":
        return full(spec, stage)
    if selector == "base":
        return base(spec, stage)
    if isinstance(selector, int):
        return from_runs(spec, stage, [(selector, selector)])
    return from_runs(spec, stage, selector)


_SELECTOR = re.compile(r"^(full|base|runs)@(\d+)(?::\[(.*)\])?$")


def parse_selector(spec: ConstructionSpec, text: str) -> LevelSet:
    """Parse ``full@2``, ``base@2`` or ``runs@2:[0-10,23-33]``."""
    m = _SELECTOR.match(text.strip())
    if not m:
        raise InvalidParameters(f"bad level-set selector {text!r}")
    kind, stage = m.group(1), int(m.group(2))
    if kind != "runs":
        return make_levelset(spec, stage, kind)
    runs = []
    for part in filter(None, (m.group(3) or "").split(",")):
        a, _, b = part.strip().partition("-")
        runs.append((int(a), int(b or a)))
    return from_runs(spec, stage, runs)


def refine_to(spec: ConstructionSpec, A: LevelSet, J: int) -> LevelSet:
    """The same subset of the space, written with stage-J levels."""
    check_stage(spec, J)
    if J < A.stage:
        raise StageOutOfRange(f"cannot refine stage {A.stage} down to {J}")
    runs = A.runs
    for j in range(A.stage, J):
        offsets = spec.stage(j).offsets
        runs = _merge_sorted((a + o, b + o) for o in offsets for a, b in runs)
    return LevelSet(J, runs)


def common_stage(spec: ConstructionSpec, A: LevelSet, B: LevelSet) -> tuple[LevelSet, LevelSet]:
    J = max(A.stage, B.stage)
    return refine_to(spec, A, J), refine_to(spec, B, J)


def intersect(A: LevelSet, B: LevelSet) -> LevelSet:
    if A.stage != B.stage:
        raise StageMismatch(f"stages {A.stage} and {B.stage}")
    out = []
    i = k = 0
    ra, rb = A.runs, B.runs
    while i < len(ra) and k < len(rb):
        lo = max(ra[i][0], rb[k][0])
        hi = min(ra[i][1], rb[k][1])
        if lo <= hi:
            out.append((lo, hi))
        if ra[i][1] < rb[k][1]:
            i += 1
        else:
            k += 1
    return LevelSet(A.stage, tuple(out))


def union(A: LevelSet, B: LevelSet) -> LevelSet:
    if A.stage != B.stage:
        raise StageMismatch(f"stages {A.stage} and {B.stage}")
    return LevelSet(A.stage, canonical(A.runs + B.runs))


def difference(A: LevelSet, B: LevelSet) -> LevelSet:
    if A.stage != B.stage:
        raise StageMismatch(f"stages {A.stage} and {B.stage}")
    out = []
    k = 0
    rb = B.runs
    for a, b in A.runs:
        while k < len(rb) and rb[k][1] < a:
            k += 1
        cur = a
        t = k
        while t < len(rb) and rb[t][0] <= b:
            if rb[t][0] > cur:
                out.append((cur, rb[t][0] - 1))
            cur = max(cur, rb[t][1] + 1)
            t += 1
        if cur <= b:
            out.append((cur, b))
    return LevelSet(A.stage, tuple(out))


_OPS = {"intersect": intersect, "union": union, "difference": difference}


def set_ops(A: LevelSet, B: LevelSet, op: str) -> LevelSet:
    try:
        return _OPS[op](A, B)
    except KeyError:
        raise InvalidParameters(f"unknown set operation {op!r}") from None


def shift(A: LevelSet, n: int) -> LevelSet:
    """Translate every run by ``n`` without bounds checks (caller guarantees them)."""
    return LevelSet(A.stage, tuple((a + n, b + n) for a, b in A.runs))


def measure(spec: ConstructionSpec, A: LevelSet) -> Fraction:
    return Fraction(A.size, spec.width_denominator(A.stage))


def levels_at_least(spec: ConstructionSpec, A: LevelSet, J: int, u: int) -> int:
    """Count the stage-J levels ``>= u`` inside ``A`` without refining it.

    Only the one column straddling ``u`` is descended into at each stage.
    """
    if J == A.stage:
        total = 0
        for a, b in A.runs:
            if b >= u:
                total += b - max(a, u) + 1
        return total
    prev = spec.stage(J - 1)
    copies_below = _copies(spec, A.stage, J - 1)
    offsets = prev.offsets
    # columns entirely at or above u contribute the whole refined set
    lo, hi = 0, len(offsets)
    while lo < hi:
        mid = (lo + hi) // 2
        if offsets[mid] >= u:
            hi = mid
        else:
            lo = mid + 1
    total = (len(offsets) - lo) * A.size * copies_below
    if lo > 0:
        o = offsets[lo - 1]
        if u - o <= prev.h:
            total += levels_at_least(spec, A, J - 1, u - o)
    return total


def levels_in_range(spec: ConstructionSpec, A: LevelSet, J: int, lo: int, hi: int) -> int:
    """Count stage-J levels in ``[lo, hi]`` that belong to ``A``."""
    if lo > hi:
        return 0
    return levels_at_least(spec, A, J, lo) - levels_at_least(spec, A, J, hi + 1)


def _copies(spec: ConstructionSpec, s: int, J: int) -> int:
    return spec.width_denominator(J) // spec.width_denominator(s)
