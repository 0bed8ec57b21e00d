"""Weak limits of powers: windows, cascade times, hypothesis fitting.

A hypothesis ``(m, k)`` predicts the normalized correlation

    2^-m * corr(A, B, k) + (1 - 2^-m) * mu(A) mu(B)

and the sentinel ``m = THETA`` predicts the product alone.  Fitting picks
the grid point with the smallest worst-case deviation over a family of
``(A, B)`` pairs.
"""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .construction import ConstructionSpec
from .dynamics import CorrelationRecord, apply_power, correlation, normalizer
from .errors import KOutOfRange, StageOutOfRange, UnresolvableAtCap, WindowViolation
from .levelsets import (
    LevelSet,
    common_stage,
    difference,
    from_runs,
    full,
    intersect,
    levels_in_range,
    measure,
    refine_to,
    union,
)

THETA = None  # m value of the pure-projection hypothesis

NONMIXING_THRESHOLD = 0.2
FIT_TOLERANCE = 0.05
MIXING_TOLERANCE = 0.1
# largest normalized unresolved mass accepted when fitting
UNRESOLVED_TOLERANCE = 1e-3


@dataclass(frozen=True)
class WeakLimitHypothesis:
    m: int | None
    k: int = 0

    @property
    def is_theta(self) -> bool:
        return self.m is THETA

    def weight(self) -> Fraction:
        return Fraction(0) if self.is_theta else Fraction(1, 2**self.m)

    def predict(self, corr_k: float, product: float) -> float:
        if self.is_theta:
            return product
        w = 2.0**-self.m
        return w * corr_k + (1.0 - w) * product

    def label(self) -> str:
        return "Theta" if self.is_theta else f"2^-{self.m} T^{self.k} + (1-2^-{self.m}) Theta"


@dataclass
class MixingWindows:
    windows: dict[int, tuple[int, int]]
    clipped: dict[int, bool] = field(default_factory=dict)

    def contains(self, n: int) -> int | None:
        """Stage whose window holds ``|n|``, if any."""
        n = abs(n)
        for j, (lo, hi) in self.windows.items():
            if lo <= n <= hi:
                return j
        return None

    def rows(self) -> list[tuple[int, int, int]]:
        return [(j, lo, hi) for j, (lo, hi) in sorted(self.windows.items())]


@dataclass
class FitReport:
    n: int
    best_m: int | None
    best_k: int
    residual: float
    theta_residual: float
    per_set: list[dict]
    grid: dict = field(default_factory=dict)
    max_unresolved: float = 0.0
    normalize_stage: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def best(self) -> WeakLimitHypothesis:
        return WeakLimitHypothesis(self.best_m, self.best_k)

    def to_json(self) -> dict:
        out = asdict(self)
        out["best_label"] = self.best.label()
        return out


def _half_up(x: int) -> int:
    return -(-x // 2)


def nonmixing_windows(spec: ConstructionSpec, j_range: Iterable[int]) -> MixingWindows:
    """Stage-j windows ``[ceil(h_{j+1}/2) - h_j, floor(h_{j+1}/2) + h_j]`` clipped to ``[h_j, h_{j+1}]``."""
    windows, clipped = {}, {}
    for j in j_range:
        if not 1 <= j <= spec.max_stage:
            raise StageOutOfRange(f"window for stage {j} needs stage {j + 1}")
        h, h_next = spec.height(j), spec.height(j + 1)
        lo, hi = _half_up(h_next) - h, h_next // 2 + h
        clipped[j] = lo < h or hi > h_next
        windows[j] = (max(lo, h), min(hi, h_next))
    return MixingWindows(windows, clipped)


def mid_time(spec: ConstructionSpec, j: int) -> int:
    if not 1 <= j <= spec.max_stage:
        raise StageOutOfRange(f"mid_time({j}) needs stage {j + 1}")
    return _half_up(spec.height(j + 1))


def cascade_times(spec: ConstructionSpec, J: int, m: int, k: int = 0) -> int:
    """``mid_time(J) + ... + mid_time(J - m + 1) + k``; every partial tail must sit in its window."""
    if m < 1:
        raise ValueError("cascade depth m must be >= 1")
    stages = list(range(J - m + 1, J + 1))
    if stages[0] < 1:
        raise StageOutOfRange(f"cascade of depth {m} from stage {J} goes below stage 1")
    windows = nonmixing_windows(spec, stages)
    tail = k
    for j in stages:
        tail += mid_time(spec, j)
        lo, hi = windows.windows[j]
        if not lo <= tail <= hi:
            raise WindowViolation(f"partial cascade time {tail} is outside window_{j} = [{lo}, {hi}]")
    return tail


def reference_family(spec: ConstructionSpec, stage: int = 2) -> list[tuple[LevelSet, LevelSet]]:
    """24 ordered pairs from 12 sets built on the stage-``stage`` levels.

    The levels are split into 8 consecutive blocks (sizes differ by at most
    one); blocks {0,2}, {1,3}, {4,6}, {5,7} give four more sets.  Each set is
    paired with itself and with the next set in the list (cyclically).
    """
    sets = reference_sets(spec, stage)
    pairs = [(s, s) for s in sets]
    pairs += [(sets[i], sets[(i + 1) % len(sets)]) for i in range(len(sets))]
    return pairs


def reference_sets(spec: ConstructionSpec, stage: int = 2) -> list[LevelSet]:
    levels = spec.height(stage) + 1
    if levels < 8:
        raise ValueError(f"stage {stage} has only {levels} levels; need at least 8")
    q, rem = divmod(levels, 8)
    blocks, start = [], 0
    for i in range(8):
        size = q + (1 if i < rem else 0)
        blocks.append(from_runs(spec, stage, [(start, start + size - 1)]))
        start += size
    combos = [union(blocks[a], blocks[b]) for a, b in ((0, 2), (1, 3), (4, 6), (5, 7))]
    return blocks + combos


def eval_hypothesis(
    spec: ConstructionSpec,
    hyp: WeakLimitHypothesis,
    A: LevelSet,
    B: LevelSet,
    normalize_stage: int | None = None,
) -> float:
    rec = correlation(spec, A, B, 0 if hyp.is_theta else hyp.k, strict=False, normalize_stage=normalize_stage)
    return hyp.predict(rec.normalized, rec.product_term)


def _checked(rec: CorrelationRecord, total: Fraction) -> CorrelationRecord:
    if float(rec.unresolved / total) > UNRESOLVED_TOLERANCE:
        raise UnresolvableAtCap(
            f"n={rec.n}: unresolved mass {float(rec.unresolved / total):.3g} exceeds {UNRESOLVED_TOLERANCE}"
        )
    return rec


def _tie_key(m: int | None, k: int) -> tuple:
    return (math.inf if m is THETA else m, abs(k), k < 0)


def fit_wlp(
    spec: ConstructionSpec,
    n: int,
    family: Sequence[tuple[LevelSet, LevelSet]],
    m_max: int = 4,
    k_window: tuple[int, int] = (-8, 8),
    normalize_stage: int | None = None,
    stage_cap: int | None = None,
) -> FitReport:
    """Best ``(m, k)`` for the correlations of ``T^n`` over ``family``."""
    if not family:
        raise ValueError("family must be nonempty")
    total, J = normalizer(spec, normalize_stage)
    kw = dict(strict=False, normalize_stage=normalize_stage, stage_cap=stage_cap)
    observed = [_checked(correlation(spec, A, B, n, **kw), total) for A, B in family]
    ks = range(k_window[0], k_window[1] + 1)
    by_k = {k: [_checked(correlation(spec, A, B, k, **kw), total).normalized for A, B in family] for k in ks}
    products = [rec.product_term for rec in observed]

    candidates = [WeakLimitHypothesis(THETA)]
    candidates += [WeakLimitHypothesis(m, k) for m in range(m_max + 1) for k in ks]
    grid = {}
    best, best_res = None, math.inf
    for hyp in candidates:
        cks = by_k[hyp.k] if not hyp.is_theta else products
        res = max(abs(o.normalized - hyp.predict(c, p)) for o, c, p in zip(observed, cks, products))
        grid[hyp.label()] = res
        if res < best_res or (res == best_res and _tie_key(hyp.m, hyp.k) < _tie_key(best.m, best.k)):
            best, best_res = hyp, res

    cks = by_k[best.k] if not best.is_theta else products
    per_set = [
        {
            "A": A.to_json(),
            "B": B.to_json(),
            "observed": o.normalized,
            "predicted": best.predict(c, p),
            "unresolved": float(o.unresolved / total),
        }
        for (A, B), o, c, p in zip(family, observed, cks, products)
    ]
    notes = []
    if best.m == 0:
        notes.append("best fit is a pure power (m = 0)")
    return FitReport(
        n=n,
        best_m=best.m,
        best_k=best.k if not best.is_theta else 0,
        residual=best_res,
        theta_residual=grid["Theta"],
        per_set=per_set,
        grid=grid,
        max_unresolved=max(float(o.unresolved / total) for o in observed),
        normalize_stage=J,
        notes=notes,
    )


def theta_residual(
    spec: ConstructionSpec,
    n: int,
    family: Sequence[tuple[LevelSet, LevelSet]],
    normalize_stage: int | None = None,
) -> float:
    """Worst deviation of the family's correlations at ``n`` from the product term."""
    total, _ = normalizer(spec, normalize_stage)
    worst = 0.0
    for A, B in family:
        rec = _checked(correlation(spec, A, B, n, strict=False, normalize_stage=normalize_stage), total)
        worst = max(worst, abs(rec.deviation))
    return worst


def mixing_sample(spec: ConstructionSpec, j: int, count: int, seed: int = 0) -> list[int]:
    """``count`` distinct powers in ``[h_j, h_{j+1}]`` outside window_j."""
    lo, hi = nonmixing_windows(spec, [j]).windows[j]
    h, h_next = spec.height(j), spec.height(j + 1)
    rng = random.Random(seed)
    out: set[int] = set()
    while len(out) < count:
        n = rng.randint(h, h_next)
        if not lo <= n <= hi:
            out.add(n)
    return sorted(out)


def coarse_sweep(
    spec: ConstructionSpec,
    j: int,
    family: Sequence[tuple[LevelSet, LevelSet]],
    step: int | None = None,
    normalize_stage: int | None = None,
) -> list[tuple[int, float]]:
    """Theta residuals over ``[h_j, h_{j+1}]`` in steps of ``step`` (default ``h_j // 2``).

    The default step is fine enough that every window of width ``2 h_j`` is hit.
    """
    h, h_next = spec.height(j), spec.height(j + 1)
    step = max(1, h // 2 if step is None else step)
    ns = list(range(h, h_next + 1, step))
    if ns[-1] != h_next:
        ns.append(h_next)
    return [(n, theta_residual(spec, n, family, normalize_stage)) for n in ns]


def example2_decomposition(spec: ConstructionSpec, j: int, k: int) -> tuple[LevelSet, LevelSet, LevelSet]:
    """``(D, D1, U)`` at stage j+1.

    ``U`` is the upper half ``[mid_time(j), h_{j+1}]`` of the stage-(j+1)
    tower; ``D`` and ``D1`` split it by the stage-j levels ``[|k|, h_j]`` and
    ``[0, |k| - 1]``.  Spacer levels of the cut at stage j belong to neither.
    """
    h = spec.height(j)
    if abs(k) > h:
        raise KOutOfRange(f"|k| = {abs(k)} exceeds h_{j} = {h}")
    mid = mid_time(spec, j)
    U = from_runs(spec, j + 1, [(mid, spec.height(j + 1))])
    upper = refine_to(spec, from_runs(spec, j, [(abs(k), h)]), j + 1)
    lower = refine_to(spec, from_runs(spec, j, [(0, abs(k) - 1)] if k else []), j + 1)
    return intersect(U, upper), intersect(U, lower), U


def lower_half(spec: ConstructionSpec, j: int) -> LevelSet:
    """Levels ``[0, ceil(h_j / 2)]`` of stage j."""
    return from_runs(spec, j, [(0, _half_up(spec.height(j)))])


def measure_within(spec: ConstructionSpec, D: LevelSet, C: LevelSet) -> Fraction:
    """``mu(D & C)`` for ``C`` at a stage no later than ``D``, without refining C."""
    if C.stage > D.stage:
        D, C = C, D
    hits = sum(levels_in_range(spec, C, D.stage, a, b) for a, b in D.runs)
    return Fraction(hits, spec.width_denominator(D.stage))


def symmetric_shift_defect(spec: ConstructionSpec, D: LevelSet) -> Fraction:
    """``mu(D xor T D)`` computed on level sets."""
    image = apply_power(spec, D, 1)
    a, b = common_stage(spec, D, image)
    return measure(spec, union(difference(a, b), difference(b, a)))


@dataclass
class Lemma2Row:
    j: int
    symdiff: Fraction
    measure_D: float
    deviation: float


def lemma2_probe(
    spec: ConstructionSpec,
    D_seq: Callable[[int], LevelSet],
    A: LevelSet,
    B: LevelSet,
    j_range: Iterable[int],
    normalize_stage: int | None = None,
) -> list[Lemma2Row]:
    """Per stage: ``mu(D xor T D)`` and ``|mu(D & A & B) - mu(D) mu(A & B)|`` (normalized)."""
    total, _ = normalizer(spec, normalize_stage)
    AB = intersect(*common_stage(spec, A, B))
    mu_ab = measure(spec, AB) / total
    rows = []
    for j in j_range:
        D = D_seq(j)
        mu_d = measure(spec, D) / total
        joint = measure_within(spec, D, AB) / total
        rows.append(Lemma2Row(j, symmetric_shift_defect(spec, D), float(mu_d), float(abs(joint - mu_d * mu_ab))))
    return rows


def example2_measures(spec: ConstructionSpec, j: int, k: int, normalize_stage: int | None = None) -> dict:
    total, _ = normalizer(spec, normalize_stage)
    D, D1, U = example2_decomposition(spec, j, k)
    tower_j = refine_to(spec, full(spec, j), j + 1)
    return {
        "j": j,
        "k": k,
        "D": float(measure(spec, D) / total),
        "D1": float(measure(spec, D1) / total),
        "U": float(measure(spec, U) / total),
        "partition_exact": union(D, D1) == intersect(U, tower_j) and intersect(D, D1).is_empty,
    }
