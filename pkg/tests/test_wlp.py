import json
import math
from fractions import Fraction

import pytest

from rank1lab.errors import KOutOfRange, StageOutOfRange, UnresolvableAtCap, WindowViolation
from rank1lab.levelsets import from_runs, full, intersect, measure, union
from rank1lab.wlp import (
    THETA,
    WeakLimitHypothesis,
    _tie_key,
    cascade_times,
    coarse_sweep,
    example2_decomposition,
    example2_measures,
    fit_wlp,
    lemma2_probe,
    lower_half,
    mid_time,
    mixing_sample,
    nonmixing_windows,
    reference_family,
    reference_sets,
    symmetric_shift_defect,
    theta_residual,
)


def test_first_window(ref):
    w = nonmixing_windows(ref, [1])
    assert w.rows() == [(1, 13, 32)]
    assert not w.clipped[1]


def test_windows_follow_heights(ref):
    w = nonmixing_windows(ref, range(1, 8))
    for j, (lo, hi) in w.windows.items():
        h, h_next = ref.height(j), ref.height(j + 1)
        assert (lo, hi) == (math.ceil(h_next / 2) - h, h_next // 2 + h)
        assert h <= lo < hi <= h_next
        assert w.contains(mid_time(ref, j)) == j
    assert w.contains(ref.height(3)) is None
    with pytest.raises(StageOutOfRange):
        nonmixing_windows(ref, [8])


def test_clipping_is_flagged():
    from rank1lab.construction import make_spec

    spec = make_spec("staircase", 10, {"rule": "constant", "value": 2}, None, 2)
    w = nonmixing_windows(spec, [1])
    assert w.clipped[1]
    lo, hi = w.windows[1]
    assert spec.height(1) <= lo <= hi <= spec.height(2)


def test_mid_and_cascade_times(ref):
    assert mid_time(ref, 1) == 23
    assert cascade_times(ref, 6, 1) == mid_time(ref, 6)
    assert cascade_times(ref, 6, 2, -1) == mid_time(ref, 6) + mid_time(ref, 5) - 1
    assert cascade_times(ref, 6, 3, 2) == mid_time(ref, 6) + mid_time(ref, 5) + mid_time(ref, 4) + 2
    with pytest.raises(WindowViolation):
        cascade_times(ref, 3, 2, 10_000)
    with pytest.raises(StageOutOfRange):
        cascade_times(ref, 2, 3)
    with pytest.raises(ValueError):
        cascade_times(ref, 3, 0)


def test_reference_family_shape(ref):
    sets = reference_sets(ref)
    assert [s.size for s in sets[:8]] == [6, 6, 6, 6, 6, 6, 5, 5]
    blocks = sets[0]
    for s in sets[1:8]:
        blocks = union(blocks, s)
    assert blocks.runs == ((0, 45),)
    assert sets[8] == union(sets[0], sets[2])
    pairs = reference_family(ref)
    assert len(pairs) == 24
    assert all(a == b for a, b in pairs[:12])
    assert pairs[12] == (sets[0], sets[1]) and pairs[23] == (sets[11], sets[0])


def test_hypothesis_prediction_and_ties():
    theta = WeakLimitHypothesis(THETA)
    assert theta.predict(0.7, 0.2) == 0.2 and theta.weight() == 0
    assert WeakLimitHypothesis(0, 3).predict(0.7, 0.2) == 0.7
    assert WeakLimitHypothesis(1).predict(0.6, 0.2) == pytest.approx(0.4)
    assert WeakLimitHypothesis(2).weight() == Fraction(1, 4)
    keys = sorted([(THETA, 0), (1, -1), (1, 1), (0, 5), (1, 0)], key=lambda mk: _tie_key(*mk))
    assert keys == [(0, 5), (1, 0), (1, 1), (1, -1), (THETA, 0)]


@pytest.mark.parametrize("n", [0, 3, -2])
def test_fit_recovers_a_small_pure_power(ref, n):
    family = reference_family(ref)[10:16]
    report = fit_wlp(ref, n, family, m_max=2, k_window=(-4, 4))
    assert (report.best_m, report.best_k, report.residual) == (0, n, 0.0)
    assert "pure power" in report.notes[0]
    json.dumps(report.to_json())


def test_fit_mid_time_stage4(ref):
    report = fit_wlp(ref, mid_time(ref, 4), reference_family(ref))
    assert (report.best_m, report.best_k) == (1, 0)
    assert report.residual < 0.01 < report.theta_residual
    assert report.normalize_stage == 8


def test_fit_refuses_large_unresolved_mass(ref):
    with pytest.raises(UnresolvableAtCap):
        fit_wlp(ref, mid_time(ref, 7), reference_family(ref)[:2], m_max=1, k_window=(0, 0))


def test_fit_needs_family(ref):
    with pytest.raises(ValueError):
        fit_wlp(ref, 5, [])


def test_mixing_sample(ref):
    ns = mixing_sample(ref, 4, 30, seed=3)
    lo, hi = nonmixing_windows(ref, [4]).windows[4]
    assert len(set(ns)) == 30 and ns == sorted(ns)
    assert all(ref.height(4) <= n <= ref.height(5) and not lo <= n <= hi for n in ns)
    assert ns == mixing_sample(ref, 4, 30, seed=3)


def test_coarse_sweep_hits_the_window(ref):
    family = reference_family(ref)[:4]
    sweep = coarse_sweep(ref, 3, family)
    assert sweep[0][0] == ref.height(3) and sweep[-1][0] == ref.height(4)
    lo, hi = nonmixing_windows(ref, [3]).windows[3]
    assert any(lo <= n <= hi for n, _ in sweep)
    assert dict(sweep)[sweep[0][0]] == theta_residual(ref, sweep[0][0], family)


@pytest.mark.parametrize("j", range(1, 7))
def test_decomposition_partition(ref, j):
    h = ref.height(j)
    for k in (0, 1, -(-h // 2), -h):
        D, D1, U = example2_decomposition(ref, j, k)
        assert intersect(D, D1).is_empty
        assert example2_measures(ref, j, k)["partition_exact"]
        spacer_levels = U.size - D.size - D1.size
        assert spacer_levels >= 0
    with pytest.raises(KOutOfRange):
        example2_decomposition(ref, j, h + 1)


def test_decomposition_halves(ref):
    m0 = example2_measures(ref, 6, 0)
    mh = example2_measures(ref, 6, -(-ref.height(6) // 2))
    assert abs(m0["D"] - 0.5) < 0.01
    assert abs(mh["D"] - 0.25) < 0.01
    assert m0["D1"] == 0.0


def test_shift_defect_of_lower_half(ref):
    # only the bottom level leaves and only the level above the top enters
    assert symmetric_shift_defect(ref, lower_half(ref, 2)) == Fraction(2, 4)
    assert symmetric_shift_defect(ref, lower_half(ref, 3)) == Fraction(2, 24)


def test_probe_rows(ref):
    A = from_runs(ref, 2, [(0, 11)])
    B = from_runs(ref, 2, [(6, 17)])
    rows = lemma2_probe(ref, lambda j: lower_half(ref, j), A, B, range(2, 7))
    assert [r.j for r in rows] == [2, 3, 4, 5, 6]
    assert all(b.symdiff < a.symdiff for a, b in zip(rows, rows[1:]))
    assert all(b.deviation < a.deviation for a, b in zip(rows[1:], rows[2:]))
    assert all(0 < r.measure_D < 1 for r in rows)
    assert measure(ref, lower_half(ref, 2)) == Fraction(24, 4)


def test_probe_full_tower_has_no_deviation(ref):
    A = full(ref, 8)
    rows = lemma2_probe(ref, lambda j: lower_half(ref, j), A, A, range(2, 9))
    assert all(r.deviation < 1e-12 for r in rows)
