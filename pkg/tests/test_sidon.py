import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hash_join_overlap, p_elements
from rank1lab.construction import sidon_half_vector
from rank1lab.errors import EmptyPSet, InvalidParameters
from rank1lab.sidon import (
    half_time,
    iter_profile,
    p_overlap,
    p_overlap_counts,
    p_overlap_profile,
    p_set,
    sample_away,
    sidon_spec,
    sidon_wlp_check,
    total_measure_growth,
    witness_scan,
)
from rank1lab.wlp import reference_family

EPS = st.sampled_from(["0.1", "0.2", "0.25", "0.5", "0.05"])


@pytest.fixture(scope="module")
def sidon():
    return sidon_spec(5, 2, 2, 5)


def test_sidon_shape(sidon):
    assert sidon.stage(1).spacers == (10, 44, 10, 44)
    assert [sidon.height(j) for j in range(1, 7)] == [5, 131, 3155, 75731, 1817555, 43621331]
    assert sidon_half_vector(5, 2, 2) == (10, 44)


def test_sidon_half_vector_recurrence():
    h, G = 7, 3
    vec = sidon_half_vector(h, 4, G)
    top = h + 1
    assert vec[0] == G * h
    for i in range(1, 4):
        top += vec[i - 1] + h + 1
        assert vec[i] == G * top


def test_sidon_validation():
    with pytest.raises(InvalidParameters):
        sidon_spec(5, 2, growth=1)
    with pytest.raises(InvalidParameters):
        sidon_spec(5, [2, 2], max_stage=3)


def test_sidon_schedule_list():
    spec = sidon_spec(3, [1, 2, 3], max_stage=3)
    assert [s.r for s in spec.stages] == [2, 4, 6]


def test_total_measure_diverges(sidon):
    totals = total_measure_growth(sidon)
    assert all(b > a for a, b in zip(totals, totals[1:]))
    assert all(b - a > a for a, b in zip(totals[1:], totals[2:]))


def test_half_time_is_a_half_power(sidon):
    family = reference_family(sidon)[:6]
    report = sidon_wlp_check(sidon, half_time(sidon, 3), family, m_max=2, k_window=(-2, 2))
    assert (report.best_m, report.best_k, report.residual) == (1, 0, 0.0)
    assert report.notes[0].startswith("infinite measure")


def test_pset_small():
    P = p_set(5, 0.2)
    assert P.elements == (5, 11, 18, 26)
    assert [p_overlap(5, 0.2, m) for m in (0, 6, 1, -6)] == [4, 1, 0, 1]
    with pytest.raises(EmptyPSet):
        p_set(1, 0.5)
    with pytest.raises(InvalidParameters):
        p_set(5, 1.0)


@given(st.integers(2, 300), EPS)
def test_gaps_strictly_increase(h, eps):
    P = p_set(h, float(eps)).elements
    gaps = [b - a for a, b in zip(P, P[1:])]
    assert gaps == [h + d for d in range(1, len(P))]


@given(st.integers(2, 120), EPS)
def test_single_step_overlaps(h, eps):
    P = p_set(h, float(eps))
    counts = p_overlap_counts(h, float(eps))
    for m in range(1, 2 * h + 1):
        expected = 1 if 1 <= m - h <= len(P) - 1 else 0
        assert p_overlap(h, float(eps), m, P) == expected == (counts[m] if m < len(counts) else 0)


@settings(max_examples=40)
@given(st.integers(2, 80), EPS, st.integers(-20_000, 20_000))
def test_overlap_matches_hash_join(h, eps, m):
    P = p_elements(h, eps)
    assert p_overlap(h, float(eps), m) == hash_join_overlap(P, abs(m))


def test_profile_and_argmax():
    rows, arg, best = p_overlap_profile(50, 0.1, range(-200, 201))
    assert (arg, best) == (0, 45)
    assert dict(rows)[51] == 1 == dict(rows)[-51]
    assert list(iter_profile(5, 0.2, 0, 7)) == [(0, 4), (1, 0), (2, 0), (3, 0), (4, 0), (5, 0), (6, 1), (7, 1)]
    assert p_overlap_profile(5, 0.2, [])[0] == []


def test_witness_scan_and_sampling(sidon):
    family = reference_family(sidon)[:4]
    hits = witness_scan(sidon, family, [0, half_time(sidon, 3), 1])
    assert hits[:2] == [0, half_time(sidon, 3)]
    picks = sample_away(0, 1000, [500], 100, 10, seed=1)
    assert len(picks) == 10 and all(abs(n - 500) > 100 for n in picks)
    with pytest.raises(RuntimeError):
        sample_away(0, 10, [5], 20, 1)
