import math

import numpy as np
import pytest

from sepkit.alignment import alignment_matrix
from sepkit.corpus import GenerationSet
from sepkit.errors import ValidationError
from sepkit.rng import derive_rng
from sepkit.separability import (
    SeparabilityRecord,
    bin_assign,
    compute_instance,
    distribution_stats,
    finalize_run,
    make_bins,
    separability,
)
from sepkit.synthetic import identical_sets, scenario_sets

ROUGE = "rouge1-f1"


def raw(instance, sa, sb, cr):
    return SeparabilityRecord(instance, "a", "b", ROUGE, sa, sb, cr)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0])
def test_inseparable_when_all_equal(x):
    assert separability(x, x, x) == 0.0


def test_separability_values():
    assert separability(0.9, 0.7, 0.5) == pytest.approx(0.4)
    assert separability(1.0, 1.0, 0.0) == 1.0
    with pytest.raises(ValidationError, match="normalize"):
        separability(1.2, 0.5, 0.5)


def test_compute_instance_identical_and_disjoint():
    rec = compute_instance(*identical_sets("i", "same words here"), ROUGE)
    assert (rec.self_a, rec.self_b, rec.cross) == (1.0, 1.0, 1.0)
    a, b = scenario_sets(3, "i", derive_rng(0, "t"))
    rec = compute_instance(a, b, ROUGE)
    assert (rec.self_a, rec.self_b, rec.cross) == (1.0, 1.0, 0.0)
    assert not rec.finalized


def test_compute_instance_matches_brute_force():
    a = GenerationSet.from_texts("i", "a", ["the cat sat", "a cat ran off", "cat"])
    b = GenerationSet.from_texts("i", "b", ["dog sat", "the dog ran", "the cat"])
    rec = compute_instance(a, b, ROUGE)
    off = ~np.eye(3, dtype=bool)
    assert rec.self_a == pytest.approx(alignment_matrix(a, a, ROUGE)[off].mean(), abs=1e-12)
    assert rec.self_b == pytest.approx(alignment_matrix(b, b, ROUGE)[off].mean(), abs=1e-12)
    assert rec.cross == pytest.approx(alignment_matrix(a, b, ROUGE).mean(), abs=1e-12)


def test_finalize_single_degenerate_record():
    (rec,) = finalize_run([raw("i", 0.7, 0.7, 0.7)])
    assert rec.delta == 0.0 and rec.degenerate_norm
    assert rec.self_a_n == rec.cross_n == 0.5


def test_finalize_identity_when_span_is_unit():
    recs = finalize_run([raw("i", 1.0, 0.5, 0.0), raw("j", 0.25, 0.75, 0.5)])
    for r in recs:
        assert (r.self_a_n, r.self_b_n, r.cross_n) == (r.self_a, r.self_b, r.cross)
    assert recs[0].delta == 1.0 and recs[1].delta == 0.25


def test_finalize_hand_recomputation():
    recs = finalize_run(
        [raw("i", 0.8, 0.6, 0.4), raw("j", 0.7, 0.9, 0.6), raw("k", 0.5, 0.5, 0.3)]
    )
    lo, hi = 0.3, 0.9

    def n(v):
        return (v - lo) / (hi - lo)

    expected = [max(n(0.8), n(0.6)) - n(0.4), max(n(0.7), n(0.9)) - n(0.6), n(0.5) - n(0.3)]
    assert [r.delta for r in recs] == pytest.approx(expected, abs=1e-12)
    assert all(r.norm_min == lo and r.norm_max == pytest.approx(hi) for r in recs)


def test_finalize_rejects_mixed_runs():
    other = SeparabilityRecord("j", "a", "c", ROUGE, 0.1, 0.2, 0.3)
    with pytest.raises(ValidationError, match="mixed"):
        finalize_run([raw("i", 0.1, 0.2, 0.3), other])
    with pytest.raises(ValidationError):
        finalize_run([])


def test_delta_bounded():
    rng = np.random.default_rng(5)
    recs = finalize_run([raw(f"i{n}", *rng.random(3)) for n in range(50)])
    assert all(-1.0 <= r.delta <= 1.0 for r in recs)


# -- bins and distributions ------------------------------------------------------------


@pytest.mark.parametrize("delta, expected", [(0.0, 0), (1.0, 3), (0.25, 1), (0.2499, 0), (0.75, 3)])
def test_bin_assign_unit_quarters(delta, expected):
    assert bin_assign(delta, make_bins([], 4, "unit")) == expected


def test_bin_assign_out_of_range():
    with pytest.raises(ValidationError, match="outside"):
        bin_assign(-0.1, make_bins([], 4, "unit"))


def test_make_bins_zero_width_observed():
    assert make_bins([0.3, 0.3], 2) == [(-0.2, 0.3), (0.3, 0.8)]


def test_make_bins_rejects_bad_args():
    with pytest.raises(ValidationError):
        make_bins([0.1], 0)
    with pytest.raises(ValidationError):
        make_bins([0.1], 2, "log")


def test_distribution_all_equal():
    summary = distribution_stats([0.4] * 6)
    assert summary.variance == 0.0
    assert sum(1 for _, _, n in summary.histogram if n) == 1


def test_distribution_two_unit_bins():
    summary = distribution_stats([0.1, 0.3, 0.5, 0.7], bin_count=2, range_mode="unit")
    assert [n for _, _, n in summary.histogram] == [2, 2]


def test_distribution_moments_match_brute_force():
    values = list(np.random.default_rng(2).uniform(-0.2, 1.0, size=100))
    summary = distribution_stats(values, bin_count=5)
    mean = sum(values) / 100
    assert summary.mean == pytest.approx(mean, abs=1e-12)
    assert summary.variance == pytest.approx(sum((v - mean) ** 2 for v in values) / 100, abs=1e-12)
    assert sum(n for _, _, n in summary.histogram) == 100
    assert summary.histogram[0][0] == min(values) and summary.histogram[-1][1] == max(values)


def test_distribution_requires_finalized_records():
    with pytest.raises(ValidationError, match="not finalized"):
        distribution_stats([raw("i", 0.1, 0.2, 0.3)])
    with pytest.raises(ValidationError, match="no instances"):
        distribution_stats([])


def test_scenarios_order_by_separability():
    rng = derive_rng(0, "scenarios")
    recs = []
    for s in (1, 2, 3, 4):
        a, b = scenario_sets(s, f"s{s}", rng)
        recs.append(compute_instance(a, b, ROUGE))
    d = {r.instance_id: r.delta for r in finalize_run(recs)}
    assert math.isclose(d["s3"], 1.0, abs_tol=1e-9)
    assert d["s3"] > d["s1"] > d["s4"]
    assert d["s1"] > d["s2"]
