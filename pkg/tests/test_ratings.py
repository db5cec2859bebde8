import itertools
from fractions import Fraction

import pytest

from sepkit.errors import ValidationError
from sepkit.ratings import (
    ConsistencyRecord,
    RatingSet,
    aggregate_instance,
    binned_consistency,
    binned_preference_strength,
    consistency,
    consistency_record,
    preference_strength,
)
from sepkit.rng import derive_rng
from sepkit.separability import SeparabilityRecord
from sepkit.synthetic import synthetic_ratings


def sep(instance, delta, a="a", b="b"):
    return SeparabilityRecord(instance, a, b, "rouge1-f1", 0, 0, 0, 0, 0, 0, delta)


def rec(instance, c, p=0.0, rater="r", a="a", b="b"):
    return ConsistencyRecord(instance, rater, a, b, c, p)


@pytest.mark.parametrize(
    "ratings, expected",
    [((-1, 1, 0, 0, 0), 0.0), ((1,) * 5, 1.0), ((1, 0, 1, 0, 1), 0.6), ((0,) * 5, 0.0),
     ((-1, -1, 0, -1, -1), 0.8)],
)
def test_consistency_table(ratings, expected):
    assert consistency(ratings) == pytest.approx(expected)


@pytest.mark.parametrize(
    "ratings, expected",
    [((1, 1, 0, -1, -1), 0.0), ((-1,) * 5, -1.0), ((1, 1, 1, 0, 0), 0.6)],
)
def test_preference_strength_table(ratings, expected):
    assert preference_strength(ratings) == pytest.approx(expected)


def test_all_243_rating_sets_against_exact_evaluation():
    strengths = set()
    for ratings in itertools.product((-1, 0, 1), repeat=5):
        mixed = -1 in ratings and 1 in ratings
        exact_c = Fraction(0) if mixed else Fraction(sum(map(abs, ratings)), 5)
        exact_p = Fraction(sum(ratings), 5)
        assert consistency(ratings) == float(exact_c)
        assert preference_strength(ratings) == float(exact_p)
        strengths.add(preference_strength(ratings))
    assert len(strengths) == 11


def test_rating_set_validation():
    with pytest.raises(ValidationError, match="not one of"):
        RatingSet("i", "r", "a", "b", (1, 2))
    with pytest.raises(ValidationError, match="empty"):
        RatingSet("i", "r", "a", "b", ())
    with pytest.raises(ValidationError):
        consistency([True, 1])


def test_consistency_record_carries_fields():
    rs = RatingSet("i", "r1", "a", "b", (1, 1, 0, 1, 1), rater_kind="auto")
    r = consistency_record(rs, delta=0.3)
    assert (r.consistency, r.preference_strength, r.delta, r.rater_kind) == (0.8, 0.8, 0.3, "auto")


@pytest.mark.parametrize(
    "values, expected", [([1.0, 1.0, 1.0], 1.0), ([0.0, 0.6, 0.6], 0.4), ([0.8], 0.8)]
)
def test_aggregate_instance(values, expected):
    assert aggregate_instance([rec("i", v, rater=f"r{n}") for n, v in enumerate(values)]) == pytest.approx(
        expected
    )


def test_aggregate_instance_rejects_mixed():
    with pytest.raises(ValidationError):
        aggregate_instance([rec("i", 1.0), rec("j", 1.0)])
    with pytest.raises(ValidationError):
        aggregate_instance([])


def test_single_bin_all_consistent():
    seps = [sep(f"i{n}", 0.5) for n in range(3)]
    rows = binned_consistency([rec(f"i{n}", 1.0) for n in range(3)], seps, bin_count=1)
    assert rows[0].proportions == {1.0: 1.0} and rows[0].support == 3


def test_two_bins_hand_tally():
    seps = [sep("i0", 0.1), sep("i1", 0.2), sep("i2", 0.7), sep("i3", 0.9)]
    cons = [
        rec("i0", 0.0, rater="x"), rec("i0", 0.6, rater="y"), rec("i1", 0.6),
        rec("i2", 1.0, rater="x"), rec("i2", 0.8, rater="y"), rec("i3", 1.0),
    ]
    rows = binned_consistency(cons, seps, bin_count=2, range_mode="unit")
    assert rows[0].support == 3
    assert rows[0].proportions == pytest.approx({0.0: 1 / 3, 0.6: 2 / 3})
    assert rows[1].proportions == pytest.approx({0.8: 1 / 3, 1.0: 2 / 3})
    assert rows[0].mean == pytest.approx(0.4) and rows[1].mean == pytest.approx(2.8 / 3)
    agg = binned_consistency(cons, seps, bin_count=2, range_mode="unit", aggregate=True)
    assert agg[0].proportions == pytest.approx({0.3: 0.5, 0.6: 0.5})
    assert agg[1].mean == pytest.approx((0.9 + 1.0) / 2)


def test_lattice_values_group_together():
    # 0.1 + 0.2 style representation noise must not split a proportion
    seps = [sep("i0", 0.5), sep("i1", 0.5)]
    rows = binned_consistency([rec("i0", 0.6), rec("i1", 3 / 5 + 1e-15)], seps, bin_count=1)
    assert len(rows[0].proportions) == 1


def test_preference_all_minus_one():
    seps = [sep(f"i{n}", n / 4) for n in range(5)]
    cons = [rec(f"i{n}", 1.0, p=-1.0) for n in range(5)]
    for row in binned_preference_strength(cons, seps, bin_count=4, range_mode="unit"):
        if row.support:
            assert row.proportions == {-1.0: 1.0}


def test_preference_two_bins_hand_tally():
    seps = [sep("i0", 0.1), sep("i1", 0.9)]
    cons = [rec("i0", 0, p=0.2, rater="x"), rec("i0", 0, p=-0.2, rater="y"), rec("i1", 1, p=1.0)]
    rows = binned_preference_strength(cons, seps, bin_count=2, range_mode="unit")
    assert rows[0].proportions == {-0.2: 0.5, 0.2: 0.5}
    assert rows[1].proportions == {1.0: 1.0}


def test_join_keys_on_model_pair_and_reports_orphans():
    seps = [sep("i0", 0.1), sep("i1", 0.9)]
    with pytest.raises(ValidationError, match="i7"):
        binned_consistency([rec("i0", 1.0), rec("i7", 1.0)], seps)
    with pytest.raises(ValidationError, match="i0"):
        binned_consistency([rec("i0", 1.0, a="a", b="c")], seps)


def test_planted_low_delta_inconsistency():
    deltas = {f"i{n:03d}": n / 99 for n in range(100)}
    seps = [sep(i, d) for i, d in deltas.items()]
    cons = []
    rng = derive_rng(1, "planted")
    for rs in synthetic_ratings({i: 1.0 for i in deltas}, rng):
        ratings = rs.ratings
        if deltas[rs.instance_id] < 0.25:
            ratings = (1, -1) + ratings[2:]
        cons.append(consistency_record(RatingSet(rs.instance_id, rs.rater_id, "a", "b", ratings)))
    rows = binned_consistency(cons, seps, bin_count=4, range_mode="unit")
    assert rows[0].mean < rows[3].mean
    assert rows[0].mean == 0.0
