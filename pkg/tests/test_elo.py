import itertools
import math

import numpy as np
import pytest

from sepkit.elo import (
    LOSS,
    TIE,
    WIN,
    EloConfig,
    EloTable,
    Match,
    apply_match,
    bootstrap_ci,
    bootstrap_ratings,
    bootstrap_table,
    compare_tables,
    expected_score,
    pool_by_instance,
    rating_to_outcome,
    replay,
    sep_weight,
)
from sepkit.errors import ConfigError, ValidationError

CFG = EloConfig()
SEP = EloConfig(sep_weighted=True)


def m(outcome, instance="i", a="A", b="B", delta=None):
    return Match(instance, a, b, outcome, delta)


def test_expected_score():
    assert expected_score(1000, 1000) == 0.5
    assert expected_score(1400, 1000) == pytest.approx(10 / 11)
    assert expected_score(1000, 1400) == pytest.approx(1 / 11)


def test_sep_weight_anchors():
    assert sep_weight(0.4) == 4.0
    assert sep_weight(1.0) == pytest.approx(8 / (1 + math.exp(-3.6)), abs=1e-12)
    assert sep_weight(1.0) == pytest.approx(7.787, abs=1e-3)
    assert sep_weight(0.0) == pytest.approx(8 / (1 + math.exp(2.4)), abs=1e-12)
    assert sep_weight(0.0) == pytest.approx(0.665, abs=1e-3)


def test_sep_weight_monotone_and_bounded():
    ws = [sep_weight(d) for d in np.linspace(-1, 1, 41)]
    assert all(x < y for x, y in zip(ws, ws[1:]))
    assert all(0 < w < 8 for w in ws)
    with pytest.raises(ValidationError):
        sep_weight(1.5)


def test_apply_match_basic():
    t = apply_match(EloTable(), m(WIN), CFG)
    assert t.ratings == {"A": 1002.0, "B": 998.0}
    t = apply_match(EloTable(), m(TIE), CFG)
    assert t.ratings == {"A": 1000.0, "B": 1000.0}
    assert [h.match_index for h in t.history] == [0, 0]


def test_sep_weighted_at_threshold_equals_vanilla():
    a = apply_match(EloTable(), m(WIN, delta=0.4), SEP)
    b = apply_match(EloTable(), m(WIN), CFG)
    assert a.ratings == b.ratings


def test_sep_weighted_needs_delta():
    with pytest.raises(ValidationError, match="delta"):
        apply_match(EloTable(), m(WIN), SEP)
    with pytest.raises(ValidationError, match="match 1"):
        replay([m(WIN, delta=0.5), m(WIN)], SEP)


def test_match_validation():
    with pytest.raises(ValidationError):
        Match("i", "A", "B", 0.7)
    with pytest.raises(ValidationError):
        Match("i", "A", "A", WIN)
    assert [rating_to_outcome(r) for r in (-1, 0, 1)] == [WIN, TIE, LOSS]


def test_config_validation():
    with pytest.raises(ConfigError):
        EloConfig(base_k=0)
    with pytest.raises(ConfigError):
        EloConfig(T=2)


def test_replay_empty_and_single():
    assert replay([], CFG, models=["A", "B"]).ratings == {"A": 1000.0, "B": 1000.0}
    assert replay([m(LOSS)], CFG).ratings == apply_match(EloTable(), m(LOSS), CFG).ratings


def test_replay_matches_sequential_recomputation():
    matches = [
        m(WIN), m(LOSS, b="C"), m(TIE, a="B", b="C"), m(WIN, a="C"), m(LOSS),
        m(WIN, b="C"), m(WIN), m(TIE), m(LOSS, a="B", b="C"), m(WIN, a="C", b="B"),
    ]
    r = {"A": 1000.0, "B": 1000.0, "C": 1000.0}
    for x in matches:
        e = 1 / (1 + 10 ** ((r[x.model_b] - r[x.model_a]) / 400))
        d = 4 * (x.outcome - e)
        r[x.model_a] += d
        r[x.model_b] -= d
    got = replay(matches, CFG).ratings
    for k in r:
        assert got[k] == pytest.approx(r[k], abs=1e-9)


def test_history_chains_match_indices():
    t = EloTable()
    for x in (m(WIN), m(LOSS), m(TIE)):
        apply_match(t, x, CFG)
    assert [h.match_index for h in t.history] == [0, 0, 1, 1, 2, 2]
    assert t.history[2].old == t.history[0].new


# -- bootstrap ------------------------------------------------------------------------------


def test_bootstrap_single_option_per_instance():
    pool = {f"i{n}": [m(WIN if n % 2 else LOSS, instance=f"i{n}")] for n in range(10)}
    ci = bootstrap_ci(pool, trials=50, seed=3)
    for lo, hi in ci.values():
        assert hi - lo < 2 * CFG.base_k


def test_bootstrap_deterministic():
    pool = {f"i{n}": [m(WIN, f"i{n}"), m(LOSS, f"i{n}"), m(TIE, f"i{n}")] for n in range(20)}
    assert bootstrap_ci(pool, 100, seed=9) == bootstrap_ci(pool, 100, seed=9)
    assert bootstrap_ci(pool, 100, seed=9) != bootstrap_ci(pool, 100, seed=10)


def test_bootstrap_matches_exhaustive_enumeration():
    pool = {i: [m(WIN, i), m(LOSS, i)] for i in ("i0", "i1")}
    support = set()
    for picks in itertools.product(*(pool[i] for i in sorted(pool))):
        for order in itertools.permutations(picks):
            support.add(replay(order, CFG).ratings["A"])
    finals = bootstrap_ratings(pool, trials=100, seed=0)["A"]
    assert set(finals) <= support
    ci = bootstrap_ci(pool, trials=100, seed=0)
    assert ci["A"] == (min(support), max(support))
    assert ci["B"] == (2000 - max(support), 2000 - min(support))


def test_bootstrap_errors():
    with pytest.raises(ValidationError):
        bootstrap_ci({}, 10)
    with pytest.raises(ValidationError):
        bootstrap_ci({"i": []}, 10)
    with pytest.raises(ConfigError):
        bootstrap_ci({"i": [m(WIN)]}, 0)


def test_bootstrap_table_centres_on_trial_mean():
    pool = {f"i{n}": [m(WIN, f"i{n}"), m(LOSS, f"i{n}")] for n in range(30)}
    table = bootstrap_table(pool, trials=50, seed=1)
    finals = bootstrap_ratings(pool, trials=50, seed=1)
    for model, rating in table.ratings.items():
        assert rating == pytest.approx(np.mean(finals[model]))
        lo, hi = table.ci[model]
        assert lo <= rating <= hi


def test_pool_by_instance_preserves_order():
    ms = [m(WIN, "i1"), m(LOSS, "i0"), m(TIE, "i1")]
    assert pool_by_instance(ms) == {"i1": [ms[0], ms[2]], "i0": [ms[1]]}


# -- gaps ---------------------------------------------------------------------------------------


def test_compare_tables():
    t = EloTable(ratings={"A": 1010.0, "B": 990.0})
    assert compare_tables(t, t)[0].narrowing == 0.0
    (row,) = compare_tables(t, EloTable(ratings={"A": 1004.0, "B": 996.0}))
    assert row.narrowing == pytest.approx(12.0)
    with pytest.raises(ValidationError):
        compare_tables(t, EloTable(ratings={"A": 1.0}))


def test_conservation_on_random_streams():
    rng = np.random.default_rng(0)
    for _ in range(100):
        models = ["A", "B", "C"]
        t = EloTable()
        for _ in range(20):
            a, b = rng.choice(3, size=2, replace=False)
            x = Match("i", models[a], models[b], float(rng.choice([0.0, 0.5, 1.0])), float(rng.uniform(0, 1)))
            before = dict(t.ratings)
            apply_match(t, x, SEP)
            moved = sum(t.ratings[k] - before.get(k, 1000.0) for k in t.ratings)
            assert abs(moved) <= 1e-12
