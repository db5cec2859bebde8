import logging

import numpy as np
import pytest

from sepkit.alignment import AlignmentEstimate
from sepkit.corpus import Generation, GenerationSet
from sepkit.elo import EloConfig, EloTable, GapRow, Match
from sepkit.errors import MissingAuxiliaryError, ValidationError
from sepkit.pipeline import io
from sepkit.ratings import ConsistencyRecord, RatingSet
from sepkit.separability import SeparabilityRecord
from sepkit.synthetic import build_corpus, embeddings_for, robustness_specs
from sepkit.textsim import TokenEmbeddings, similarity


def gen_rows(n_instances=2, models=("a", "b"), k=5):
    return [
        {"instance_id": f"i{i}", "model_id": m, "sample_index": j, "text": f"text {i} {m} {j}"}
        for i in range(n_instances)
        for m in models
        for j in range(k)
    ]


def test_load_generations_groups_sets(tmp_path):
    path = tmp_path / "g.jsonl"
    io.write_jsonl(path, gen_rows())
    corpus = io.load_generations(path)
    assert len(corpus) == 4
    assert all(s.k == 5 for s in corpus.values())
    assert corpus[("i1", "b")].samples[3].text == "text 1 b 3"


def test_load_generations_duplicate_names_line(tmp_path):
    rows = gen_rows(1, ("a",), 2)
    path = tmp_path / "g.jsonl"
    io.write_jsonl(path, rows + [rows[1]])
    with pytest.raises(ValidationError, match=r"g\.jsonl:3: duplicate generation i0/a/1 \(first seen on line 2\)"):
        io.load_generations(path)


def test_load_generations_gap_and_bad_json(tmp_path):
    path = tmp_path / "g.jsonl"
    rows = gen_rows(1, ("a",), 3)
    io.write_jsonl(path, [rows[0], rows[2]])
    with pytest.raises(ValidationError, match="missing \\[1\\]"):
        io.load_generations(path)
    path.write_text('{"instance_id": "i"}\n')
    with pytest.raises(ValidationError, match="missing field"):
        io.load_generations(path)
    path.write_text("not json\n")
    with pytest.raises(ValidationError, match=":1: invalid JSON"):
        io.load_generations(path)
    path.write_text('{"schema": "other/2"}\n')
    with pytest.raises(ValidationError, match="schema"):
        io.load_generations(path)


def test_load_generations_empty_and_ragged(tmp_path, caplog):
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    assert io.load_generations(empty) == {}
    path = tmp_path / "r.jsonl"
    io.write_jsonl(path, gen_rows(1, ("a",), 3) + gen_rows(1, ("b",), 2))
    with caplog.at_level(logging.WARNING):
        corpus = io.load_generations(path)
    assert corpus[("i0", "a")].k == 3 and corpus[("i0", "b")].k == 2
    assert "ragged" in caplog.text


def test_generations_round_trip(tmp_path):
    corpus = build_corpus(robustness_specs(4), seed=1)
    corpus[("inst-000", "model-a")] = GenerationSet(
        "inst-000", "model-a",
        tuple(Generation(g.instance_id, g.model_id, g.sample_index, g.text, entities=frozenset({"X"}))
              for g in corpus[("inst-000", "model-a")].samples),
        temperature=0.7,
    )
    path = tmp_path / "g.jsonl"
    io.write_generations(path, corpus)
    assert io.load_generations(path) == corpus


def test_embeddings_round_trip_and_validation(tmp_path):
    corpus = build_corpus(robustness_specs(2))
    store = io.EmbeddingStore(by_key=embeddings_for(corpus))
    key = next(iter(store.by_key))
    store.by_key[key] = TokenEmbeddings(store.by_key[key].vectors, ("w",) * len(store.by_key[key]), np.ones(3))
    store.refs[key] = "ref-0"
    store.by_ref["ref-0"] = store.by_key[key]
    path = tmp_path / "e.jsonl"
    io.write_embeddings(path, store)
    assert io.load_embeddings(path) == store
    assert all(e.dimension == 8 for e in store.by_key.values())

    bad = tmp_path / "bad.jsonl"
    io.write_jsonl(bad, [
        {"instance_id": "i", "model_id": "m", "sample_index": 0, "vectors": [[0.0] * 8]},
        {"instance_id": "i", "model_id": "m", "sample_index": 1, "vectors": [[0.0] * 7]},
    ])
    with pytest.raises(ValidationError, match="dimension 7 differs from 8"):
        io.load_embeddings(bad)


def test_attach_and_missing_entry(tmp_path):
    corpus = build_corpus(robustness_specs(2))
    emb = embeddings_for(corpus)
    missing = next(iter(emb))
    del emb[missing]
    attached = io.attach(corpus, io.EmbeddingStore(by_key=emb))
    gset = attached[(missing[0], missing[1])]
    other = gset.samples[1] if missing[2] == 0 else gset.samples[0]
    with pytest.raises(MissingAuxiliaryError, match="/".join(map(str, missing))):
        similarity("bertscore-la", gset.samples[missing[2]], other)


def test_entities_round_trip(tmp_path):
    store = {("i", "m", 0): frozenset({"Paris", "Obama"}), ("i", "m", 1): frozenset()}
    path = tmp_path / "ent.jsonl"
    io.write_entities(path, store)
    assert io.load_entities(path) == store
    corpus = {("i", "m"): GenerationSet.from_texts("i", "m", ["a", "b"])}
    attached = io.attach(corpus, entities=store)
    assert attached[("i", "m")].samples[0].entities == {"Paris", "Obama"}


def rating_row(i, rating, swapped=False, instance="i0", rater="r"):
    return {"instance_id": instance, "rater_id": rater, "model_a": "a", "model_b": "b",
            "pair_index": i, "rating": rating, "displayed_swapped": swapped}


def test_load_ratings_flip_and_grouping(tmp_path):
    path = tmp_path / "r.jsonl"
    io.write_jsonl(path, [rating_row(1, 1, True), rating_row(0, 1), *[rating_row(i, 0) for i in (2, 3, 4)]])
    (rs,) = io.load_ratings(path)
    assert rs.ratings == (1, -1, 0, 0, 0)


def test_load_ratings_errors(tmp_path):
    path = tmp_path / "r.jsonl"
    io.write_jsonl(path, [rating_row(0, 1), rating_row(2, 1)])
    with pytest.raises(ValidationError, match=r"gap at \[1\]"):
        io.load_ratings(path)
    io.write_jsonl(path, [rating_row(0, 2)])
    with pytest.raises(ValidationError, match="not one of"):
        io.load_ratings(path)
    row = rating_row(0, 1)
    del row["pair_index"]
    io.write_jsonl(path, [row])
    with pytest.raises(ValidationError, match="pair_index"):
        io.load_ratings(path)


def test_ratings_round_trip(tmp_path):
    sets = [RatingSet("i0", "r1", "a", "b", (1, 0, -1)), RatingSet("i1", "r1", "a", "b", (0,), "auto")]
    path = tmp_path / "r.jsonl"
    io.write_ratings(path, sets)
    assert io.load_ratings(path) == sets


def test_record_round_trips(tmp_path):
    seps = [
        SeparabilityRecord("i0", "a", "b", "bleu", 0.1, 0.2, 0.3),
        SeparabilityRecord("i1", "a", "b", "bleu", 0.4, 0.5, 0.6, 0.1, 1 / 3, 0.7, 0.2, 0.1, 0.9, False),
    ]
    aligns = [AlignmentEstimate("self", "a", "a", "i0", 0.5, 20, "bleu", None),
              AlignmentEstimate("cross", "a", "b", "i0", 0.25, 13, "bleu", 77)]
    cons = [ConsistencyRecord("i0", "r", "a", "b", 0.8, -0.8, 0.3), ConsistencyRecord("i1", "r", "a", "b", 0.0, 0.0)]
    matches = [Match("i0", "a", "b", 1.0, 0.5), Match("i1", "a", "b", 0.5)]
    cases = [
        (io.write_separability, io.load_separability, seps),
        (io.write_alignments, io.load_alignments, aligns),
        (io.write_consistency, io.load_consistency, cons),
        (io.write_matches, io.load_matches, matches),
    ]
    for n, (write, load, records) in enumerate(cases):
        path = tmp_path / f"{n}.jsonl"
        write(path, records)
        assert load(path) == records


def test_leaderboard_round_trip(tmp_path):
    board = io.Leaderboard(
        EloConfig(sep_weighted=True),
        {"vanilla": EloTable({"a": 1001.5, "b": 998.5}, ci={"a": (990.0, 1010.0), "b": (989.0, 1008.0)}),
         "sep": EloTable({"a": 1000.25, "b": 999.75})},
        [GapRow("a", "b", 3.0, 0.5, 2.5)],
        bootstrap_trials=100,
        seed=4,
    )
    path = tmp_path / "lb.json"
    io.write_leaderboard(path, board)
    assert io.load_leaderboard(path) == board


def test_writers_are_byte_stable(tmp_path):
    corpus = build_corpus(robustness_specs(3))
    io.write_generations(tmp_path / "a.jsonl", corpus)
    io.write_generations(tmp_path / "b.jsonl", dict(reversed(list(corpus.items()))))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
