"""JSONL readers and writers for every file the toolkit consumes or emits.

Every row carries ``"schema": "sepkit/1"``. Writers sort keys and use
``repr`` floats, so identical inputs give byte-identical files and
``load(write(x)) == x`` for every record type.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from sepkit.alignment import AlignmentEstimate
from sepkit.corpus import DEFAULT_TEMPERATURE, Generation, GenerationSet
from sepkit.elo import EloConfig, EloTable, GapRow, Match
from sepkit.errors import ValidationError
from sepkit.ratings import ConsistencyRecord, RatingSet
from sepkit.separability import SeparabilityRecord
from sepkit.textsim import TokenEmbeddings

log = logging.getLogger(__name__)

SCHEMA = "sepkit/1"

Key = tuple[str, str, int]
Corpus = dict[tuple[str, str], GenerationSet]


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield ``(line_number, row)`` for each nonblank line; bad JSON names its line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(row, dict):
                raise ValidationError(f"{path}:{lineno}: expected a JSON object")
            schema = row.get("schema", SCHEMA)
            if schema != SCHEMA:
                raise ValidationError(f"{path}:{lineno}: unsupported schema {schema!r}")
            yield lineno, row


def dumps(row: Mapping[str, Any]) -> str:
    return json.dumps(row, sort_keys=True, ensure_ascii=False, allow_nan=False)


def write_jsonl(path: str | Path, rows: Iterable[Mapping[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps({"schema": SCHEMA, **row}))
            fh.write("\n")


def write_json(path: str | Path, obj: Mapping[str, Any]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"schema": SCHEMA, **obj}, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False))
        fh.write("\n")


def read_json(path: str | Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
    if obj.get("schema") != SCHEMA:
        raise ValidationError(f"{path}: unsupported schema {obj.get('schema')!r}")
    return obj


def _require(row: Mapping[str, Any], fields: Iterable[str], where: str) -> None:
    missing = [f for f in fields if f not in row]
    if missing:
        raise ValidationError(f"{where}: missing field(s) {', '.join(missing)}")


def _int_field(row: Mapping[str, Any], name: str, where: str) -> int:
    value = row[name]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: {name} must be an integer, got {value!r}")
    return value


# -- generations ---------------------------------------------------------------

GENERATION_FIELDS = ("instance_id", "model_id", "sample_index", "text")


def load_generations(path: str | Path) -> Corpus:
    """Group generation rows into one GenerationSet per (instance, model)."""
    rows: dict[tuple[str, str], dict[int, Generation]] = defaultdict(dict)
    temperatures: dict[tuple[str, str], float] = {}
    seen: dict[Key, int] = {}
    for lineno, row in iter_jsonl(path):
        where = f"{path}:{lineno}"
        _require(row, GENERATION_FIELDS, where)
        gen = Generation(
            instance_id=str(row["instance_id"]),
            model_id=str(row["model_id"]),
            sample_index=_int_field(row, "sample_index", where),
            text=str(row["text"]),
            token_embeddings_ref=row.get("token_embeddings_ref"),
            entities=frozenset(row["entities"]) if row.get("entities") is not None else None,
        )
        if gen.key in seen:
            raise ValidationError(
                f"{where}: duplicate generation {gen.key_str} (first seen on line {seen[gen.key]})"
            )
        seen[gen.key] = lineno
        rows[(gen.instance_id, gen.model_id)][gen.sample_index] = gen
        if "temperature" in row:
            temperatures[(gen.instance_id, gen.model_id)] = float(row["temperature"])

    corpus: Corpus = {}
    for key in sorted(rows):
        by_index = rows[key]
        expected = list(range(len(by_index)))
        if sorted(by_index) != expected:
            missing = sorted(set(expected) - set(by_index))
            raise ValidationError(
                f"{path}: {key[0]}/{key[1]} sample indices are not contiguous from 0 "
                f"(missing {missing or 'none'}, have {sorted(by_index)})"
            )
        corpus[key] = GenerationSet(
            key[0],
            key[1],
            tuple(by_index[j] for j in expected),
            temperatures.get(key, DEFAULT_TEMPERATURE),
        )

    per_instance: dict[str, set[int]] = defaultdict(set)
    for (instance, _), gset in corpus.items():
        per_instance[instance].add(gset.k)
    for instance, ks in sorted(per_instance.items()):
        if len(ks) > 1:
            log.warning("instance %s has ragged sample counts across models: %s", instance, sorted(ks))
    return corpus


def generation_row(gen: Generation, temperature: float | None = None) -> dict[str, Any]:
    row: dict[str, Any] = {
        "instance_id": gen.instance_id,
        "model_id": gen.model_id,
        "sample_index": gen.sample_index,
        "text": gen.text,
    }
    if gen.token_embeddings_ref is not None:
        row["token_embeddings_ref"] = gen.token_embeddings_ref
    if gen.entities is not None:
        row["entities"] = sorted(gen.entities)
    if temperature is not None:
        row["temperature"] = temperature
    return row


def write_generations(path: str | Path, corpus: Corpus) -> None:
    rows = []
    for key in sorted(corpus):
        gset = corpus[key]
        for gen in gset.samples:
            row = generation_row(gen)
            if gset.temperature != DEFAULT_TEMPERATURE:
                row["temperature"] = gset.temperature
            rows.append(row)
    write_jsonl(path, rows)


def models_in(corpus: Corpus) -> list[str]:
    return sorted({model for _, model in corpus})


def instances_in(corpus: Corpus) -> list[str]:
    return sorted({instance for instance, _ in corpus})


# -- embeddings and entities ---------------------------------------------------


@dataclass
class EmbeddingStore:
    by_key: dict[Key, TokenEmbeddings] = field(default_factory=dict)
    by_ref: dict[str, TokenEmbeddings] = field(default_factory=dict)
    refs: dict[Key, str] = field(default_factory=dict)

    def lookup(self, gen: Generation) -> TokenEmbeddings | None:
        if gen.token_embeddings_ref is not None:
            return self.by_ref.get(gen.token_embeddings_ref)
        return self.by_key.get(gen.key)

    def __len__(self) -> int:
        return len(self.by_key)


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Per-token vectors keyed by (instance_id, model_id, sample_index).

    Every row must share one token-vector dimension (and one sentence-vector
    dimension when sentence vectors are given).
    """
    store = EmbeddingStore()
    dim = sentence_dim = None
    for lineno, row in iter_jsonl(path):
        where = f"{path}:{lineno}"
        _require(row, ("instance_id", "model_id", "sample_index", "vectors"), where)
        key = (str(row["instance_id"]), str(row["model_id"]), _int_field(row, "sample_index", where))
        if key in store.by_key:
            raise ValidationError(f"{where}: duplicate embeddings for {'/'.join(map(str, key))}")
        vectors = row["vectors"]
        if not vectors or any(not isinstance(v, list) for v in vectors):
            raise ValidationError(f"{where}: vectors must be a nonempty list of lists")
        lengths = {len(v) for v in vectors}
        if len(lengths) != 1:
            raise ValidationError(f"{where}: token vectors of mixed dimension {sorted(lengths)}")
        row_dim = lengths.pop()
        if dim is None:
            dim = row_dim
        elif row_dim != dim:
            raise ValidationError(f"{where}: vector dimension {row_dim} differs from {dim}")
        sentence = row.get("sentence")
        if sentence is not None:
            if sentence_dim is None:
                sentence_dim = len(sentence)
            elif len(sentence) != sentence_dim:
                raise ValidationError(
                    f"{where}: sentence dimension {len(sentence)} differs from {sentence_dim}"
                )
        try:
            emb = TokenEmbeddings(vectors, row.get("tokens"), sentence)
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
        store.by_key[key] = emb
        if "ref" in row:
            store.by_ref[str(row["ref"])] = emb
            store.refs[key] = str(row["ref"])
    return store


def write_embeddings(path: str | Path, store: EmbeddingStore) -> None:
    rows = []
    for key in sorted(store.by_key):
        emb = store.by_key[key]
        row: dict[str, Any] = {
            "instance_id": key[0],
            "model_id": key[1],
            "sample_index": key[2],
            "vectors": emb.vectors.tolist(),
        }
        if emb.tokens is not None:
            row["tokens"] = list(emb.tokens)
        if emb.sentence is not None:
            row["sentence"] = emb.sentence.tolist()
        if key in store.refs:
            row["ref"] = store.refs[key]
        rows.append(row)
    write_jsonl(path, rows)


def load_entities(path: str | Path) -> dict[Key, frozenset[str]]:
    store: dict[Key, frozenset[str]] = {}
    for lineno, row in iter_jsonl(path):
        where = f"{path}:{lineno}"
        _require(row, ("instance_id", "model_id", "sample_index", "entities"), where)
        key = (str(row["instance_id"]), str(row["model_id"]), _int_field(row, "sample_index", where))
        if key in store:
            raise ValidationError(f"{where}: duplicate entities for {'/'.join(map(str, key))}")
        if not isinstance(row["entities"], list):
            raise ValidationError(f"{where}: entities must be a list of strings")
        store[key] = frozenset(str(e) for e in row["entities"])
    return store


def write_entities(path: str | Path, store: Mapping[Key, frozenset[str]]) -> None:
    write_jsonl(
        path,
        (
            {"instance_id": k[0], "model_id": k[1], "sample_index": k[2], "entities": sorted(v)}
            for k, v in sorted(store.items())
        ),
    )


def attach(
    corpus: Corpus,
    embeddings: EmbeddingStore | None = None,
    entities: Mapping[Key, frozenset[str]] | None = None,
) -> Corpus:
    """Return a corpus whose generations carry their store entries.

    Generations without an entry keep ``None``; a metric that needs the
    entry then fails naming the generation.
    """
    out: Corpus = {}
    for key, gset in corpus.items():
        samples = []
        for gen in gset.samples:
            changes: dict[str, Any] = {}
            if embeddings is not None:
                changes["embeddings"] = embeddings.lookup(gen)
            if entities is not None and gen.entities is None and gen.key in entities:
                changes["entities"] = entities[gen.key]
            samples.append(replace(gen, **changes) if changes else gen)
        out[key] = replace(gset, samples=tuple(samples))
    return out


# -- ratings -------------------------------------------------------------------

RATING_FIELDS = ("instance_id", "rater_id", "model_a", "model_b", "pair_index", "rating")


def load_ratings(path: str | Path) -> list[RatingSet]:
    """Group rating rows into RatingSets in canonical (model_a, model_b) orientation.

    Rows shown with the two outputs swapped (``displayed_swapped: true``) are
    sign-flipped. Pair indices of one (instance, rater) must run 0..N-1.
    """
    groups: dict[tuple[str, str], dict[int, int]] = defaultdict(dict)
    meta: dict[tuple[str, str], tuple[str, str, str]] = {}
    for lineno, row in iter_jsonl(path):
        where = f"{path}:{lineno}"
        _require(row, RATING_FIELDS, where)
        rating = row["rating"]
        if isinstance(rating, bool) or rating not in (-1, 0, 1):
            raise ValidationError(f"{where}: rating {rating!r} is not one of -1, 0, 1")
        swapped = row.get("displayed_swapped", False)
        if not isinstance(swapped, bool):
            raise ValidationError(f"{where}: displayed_swapped must be true or false")
        if swapped:
            rating = -rating
        key = (str(row["instance_id"]), str(row["rater_id"]))
        info = (str(row["model_a"]), str(row["model_b"]), str(row.get("rater_kind", "human")))
        if meta.setdefault(key, info) != info:
            raise ValidationError(f"{where}: {key[0]}/{key[1]} mixes model pairs or rater kinds")
        pair_index = _int_field(row, "pair_index", where)
        if pair_index in groups[key]:
            raise ValidationError(
                f"{where}: duplicate rating for {key[0]}/{key[1]} pair_index {pair_index}"
            )
        groups[key][pair_index] = rating

    sets = []
    for key in sorted(groups):
        by_index = groups[key]
        expected = set(range(len(by_index)))
        if set(by_index) != expected:
            gap = sorted(expected - set(by_index))
            raise ValidationError(
                f"{path}: {key[0]}/{key[1]} pair_index sequence has a gap at {gap} "
                f"(have {sorted(by_index)})"
            )
        model_a, model_b, kind = meta[key]
        sets.append(
            RatingSet(key[0], key[1], model_a, model_b, tuple(by_index[i] for i in range(len(by_index))), kind)
        )
    return sets


def write_ratings(path: str | Path, rating_sets: Iterable[RatingSet]) -> None:
    rows = []
    for rs in sorted(rating_sets, key=lambda r: (r.instance_id, r.rater_id)):
        for i, rating in enumerate(rs.ratings):
            rows.append(
                {
                    "instance_id": rs.instance_id,
                    "rater_id": rs.rater_id,
                    "model_a": rs.model_a,
                    "model_b": rs.model_b,
                    "pair_index": i,
                    "rating": rating,
                    "displayed_swapped": False,
                    "rater_kind": rs.rater_kind,
                }
            )
    write_jsonl(path, rows)


# -- derived records -----------------------------------------------------------


def _load_dataclass_rows(path, cls, required):
    out = []
    names = set(cls.__dataclass_fields__)
    for lineno, row in iter_jsonl(path):
        where = f"{path}:{lineno}"
        _require(row, required, where)
        kwargs = {k: v for k, v in row.items() if k in names}
        try:
            out.append(cls(**kwargs))
        except (TypeError, ValidationError) as exc:
            raise ValidationError(f"{where}: {exc}") from None
    return out


def load_separability(path: str | Path) -> list[SeparabilityRecord]:
    return _load_dataclass_rows(
        path, SeparabilityRecord, ("instance_id", "model_a", "model_b", "metric", "self_a", "self_b", "cross")
    )


def write_separability(path: str | Path, records: Iterable[SeparabilityRecord]) -> None:
    write_jsonl(path, (asdict(r) for r in records))


def load_alignments(path: str | Path) -> list[AlignmentEstimate]:
    return _load_dataclass_rows(
        path, AlignmentEstimate, ("kind", "model_a", "model_b", "instance_id", "raw_value", "compared_pairs", "metric")
    )


def write_alignments(path: str | Path, estimates: Iterable[AlignmentEstimate]) -> None:
    write_jsonl(path, (asdict(e) for e in estimates))


def load_consistency(path: str | Path) -> list[ConsistencyRecord]:
    return _load_dataclass_rows(
        path, ConsistencyRecord, ("instance_id", "rater_id", "model_a", "model_b", "consistency", "preference_strength")
    )


def write_consistency(path: str | Path, records: Iterable[ConsistencyRecord]) -> None:
    write_jsonl(path, (asdict(r) for r in records))


def load_matches(path: str | Path) -> list[Match]:
    matches = _load_dataclass_rows(path, Match, ("instance_id", "model_a", "model_b", "outcome"))
    return [replace(m, outcome=float(m.outcome)) for m in matches]


def write_matches(path: str | Path, matches: Iterable[Match]) -> None:
    rows = []
    for m in matches:
        row = asdict(m)
        if row["delta"] is None:
            del row["delta"]
        rows.append(row)
    write_jsonl(path, rows)


# -- leaderboard ---------------------------------------------------------------


@dataclass
class Leaderboard:
    config: EloConfig
    tables: dict[str, EloTable]
    gaps: list[GapRow] = field(default_factory=list)
    bootstrap_trials: int = 0
    seed: int | None = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Leaderboard):
            return NotImplemented
        mine = {k: (t.ratings, t.ci) for k, t in self.tables.items()}
        theirs = {k: (t.ratings, t.ci) for k, t in other.tables.items()}
        return (
            self.config == other.config
            and mine == theirs
            and self.gaps == other.gaps
            and self.bootstrap_trials == other.bootstrap_trials
            and self.seed == other.seed
        )


def leaderboard_dict(board: Leaderboard) -> dict[str, Any]:
    tables = {}
    for name, table in board.tables.items():
        entries = []
        for rank, (model, rating) in enumerate(table.ranking(), start=1):
            entry: dict[str, Any] = {"rank": rank, "model": model, "rating": rating}
            if table.ci is not None and model in table.ci:
                entry["ci"] = list(table.ci[model])
            entries.append(entry)
        tables[name] = entries
    return {
        "config": asdict(board.config),
        "tables": tables,
        "gaps": [asdict(g) for g in board.gaps],
        "bootstrap_trials": board.bootstrap_trials,
        "seed": board.seed,
    }


def write_leaderboard(path: str | Path, board: Leaderboard) -> None:
    write_json(path, leaderboard_dict(board))


def load_leaderboard(path: str | Path) -> Leaderboard:
    obj = read_json(path)
    tables = {}
    for name, entries in obj["tables"].items():
        ratings = {e["model"]: float(e["rating"]) for e in entries}
        ci = {e["model"]: (float(e["ci"][0]), float(e["ci"][1])) for e in entries if "ci" in e}
        tables[name] = EloTable(ratings=ratings, ci=ci or None)
    return Leaderboard(
        config=EloConfig(**obj["config"]),
        tables=tables,
        gaps=[GapRow(**g) for g in obj.get("gaps", [])],
        bootstrap_trials=int(obj.get("bootstrap_trials", 0)),
        seed=obj.get("seed"),
    )
