"""Synthetic corpora with planted separability, for tests, demos and the bundled data.

Texts are word sequences over a fixed vocabulary. Each model on each
instance has a *base* sentence; its samples perturb the base by replacing a
fraction of words (``noise``) and by small length changes. Model B's base
keeps a fraction ``overlap`` of model A's words. Low noise gives high
self-alignment; low overlap gives low cross-alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sepkit.corpus import Generation, GenerationSet
from sepkit.elo import LOSS, WIN, Match
from sepkit.ratings import RatingSet
from sepkit.rng import derive_rng
from sepkit.textsim import TokenEmbeddings

EMBED_DIM = 8

_SYLLABLES = ("ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pa", "qi", "du")
_NAMES = ("Paris", "Obama", "Juarez", "Ursula", "Becky", "London", "Mistral", "Vicuna")


def _vocabulary(size: int = 600) -> tuple[str, ...]:
    words = []
    n = len(_SYLLABLES)
    for i in range(size):
        a, b, c = i % n, (i // n) % n, (i // (n * n)) % n
        words.append(_SYLLABLES[a] + _SYLLABLES[b] + _SYLLABLES[c])
    return tuple(words)


VOCAB = _vocabulary()


def word_vector(word: str) -> np.ndarray:
    """Fixed unit vector per word type (case-insensitive)."""
    v = derive_rng(0, "word-vector", word.lower()).standard_normal(EMBED_DIM)
    return v / np.linalg.norm(v)


def embed_text_tokens(tokens, rng: np.random.Generator, jitter: float = 0.05) -> TokenEmbeddings:
    vecs = np.array([word_vector(t) + jitter * rng.standard_normal(EMBED_DIM) for t in tokens])
    return TokenEmbeddings(vecs)


def _render(words: list[str]) -> str:
    return " ".join([words[0].capitalize()] + words[1:]) + "."


def _perturb(base: list[str], noise: float, rng: np.random.Generator, vocab) -> list[str]:
    words = [vocab[int(rng.integers(len(vocab)))] if rng.random() < noise else w for w in base]
    change = int(rng.integers(-2, 3))
    if change > 0:
        words += [vocab[int(rng.integers(len(vocab)))] for _ in range(change)]
    elif change < 0 and len(words) + change >= 3:
        words = words[:change]
    return words


@dataclass(frozen=True)
class InstanceSpec:
    instance_id: str
    noise_a: float
    noise_b: float
    overlap: float
    length: int = 16


def make_instance(
    spec: InstanceSpec,
    rng: np.random.Generator,
    k: int = 5,
    model_a: str = "model-a",
    model_b: str = "model-b",
    vocab=VOCAB,
) -> tuple[GenerationSet, GenerationSet]:
    base_a = [vocab[int(i)] for i in rng.integers(len(vocab), size=spec.length)]
    if rng.random() < 0.5:
        base_a[int(rng.integers(1, spec.length))] = _NAMES[int(rng.integers(len(_NAMES)))]
    base_b = [w if rng.random() < spec.overlap else vocab[int(rng.integers(len(vocab)))] for w in base_a]
    sets = []
    for model, base, noise in ((model_a, base_a, spec.noise_a), (model_b, base_b, spec.noise_b)):
        texts = [_render(_perturb(base, noise, rng, vocab)) for _ in range(k)]
        sets.append(GenerationSet.from_texts(spec.instance_id, model, texts))
    return sets[0], sets[1]


def scenario_sets(scenario: int, instance_id: str, rng: np.random.Generator, k: int = 5):
    """Generation sets realizing the four canonical self/cross configurations.

    1: model A tight, model B moderately spread, distinct content
    2: both models loose, distinct content
    3: both models identical within themselves, disjoint vocabularies
    4: both models tight around the same content
    """
    half = len(VOCAB) // 2
    vocab_a, vocab_b = VOCAB[:half], VOCAB[half:]
    if scenario == 3:
        a = [vocab_a[int(i)] for i in rng.integers(len(vocab_a), size=12)]
        b = [vocab_b[int(i)] for i in rng.integers(len(vocab_b), size=12)]
        return (
            GenerationSet.from_texts(instance_id, "model-a", [_render(a)] * k),
            GenerationSet.from_texts(instance_id, "model-b", [_render(b)] * k),
        )
    noise_a, noise_b, overlap = {1: (0.05, 0.3, 0.1), 2: (0.9, 0.9, 0.1), 4: (0.05, 0.05, 1.0)}[scenario]
    return make_instance(InstanceSpec(instance_id, noise_a, noise_b, overlap), rng, k)


def identical_sets(instance_id: str, text: str, k: int = 5):
    return (
        GenerationSet.from_texts(instance_id, "model-a", [text] * k),
        GenerationSet.from_texts(instance_id, "model-b", [text] * k),
    )


def robustness_specs(n: int = 50, seed: int = 0) -> list[InstanceSpec]:
    """Instances spanning low to high separation."""
    rng = derive_rng(seed, "robustness-specs")
    specs = []
    for i in range(n):
        level = i / max(n - 1, 1)
        specs.append(
            InstanceSpec(
                f"inst-{i:03d}",
                noise_a=float(0.5 - 0.45 * level + 0.05 * rng.random()),
                noise_b=float(0.6 - 0.4 * level + 0.05 * rng.random()),
                overlap=float(0.9 - 0.8 * level),
            )
        )
    return specs


def build_corpus(specs, seed: int = 0, k: int = 5) -> dict[tuple[str, str], GenerationSet]:
    corpus = {}
    for spec in specs:
        a, b = make_instance(spec, derive_rng(seed, "instance", spec.instance_id), k)
        corpus[(spec.instance_id, a.model_id)] = a
        corpus[(spec.instance_id, b.model_id)] = b
    return corpus


def embeddings_for(corpus, seed: int = 0) -> dict[tuple[str, str, int], TokenEmbeddings]:
    out = {}
    for gset in corpus.values():
        for gen in gset.samples:
            rng = derive_rng(seed, "jitter", *gen.key)
            out[gen.key] = embed_text_tokens(gen.tokens.tokens, rng)
    return out


def with_embeddings(corpus, seed: int = 0):
    emb = embeddings_for(corpus, seed)
    out = {}
    for key, gset in corpus.items():
        samples = tuple(
            Generation(g.instance_id, g.model_id, g.sample_index, g.text, embeddings=emb[g.key])
            for g in gset.samples
        )
        out[key] = GenerationSet(gset.instance_id, gset.model_id, samples, gset.temperature)
    return out


def synthetic_ratings(
    deltas: dict[str, float],
    rng: np.random.Generator,
    model_a: str = "model-a",
    model_b: str = "model-b",
    raters: int = 3,
    n: int = 5,
    tie_prob: float = 0.1,
    max_flip: float = 0.5,
) -> list[RatingSet]:
    """Raters who lean to one model per instance and flip with probability
    ``max_flip * (1 - delta)``, so flips get rarer as separability grows."""
    out = []
    for instance in sorted(deltas):
        d = min(max(deltas[instance], 0.0), 1.0)
        flip = max_flip * (1.0 - d)
        lean = 1 if rng.random() < 0.5 else -1
        for r in range(raters):
            ratings = []
            for _ in range(n):
                u = rng.random()
                if u < tie_prob:
                    ratings.append(0)
                elif u < tie_prob + (1 - tie_prob) * flip:
                    ratings.append(-lean)
                else:
                    ratings.append(lean)
            out.append(RatingSet(instance, f"rater-{r}", model_a, model_b, tuple(ratings)))
    return out


def sep_elo_pool(
    rng: np.random.Generator,
    n_instances: int = 200,
    low_fraction: float = 0.5,
    ratings_per_instance: int = 15,
    b_share: float = 0.6,
) -> dict[str, list[Match]]:
    """Match pool with coin-flip low-separability instances (delta < 0.2) and
    consistent high-separability instances (delta > 0.6), 60% of which B wins."""
    pool = {}
    n_low = int(round(n_instances * low_fraction))
    for i in range(n_instances):
        iid = f"inst-{i:03d}"
        if i < n_low:
            delta = float(rng.uniform(0.0, 0.2))
            outcomes = [WIN if rng.random() < 0.5 else LOSS for _ in range(ratings_per_instance)]
        else:
            delta = float(rng.uniform(0.6, 1.0))
            outcomes = [LOSS if rng.random() < b_share else WIN] * ratings_per_instance
        pool[iid] = [Match(iid, "model-a", "model-b", o, delta) for o in outcomes]
    return pool



BUNDLE_FILES = ("generations.jsonl", "embeddings.jsonl", "entities.jsonl", "ratings.jsonl")


def write_bundle(out_dir, seed: int = 0, n_instances: int = 40) -> list:
    """Write a small end-to-end corpus: generations, embeddings, entities, ratings.

    Rating rows randomize the display order and store the flip, as a real
    collection interface would.
    """
    from pathlib import Path

    from sepkit.pipeline.io import EmbeddingStore, write_embeddings, write_entities, write_generations, write_jsonl

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    specs = robustness_specs(n_instances, seed)
    corpus = build_corpus(specs, seed)
    write_generations(out / "generations.jsonl", corpus)
    write_embeddings(out / "embeddings.jsonl", EmbeddingStore(by_key=embeddings_for(corpus, seed)))
    names = {n.lower(): n for n in _NAMES}
    entities = {
        gen.key: frozenset(names[t] for t in gen.tokens.tokens if t in names)
        for gset in corpus.values()
        for gen in gset.samples
    }
    write_entities(out / "entities.jsonl", entities)
    levels = {spec.instance_id: i / max(n_instances - 1, 1) for i, spec in enumerate(specs)}
    rating_sets = synthetic_ratings(levels, derive_rng(seed, "ratings"))
    swap_rng = derive_rng(seed, "display-order")
    rows = []
    for rs in rating_sets:
        for i, rating in enumerate(rs.ratings):
            swapped = bool(swap_rng.random() < 0.5)
            rows.append(
                {
                    "instance_id": rs.instance_id,
                    "rater_id": rs.rater_id,
                    "model_a": rs.model_a,
                    "model_b": rs.model_b,
                    "pair_index": i,
                    "rating": -rating if swapped else rating,
                    "displayed_swapped": swapped,
                    "rater_kind": rs.rater_kind,
                }
            )
    write_jsonl(out / "ratings.jsonl", rows)
    return [out / name for name in BUNDLE_FILES]


def bundled_dir():
    from importlib.resources import files

    return files("sepkit") / "data" / "synthetic"
