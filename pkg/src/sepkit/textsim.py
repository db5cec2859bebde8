"""Pairwise text-similarity functions used by every alignment computation.

All metrics here compare two *generations*, not a candidate against a gold
reference, so every metric is symmetric in its arguments. Metrics that are
asymmetric by construction (BLEU) treat the longer sequence as the reference.

New metrics can be added with :func:`register_metric`; the alignment layer
only ever calls :func:`similarity`.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from sepkit.errors import DegenerateGenerationError, MissingAuxiliaryError, ValidationError

if TYPE_CHECKING:
    from sepkit.corpus import Generation

ROUGE1_F1 = "rouge1-f1"
BLEU = "bleu"
BERTSCORE_LA = "bertscore-la"
EMBED_COSINE = "embed-cosine"
ENTITY_JACCARD = "entity-jaccard"

BLEU_MAX_ORDER = 4


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


@dataclass(frozen=True, eq=False)
class TokenEmbeddings:
    """Per-token vectors for one generation, optionally with a sentence vector.

    ``tokens`` is set when the embedding producer used its own tokenization
    (e.g. word pieces); the length penalty then uses that token count.
    """

    vectors: np.ndarray
    tokens: tuple[str, ...] | None = None
    sentence: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[1] == 0:
            raise ValidationError(f"token vectors must be a nonempty 2-D array, got shape {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise ValidationError("token vectors contain non-finite values")
        if self.tokens is not None and len(self.tokens) != vectors.shape[0]:
            raise ValidationError(
                f"{vectors.shape[0]} token vectors for {len(self.tokens)} tokens"
            )
        object.__setattr__(self, "vectors", vectors)
        if self.tokens is not None:
            object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.sentence is not None:
            sentence = np.asarray(self.sentence, dtype=np.float64)
            if sentence.ndim != 1:
                raise ValidationError("sentence vector must be 1-D")
            object.__setattr__(self, "sentence", sentence)

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def sentence_vector(self) -> np.ndarray:
        """The supplied sentence vector, else the mean of the token vectors."""
        if self.sentence is not None:
            return self.sentence
        return self.vectors.mean(axis=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenEmbeddings):
            return NotImplemented
        if self.tokens != other.tokens:
            return False
        if (self.sentence is None) != (other.sentence is None):
            return False
        if self.sentence is not None and not np.array_equal(self.sentence, other.sentence):
            return False
        return np.array_equal(self.vectors, other.vectors)

    __hash__ = None  # type: ignore[assignment]


def _strip_punctuation(text: str) -> str:
    return "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))


def tokenize(text: str) -> TokenSequence:
    """Lowercase, drop Unicode punctuation, split on whitespace."""
    return TokenSequence(tuple(_strip_punctuation(text.lower()).split()))


_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


def extract_entities(text: str) -> frozenset[str]:
    """Heuristic entity extractor used when no entity annotations exist.

    Capitalized words that do not start a sentence, punctuation removed.
    """
    entities = set()
    for sentence in _SENTENCE_BREAK.split(text.strip()):
        for word in sentence.split()[1:]:
            word = _strip_punctuation(word)
            if word and word[0].isupper():
                entities.add(word)
    return frozenset(entities)


def rouge1_f1(a: TokenSequence, b: TokenSequence) -> float:
    if not a.tokens and not b.tokens:
        return 1.0
    if not a.tokens or not b.tokens:
        return 0.0
    overlap = sum((Counter(a.tokens) & Counter(b.tokens)).values())
    # harmonic mean of overlap/|a| and overlap/|b|, written symmetrically
    return 2.0 * overlap / (a.length + b.length)


def _ngrams(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tokens[i : i + n] for i in range(len(tokens) - n + 1))


def bleu(a: TokenSequence, b: TokenSequence) -> float:
    """Sentence BLEU-4 with the longer sequence as reference.

    Unigram precision is unsmoothed; orders 2-4 use (matches + 1) / (total + 1),
    so a candidate shorter than n contributes a factor of 1 for that order.
    """
    if not a.tokens and not b.tokens:
        return 1.0
    if not a.tokens or not b.tokens:
        return 0.0
    cand, ref = (a, b) if a.length <= b.length else (b, a)
    log_precision = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        cand_counts = _ngrams(cand.tokens, n)
        ref_counts = _ngrams(ref.tokens, n)
        matches = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        total = max(cand.length - n + 1, 0)
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_precision += math.log(precision)
    if cand.length < ref.length:
        brevity = math.exp(1.0 - ref.length / cand.length)
    else:
        brevity = 1.0
    return brevity * math.exp(log_precision / BLEU_MAX_ORDER)


def length_penalty(len_a: int, len_b: int) -> float:
    """BLEU-style brevity factor, symmetric in its arguments."""
    if len_a <= 0 or len_b <= 0:
        raise DegenerateGenerationError(
            f"length penalty needs nonempty generations, got lengths {len_a} and {len_b}"
        )
    if len_a == len_b:
        return 1.0
    longer, shorter = max(len_a, len_b), min(len_a, len_b)
    return min(1.0, math.exp(1.0 - longer / shorter))


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValidationError("token embedding contains a zero vector")
    return vectors / norms


def _greedy_f1(ea: np.ndarray, eb: np.ndarray) -> float:
    sim = _unit_rows(ea) @ _unit_rows(eb).T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    denom = precision + recall
    if denom == 0.0:
        return 0.0
    return float(np.clip(2.0 * precision * recall / denom, -1.0, 1.0))


def bertscore_la(
    a: TokenSequence, ea: TokenEmbeddings, b: TokenSequence, eb: TokenEmbeddings
) -> float:
    """Greedy-matching BERTScore F1 (no idf weights) times the length penalty."""
    for seq, emb, side in ((a, ea, "first"), (b, eb, "second")):
        if emb is None:
            raise MissingAuxiliaryError(f"bertscore-la: {side} generation has no token embeddings")
        if len(emb) != seq.length:
            raise ValidationError(
                f"bertscore-la: {side} generation has {len(emb)} vectors for {seq.length} tokens"
            )
    if ea.dimension != eb.dimension:
        raise ValidationError(f"embedding dimension mismatch: {ea.dimension} vs {eb.dimension}")
    lp = length_penalty(a.length, b.length)
    # fixed orientation so that swapping the arguments is bit-identical
    if (b.length, eb.vectors.tobytes()) < (a.length, ea.vectors.tobytes()):
        ea, eb = eb, ea
    return _greedy_f1(ea.vectors, eb.vectors) * lp


def embed_cosine(va: np.ndarray, vb: np.ndarray) -> float:
    va = np.asarray(va, dtype=np.float64)
    vb = np.asarray(vb, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise ValidationError(f"embedding dimension mismatch: {va.shape} vs {vb.shape}")
    scale_a, scale_b = float(np.max(np.abs(va), initial=0.0)), float(np.max(np.abs(vb), initial=0.0))
    if scale_a == 0.0 or scale_b == 0.0:
        raise ValidationError("cosine similarity of a zero vector is undefined")
    # rescaling avoids underflow; fsum keeps the result exactly symmetric in (va, vb)
    va, vb = va / scale_a, vb / scale_b
    norm_a = math.sqrt(math.fsum((va * va).tolist()))
    norm_b = math.sqrt(math.fsum((vb * vb).tolist()))
    cos = math.fsum((va * vb).tolist()) / (norm_a * norm_b)
    return max(-1.0, min(1.0, cos))


def entity_jaccard(ents_a: Iterable[str], ents_b: Iterable[str]) -> float:
    a, b = set(ents_a), set(ents_b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


MetricFn = Callable[["Generation", "Generation"], float]
METRICS: dict[str, MetricFn] = {}


def register_metric(name: str) -> Callable[[MetricFn], MetricFn]:
    """Register ``fn(gen_a, gen_b) -> float`` under ``name``."""

    def deco(fn: MetricFn) -> MetricFn:
        METRICS[name] = fn
        return fn

    return deco


def _require_embeddings(gen: Generation) -> TokenEmbeddings:
    if gen.embeddings is None:
        raise MissingAuxiliaryError(f"no embeddings entry for {gen.key_str}")
    return gen.embeddings


def _embedding_tokens(gen: Generation, emb: TokenEmbeddings) -> TokenSequence:
    return TokenSequence(emb.tokens) if emb.tokens is not None else gen.tokens


@register_metric(ROUGE1_F1)
def _rouge_metric(a: Generation, b: Generation) -> float:
    return rouge1_f1(a.tokens, b.tokens)


@register_metric(BLEU)
def _bleu_metric(a: Generation, b: Generation) -> float:
    return bleu(a.tokens, b.tokens)


@register_metric(BERTSCORE_LA)
def _bertscore_metric(a: Generation, b: Generation) -> float:
    ea, eb = _require_embeddings(a), _require_embeddings(b)
    return bertscore_la(_embedding_tokens(a, ea), ea, _embedding_tokens(b, eb), eb)


@register_metric(EMBED_COSINE)
def _cosine_metric(a: Generation, b: Generation) -> float:
    ea, eb = _require_embeddings(a), _require_embeddings(b)
    return embed_cosine(ea.sentence_vector(), eb.sentence_vector())


@register_metric(ENTITY_JACCARD)
def _entity_metric(a: Generation, b: Generation) -> float:
    return entity_jaccard(a.entity_set, b.entity_set)


def metric_ids() -> tuple[str, ...]:
    return tuple(METRICS)


def similarity(metric: str, gen_a: Generation, gen_b: Generation) -> float:
    """Dispatch to a registered metric; errors carry both generation keys."""
    try:
        fn = METRICS[metric]
    except KeyError:
        raise ValidationError(
            f"unknown metric {metric!r}; choose from {', '.join(METRICS)}"
        ) from None
    try:
        return fn(gen_a, gen_b)
    except MissingAuxiliaryError:
        raise
    except ValidationError as exc:
        raise type(exc)(f"{metric}({gen_a.key_str}, {gen_b.key_str}): {exc}") from exc
