"""Monte-Carlo estimates of self- and cross-alignment between generation sets.

An alignment is the expected similarity between one draw from each of two
output distributions, estimated from the K sampled generations per model.
Self-alignment compares a model with itself and skips the j == l pairs.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from sepkit.corpus import GenerationSet
from sepkit.errors import ConfigError, ValidationError
from sepkit.textsim import similarity

SELF = "self"
CROSS = "cross"

DEGENERATE_RANGE = 1e-9


@dataclass(frozen=True)
class AlignmentEstimate:
    kind: str
    model_a: str
    model_b: str
    instance_id: str
    raw_value: float
    compared_pairs: int
    metric: str
    rng_seed: int | None = None


def _pair_similarity(metric: str, set_a: GenerationSet, set_b: GenerationSet, j: int, l: int) -> float:
    try:
        return similarity(metric, set_a.samples[j], set_b.samples[l])
    except ValidationError as exc:
        raise type(exc)(f"pair ({j}, {l}): {exc}") from exc


def alignment_matrix(set_a: GenerationSet, set_b: GenerationSet, metric: str) -> np.ndarray:
    """Matrix of s(a_j, b_l) over all sample pairs."""
    if set_a.k == 0 or set_b.k == 0:
        raise ValidationError("alignment needs nonempty generation sets")
    out = np.empty((set_a.k, set_b.k), dtype=np.float64)
    for j in range(set_a.k):
        for l in range(set_b.k):
            out[j, l] = _pair_similarity(metric, set_a, set_b, j, l)
    return out


def estimate_cross_alignment(
    set_a: GenerationSet,
    set_b: GenerationSet,
    metric: str,
    c: int | None = None,
    seed: int | None = None,
) -> AlignmentEstimate:
    """Mean similarity over ``c`` cross pairs (all K_a * K_b pairs by default).

    With ``c`` below the full pair count, pairs are drawn uniformly without
    replacement from a generator seeded by ``seed``, which is then required.
    """
    if set_a.instance_id != set_b.instance_id:
        raise ValidationError(
            f"instance mismatch: {set_a.instance_id!r} vs {set_b.instance_id!r}"
        )
    if set_a.model_id == set_b.model_id:
        raise ValidationError("cross-alignment needs two distinct models")
    full = set_a.k * set_b.k
    if full == 0:
        raise ValidationError("alignment needs nonempty generation sets")
    if c is None:
        c = full
    if not 1 <= c <= full:
        raise ConfigError(f"c must lie in [1, {full}], got {c}")
    if c == full:
        value = float(alignment_matrix(set_a, set_b, metric).mean())
    else:
        if seed is None:
            raise ConfigError("subsampled cross-alignment needs a seed")
        flat = np.random.default_rng(seed).choice(full, size=c, replace=False)
        values = [
            _pair_similarity(metric, set_a, set_b, *divmod(int(idx), set_b.k)) for idx in flat
        ]
        value = float(np.mean(values))
    return AlignmentEstimate(
        CROSS, set_a.model_id, set_b.model_id, set_a.instance_id, value, c, metric, seed
    )


def estimate_self_alignment(
    set_a: GenerationSet, metric: str, seed: int | None = None
) -> AlignmentEstimate:
    """Mean similarity over the K(K-1) ordered pairs with j != l.

    Every metric is symmetric, so each unordered pair is scored once and
    counted twice. ``seed`` is recorded only; no pairs are subsampled.
    """
    k = set_a.k
    if k < 2:
        raise ValidationError(
            f"self-alignment of {set_a.instance_id}/{set_a.model_id} needs K >= 2, got {k}"
        )
    values = [
        _pair_similarity(metric, set_a, set_a, j, l) for j in range(k) for l in range(j + 1, k)
    ]
    value = float(np.mean(values))
    return AlignmentEstimate(
        SELF, set_a.model_id, set_a.model_id, set_a.instance_id, value, k * (k - 1), metric, seed
    )


@dataclass(frozen=True)
class Normalization:
    values: list[float]
    min: float
    max: float
    degenerate: bool


def min_max_normalize(values: Sequence[float], labels: Sequence[str] | None = None) -> Normalization:
    """Affine map of ``values`` onto [0, 1].

    A range narrower than 1e-9 maps every value to 0.5 and sets ``degenerate``.
    ``labels`` name the records in error messages.
    """
    if len(values) == 0:
        raise ValidationError("cannot normalize an empty list")
    for i, v in enumerate(values):
        if not math.isfinite(v):
            name = labels[i] if labels is not None else f"index {i}"
            raise ValidationError(f"non-finite alignment value {v!r} at {name}")
    lo, hi = min(values), max(values)
    span = hi - lo
    if span < DEGENERATE_RANGE:
        return Normalization([0.5] * len(values), lo, hi, True)
    return Normalization([(v - lo) / span for v in values], lo, hi, False)
