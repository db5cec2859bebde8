"""Run configuration and the corpus-level drivers behind the CLI commands."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from sepkit.alignment import AlignmentEstimate, estimate_cross_alignment, estimate_self_alignment
from sepkit.corpus import DEFAULT_K, DEFAULT_TEMPERATURE, GenerationSet
from sepkit.elo import EloConfig, Match, rating_to_outcome
from sepkit.errors import ConfigError, ValidationError
from sepkit.ratings import ConsistencyRecord, RatingSet, consistency_record
from sepkit.rng import derive_seed
from sepkit.separability import RANGE_MODES, OBSERVED, SeparabilityRecord, compute_instance, finalize_run
from sepkit.textsim import METRICS, BERTSCORE_LA

from .io import Corpus, models_in

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    metric: str = BERTSCORE_LA
    k: int = DEFAULT_K
    temperature: float = DEFAULT_TEMPERATURE
    c: int | None = None
    seed: int = 0
    bin_count: int = 4
    bin_range_mode: str = OBSERVED
    workers: int = 1
    bootstrap_trials: int = 100
    elo: EloConfig = field(default_factory=EloConfig)

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}; choose from {', '.join(METRICS)}")
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.c is not None and not 1 <= self.c <= self.k * self.k:
            raise ConfigError(f"c must lie in [1, {self.k * self.k}], got {self.c}")
        if self.bin_count < 1:
            raise ConfigError(f"bin_count must be >= 1, got {self.bin_count}")
        if self.bin_range_mode not in RANGE_MODES:
            raise ConfigError(f"bin range must be one of {RANGE_MODES}, got {self.bin_range_mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.bootstrap_trials < 1:
            raise ConfigError("bootstrap trials must be >= 1")

    @property
    def effective_c(self) -> int:
        return self.c if self.c is not None else self.k * self.k

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        data = dict(data)
        if "elo" in data:
            data["elo"] = EloConfig(**data["elo"])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        return cls.from_mapping(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def resolve_pair(corpus: Corpus, model_a: str | None, model_b: str | None) -> tuple[str, str]:
    available = models_in(corpus)
    if model_a is None and model_b is None:
        if len(available) != 2:
            raise ValidationError(
                f"corpus has models {available}; pass --model-a and --model-b explicitly"
            )
        return available[0], available[1]
    if model_a is None or model_b is None:
        raise ValidationError("pass both --model-a and --model-b")
    for m in (model_a, model_b):
        if m not in available:
            raise ValidationError(f"model {m!r} not in corpus (have {available})")
    if model_a == model_b:
        raise ValidationError("model_a and model_b must differ")
    return model_a, model_b


def _limit(gset: GenerationSet, k: int) -> GenerationSet:
    if gset.k > k:
        return replace(gset, samples=gset.samples[:k])
    return gset


def paired_sets(
    corpus: Corpus, model_a: str, model_b: str, k: int
) -> list[tuple[GenerationSet, GenerationSet]]:
    """Instances holding both models, each set cut to its first ``k`` samples."""
    pairs = []
    instances = sorted({i for i, _ in corpus})
    for instance in instances:
        a, b = corpus.get((instance, model_a)), corpus.get((instance, model_b))
        if a is None or b is None:
            log.warning("instance %s lacks generations for %s; skipped", instance,
                        model_a if a is None else model_b)
            continue
        pairs.append((_limit(a, k), _limit(b, k)))
    return pairs


def _c_for(a: GenerationSet, b: GenerationSet, config: RunConfig) -> int:
    full = a.k * b.k
    if config.c is None:
        return full
    if config.c > full:
        raise ConfigError(
            f"c = {config.c} exceeds the {full} available pairs on instance {a.instance_id}"
        )
    return config.c


def subsample_seed(config: RunConfig, instance_id: str, model_a: str, model_b: str) -> int:
    return derive_seed(config.seed, "subsample", instance_id, model_a, model_b)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def compute_raw_records(
    corpus: Corpus, model_a: str, model_b: str, config: RunConfig
) -> list[SeparabilityRecord]:
    def one(pair):
        a, b = pair
        seed = subsample_seed(config, a.instance_id, model_a, model_b)
        return compute_instance(a, b, config.metric, _c_for(a, b, config), seed)

    return _map(one, paired_sets(corpus, model_a, model_b, config.k), config.workers)


def compute_separability(
    corpus: Corpus, model_a: str, model_b: str, config: RunConfig
) -> list[SeparabilityRecord]:
    raw = compute_raw_records(corpus, model_a, model_b, config)
    if not raw:
        raise ValidationError("no instances")
    return finalize_run(raw)


def compute_alignments(
    corpus: Corpus, model_a: str, model_b: str, config: RunConfig
) -> list[AlignmentEstimate]:
    def one(pair):
        a, b = pair
        seed = subsample_seed(config, a.instance_id, model_a, model_b)
        return [
            estimate_self_alignment(a, config.metric, seed),
            estimate_self_alignment(b, config.metric, seed),
            estimate_cross_alignment(a, b, config.metric, _c_for(a, b, config), seed),
        ]

    nested = _map(one, paired_sets(corpus, model_a, model_b, config.k), config.workers)
    return [est for group in nested for est in group]


def _delta_index(records: Sequence[SeparabilityRecord] | None) -> dict[tuple[str, str, str], float]:
    if not records:
        return {}
    return {
        (r.instance_id, r.model_a, r.model_b): r.delta for r in records if r.delta is not None
    }


def consistency_records(
    rating_sets: Sequence[RatingSet], sep_records: Sequence[SeparabilityRecord] | None = None
) -> list[ConsistencyRecord]:
    deltas = _delta_index(sep_records)
    return [
        consistency_record(rs, deltas.get((rs.instance_id, rs.model_a, rs.model_b)))
        for rs in rating_sets
    ]


def matches_from_ratings(
    rating_sets: Sequence[RatingSet], sep_records: Sequence[SeparabilityRecord] | None = None
) -> list[Match]:
    """One match per individual rating, in file order, with the instance delta attached."""
    deltas = _delta_index(sep_records)
    matches = []
    for rs in rating_sets:
        delta = deltas.get((rs.instance_id, rs.model_a, rs.model_b))
        for rating in rs.ratings:
            matches.append(
                Match(rs.instance_id, rs.model_a, rs.model_b, rating_to_outcome(rating), delta)
            )
    return matches


def attach_deltas(matches: Sequence[Match], sep_records: Sequence[SeparabilityRecord]) -> list[Match]:
    deltas = _delta_index(sep_records)
    out = []
    for m in matches:
        d = deltas.get((m.instance_id, m.model_a, m.model_b))
        if d is None:
            d = deltas.get((m.instance_id, m.model_b, m.model_a))
        out.append(replace(m, delta=d) if d is not None and m.delta is None else m)
    return out
