"""ELO ratings with optional separability-weighted K factors.

Each match updates both ratings by the same signed amount
``K * (S_a - E_a)``, so every update is zero-sum. With ``sep_weighted`` the
K of a match is rescaled by a logistic function of the instance's
separability: instances above the threshold ``T`` move ratings more,
instances below it move them less, and an instance exactly at ``T`` uses
the plain K.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from sepkit.errors import ConfigError, ValidationError
from sepkit.rng import derive_seed

WIN, TIE, LOSS = 1.0, 0.5, 0.0
OUTCOMES = (WIN, TIE, LOSS)


@dataclass(frozen=True)
class EloConfig:
    base_k: float = 4.0
    initial_rating: float = 1000.0
    sep_weighted: bool = False
    T: float = 0.4
    alpha: float = 2.0
    beta: float = 6.0
    scale: float = 400.0
    base: float = 10.0

    def __post_init__(self) -> None:
        if self.base_k <= 0 or self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("base_k, alpha and beta must be positive")
        if not 0.0 <= self.T <= 1.0:
            raise ConfigError(f"T must lie in [0, 1], got {self.T}")
        if self.scale <= 0 or self.base <= 1:
            raise ConfigError("scale must be positive and base greater than 1")


@dataclass(frozen=True)
class Match:
    instance_id: str
    model_a: str
    model_b: str
    outcome: float
    delta: float | None = None

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValidationError(f"match outcome must be 1, 0.5 or 0, got {self.outcome!r}")
        if self.model_a == self.model_b:
            raise ValidationError(f"match on {self.instance_id} pits {self.model_a} against itself")
        if self.delta is not None and not -1.0 <= self.delta <= 1.0:
            raise ValidationError(f"match delta {self.delta!r} outside [-1, 1]")


def rating_to_outcome(rating: int) -> float:
    """Map a single preference rating to model_a's match score."""
    return {-1: WIN, 0: TIE, 1: LOSS}[rating]


@dataclass(frozen=True)
class HistoryEntry:
    match_index: int
    model: str
    old: float
    new: float


@dataclass
class EloTable:
    ratings: dict[str, float] = field(default_factory=dict)
    history: list[HistoryEntry] = field(default_factory=list)
    ci: dict[str, tuple[float, float]] | None = None

    def ensure(self, model: str, config: EloConfig) -> None:
        self.ratings.setdefault(model, config.initial_rating)

    def ranking(self) -> list[tuple[str, float]]:
        return sorted(self.ratings.items(), key=lambda kv: (-kv[1], kv[0]))


def expected_score(r_a: float, r_b: float, config: EloConfig = EloConfig()) -> float:
    return 1.0 / (1.0 + config.base ** ((r_b - r_a) / config.scale))


def sep_weight(delta: float, config: EloConfig = EloConfig()) -> float:
    if not -1.0 <= delta <= 1.0:
        raise ValidationError(f"separability {delta!r} outside [-1, 1]")
    return config.base_k * config.alpha / (1.0 + math.exp(-config.beta * (delta - config.T)))


def effective_k(match: Match, config: EloConfig) -> float:
    if not config.sep_weighted:
        return config.base_k
    if match.delta is None:
        raise ValidationError(
            f"separability weighting needs a delta for match on {match.instance_id}"
        )
    return sep_weight(match.delta, config)


def apply_match(table: EloTable, match: Match, config: EloConfig, index: int | None = None) -> EloTable:
    """Apply one match to ``table`` in place and return it."""
    k = effective_k(match, config)
    table.ensure(match.model_a, config)
    table.ensure(match.model_b, config)
    old_a, old_b = table.ratings[match.model_a], table.ratings[match.model_b]
    change = k * (match.outcome - expected_score(old_a, old_b, config))
    new_a, new_b = old_a + change, old_b - change
    table.ratings[match.model_a] = new_a
    table.ratings[match.model_b] = new_b
    if index is None:
        i = table.history[-1].match_index + 1 if table.history else 0
    else:
        i = index
    table.history.append(HistoryEntry(i, match.model_a, old_a, new_a))
    table.history.append(HistoryEntry(i, match.model_b, old_b, new_b))
    return table


def replay(
    matches: Iterable[Match], config: EloConfig, models: Iterable[str] = ()
) -> EloTable:
    """Fold ``apply_match`` over ``matches`` in order, starting from a fresh table."""
    table = EloTable()
    for model in models:
        table.ensure(model, config)
    for i, match in enumerate(matches):
        try:
            apply_match(table, match, config, index=i)
        except ValidationError as exc:
            raise ValidationError(f"match {i}: {exc}") from exc
    return table


def bootstrap_trial(
    pool: Mapping[str, Sequence[Match]],
    config: EloConfig,
    rng: np.random.Generator,
    shuffle: bool = True,
    models: Iterable[str] = (),
) -> EloTable:
    """One resample: one match per instance, optionally in shuffled instance order."""
    instances = sorted(pool)
    picks = [pool[i][int(rng.integers(len(pool[i])))] for i in instances]
    if shuffle:
        picks = [picks[j] for j in rng.permutation(len(picks))]
    return replay(picks, config, models)


def bootstrap_ratings(
    pool: Mapping[str, Sequence[Match]],
    trials: int = 100,
    seed: int = 0,
    config: EloConfig = EloConfig(),
    shuffle: bool = True,
) -> dict[str, list[float]]:
    """Final rating of every model in each bootstrap trial."""
    if trials < 1:
        raise ConfigError(f"bootstrap trials must be >= 1, got {trials}")
    if not pool:
        raise ValidationError("empty rating pool")
    for instance, matches in pool.items():
        if not matches:
            raise ValidationError(f"instance {instance} has no matches")
    models = sorted({m for ms in pool.values() for x in ms for m in (x.model_a, x.model_b)})
    finals: dict[str, list[float]] = {m: [] for m in models}
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, "bootstrap", t))
        table = bootstrap_trial(pool, config, rng, shuffle, models)
        for m in models:
            finals[m].append(table.ratings[m])
    return finals


def percentile_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    tail = 100.0 * (1.0 - level) / 2.0
    return float(np.percentile(values, tail)), float(np.percentile(values, 100.0 - tail))


def bootstrap_ci(
    pool: Mapping[str, Sequence[Match]],
    trials: int = 100,
    seed: int = 0,
    config: EloConfig = EloConfig(),
    shuffle: bool = True,
    level: float = 0.95,
) -> dict[str, tuple[float, float]]:
    """Percentile confidence intervals of final ratings over bootstrap trials."""
    finals = bootstrap_ratings(pool, trials, seed, config, shuffle)
    return {m: percentile_ci(v, level) for m, v in finals.items()}


def bootstrap_table(
    pool: Mapping[str, Sequence[Match]],
    trials: int = 100,
    seed: int = 0,
    config: EloConfig = EloConfig(),
    shuffle: bool = True,
    level: float = 0.95,
) -> EloTable:
    """Leaderboard table: mean bootstrap rating per model with its percentile CI."""
    finals = bootstrap_ratings(pool, trials, seed, config, shuffle)
    return EloTable(
        ratings={m: float(np.mean(v)) for m, v in finals.items()},
        ci={m: percentile_ci(v, level) for m, v in finals.items()},
    )


def pool_by_instance(matches: Iterable[Match]) -> dict[str, list[Match]]:
    pool: dict[str, list[Match]] = {}
    for match in matches:
        pool.setdefault(match.instance_id, []).append(match)
    return pool


@dataclass(frozen=True)
class GapRow:
    model_a: str
    model_b: str
    gap_vanilla: float
    gap_sep: float
    narrowing: float


def compare_tables(vanilla: EloTable, sep: EloTable) -> list[GapRow]:
    """Per model pair: |vanilla gap| - |sep gap|; positive means sep narrowed it."""
    if set(vanilla.ratings) != set(sep.ratings):
        raise ValidationError(
            f"tables rate different models: {sorted(vanilla.ratings)} vs {sorted(sep.ratings)}"
        )
    rows = []
    for a, b in combinations(sorted(vanilla.ratings), 2):
        gv = vanilla.ratings[a] - vanilla.ratings[b]
        gs = sep.ratings[a] - sep.ratings[b]
        rows.append(GapRow(a, b, gv, gs, abs(gv) - abs(gs)))
    return rows
