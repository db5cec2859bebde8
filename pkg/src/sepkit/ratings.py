"""Preference rating sets, their consistency and preference strength.

A rating is -1 (model_a preferred), +1 (model_b preferred) or 0 (no
preference). A rating set that prefers both models at least once has
consistency 0; otherwise consistency is the mean absolute rating, so an
all-tie set also scores 0.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from sepkit.errors import ValidationError
from sepkit.separability import OBSERVED, SeparabilityRecord, bin_assign, make_bins

ALPHABET = (-1, 0, 1)
HUMAN = "human"
AUTO = "auto"


@dataclass(frozen=True)
class RatingSet:
    instance_id: str
    rater_id: str
    model_a: str
    model_b: str
    ratings: tuple[int, ...]
    rater_kind: str = HUMAN

    def __post_init__(self) -> None:
        object.__setattr__(self, "ratings", tuple(self.ratings))
        _check_ratings(self.ratings, f"{self.instance_id}/{self.rater_id}")

    @property
    def pair(self) -> tuple[str, str]:
        return (self.model_a, self.model_b)


@dataclass(frozen=True)
class ConsistencyRecord:
    instance_id: str
    rater_id: str
    model_a: str
    model_b: str
    consistency: float
    preference_strength: float
    delta: float | None = None
    rater_kind: str = HUMAN


def _check_ratings(ratings: Sequence[int], where: str = "rating set") -> None:
    if len(ratings) == 0:
        raise ValidationError(f"{where}: empty rating set")
    for r in ratings:
        if isinstance(r, bool) or r not in ALPHABET:
            raise ValidationError(f"{where}: rating {r!r} is not one of -1, 0, 1")


def _values(rs: RatingSet | Sequence[int]) -> tuple[int, ...]:
    ratings = rs.ratings if isinstance(rs, RatingSet) else tuple(rs)
    _check_ratings(ratings)
    return ratings


def consistency(rs: RatingSet | Sequence[int]) -> float:
    ratings = _values(rs)
    if -1 in ratings and 1 in ratings:
        return 0.0
    return sum(abs(r) for r in ratings) / len(ratings)


def preference_strength(rs: RatingSet | Sequence[int]) -> float:
    ratings = _values(rs)
    return sum(ratings) / len(ratings)


def consistency_record(rs: RatingSet, delta: float | None = None) -> ConsistencyRecord:
    return ConsistencyRecord(
        instance_id=rs.instance_id,
        rater_id=rs.rater_id,
        model_a=rs.model_a,
        model_b=rs.model_b,
        consistency=consistency(rs),
        preference_strength=preference_strength(rs),
        delta=delta,
        rater_kind=rs.rater_kind,
    )


def aggregate_instance(records: Sequence[ConsistencyRecord]) -> float:
    """Unweighted mean of per-rater consistency on one instance."""
    if not records:
        raise ValidationError("no consistency records to aggregate")
    ids = {r.instance_id for r in records}
    if len(ids) > 1:
        raise ValidationError(f"mixed instance ids: {sorted(ids)}")
    return math.fsum(r.consistency for r in records) / len(records)


@dataclass
class BinRow:
    bin: int
    lo: float
    hi: float
    support: int
    mean: float | None
    proportions: dict[float, float] = field(default_factory=dict)


def _join(
    consistency_records: Iterable[ConsistencyRecord],
    separability_records: Iterable[SeparabilityRecord],
) -> list[tuple[ConsistencyRecord, float]]:
    deltas = {}
    for rec in separability_records:
        if rec.delta is None:
            raise ValidationError(f"separability record {rec.instance_id} is not finalized")
        deltas[(rec.instance_id, rec.model_a, rec.model_b)] = rec.delta
    joined, orphans = [], []
    for rec in consistency_records:
        key = (rec.instance_id, rec.model_a, rec.model_b)
        if key not in deltas:
            orphans.append(rec.instance_id)
        else:
            joined.append((rec, deltas[key]))
    if orphans:
        raise ValidationError(
            "rating sets without a separability record: " + ", ".join(sorted(set(orphans)))
        )
    return joined


def _lattice_key(v: float) -> float:
    # k / N means differ by representation noise only; group on a rounded key
    return round(v, 9) + 0.0


def _binned(
    rows: list[tuple[float, float]],
    support_deltas: Sequence[float],
    bin_count: int,
    range_mode: str,
) -> list[BinRow]:
    bins = make_bins(list(support_deltas), bin_count, range_mode)
    grouped: dict[int, list[float]] = defaultdict(list)
    for value, delta in rows:
        grouped[bin_assign(delta, bins)].append(value)
    table = []
    for i, (lo, hi) in enumerate(bins):
        vals = grouped.get(i, [])
        tally = Counter(_lattice_key(v) for v in vals)
        table.append(
            BinRow(
                bin=i,
                lo=lo,
                hi=hi,
                support=len(vals),
                mean=math.fsum(vals) / len(vals) if vals else None,
                proportions={v: n / len(vals) for v, n in sorted(tally.items())},
            )
        )
    return table


def _rows(consistency_records, separability_records, attr: str, aggregate: bool):
    joined = _join(consistency_records, separability_records)
    support = [rec.delta for rec in separability_records]
    if not aggregate:
        return [(getattr(rec, attr), delta) for rec, delta in joined], support
    per_instance: dict[tuple, list[float]] = defaultdict(list)
    delta_of = {}
    for rec, delta in joined:
        key = (rec.instance_id, rec.model_a, rec.model_b)
        per_instance[key].append(getattr(rec, attr))
        delta_of[key] = delta
    rows = [
        (math.fsum(vals) / len(vals), delta_of[key]) for key, vals in sorted(per_instance.items())
    ]
    return rows, support


def binned_consistency(
    consistency_records: Sequence[ConsistencyRecord],
    separability_records: Sequence[SeparabilityRecord],
    bin_count: int = 4,
    range_mode: str = OBSERVED,
    aggregate: bool = False,
) -> list[BinRow]:
    """Distribution and mean of consistency per separability bin.

    With ``aggregate`` each instance contributes the mean over its raters;
    otherwise every rating set is counted on its own. In observed mode the
    bins span the deltas of ``separability_records``.
    """
    rows, support = _rows(consistency_records, separability_records, "consistency", aggregate)
    return _binned(rows, support, bin_count, range_mode)


def binned_preference_strength(
    consistency_records: Sequence[ConsistencyRecord],
    separability_records: Sequence[SeparabilityRecord],
    bin_count: int = 4,
    range_mode: str = OBSERVED,
    aggregate: bool = False,
) -> list[BinRow]:
    rows, support = _rows(
        consistency_records, separability_records, "preference_strength", aggregate
    )
    return _binned(rows, support, bin_count, range_mode)
