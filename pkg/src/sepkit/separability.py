"""Per-instance separability and dataset-level separability distributions.

Separability of an instance for a model pair is the larger of the two
normalized self-alignments minus the normalized cross-alignment. Raw
alignments are pooled over the whole run before min-max normalization, so
deltas are only comparable within one (model pair, metric, dataset) run.
"""

from __future__ import annotations

import bisect
import statistics
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from sepkit.alignment import estimate_cross_alignment, estimate_self_alignment, min_max_normalize
from sepkit.corpus import GenerationSet
from sepkit.errors import ValidationError

OBSERVED = "observed"
UNIT = "unit"
RANGE_MODES = (OBSERVED, UNIT)


@dataclass(frozen=True)
class SeparabilityRecord:
    instance_id: str
    model_a: str
    model_b: str
    metric: str
    self_a: float
    self_b: float
    cross: float
    self_a_n: float | None = None
    self_b_n: float | None = None
    cross_n: float | None = None
    delta: float | None = None
    norm_min: float | None = None
    norm_max: float | None = None
    degenerate_norm: bool = False

    @property
    def finalized(self) -> bool:
        return self.delta is not None

    @property
    def pair(self) -> tuple[str, str]:
        return (self.model_a, self.model_b)


def separability(self_a_n: float, self_b_n: float, cross_n: float) -> float:
    for name, v in (("self_a_n", self_a_n), ("self_b_n", self_b_n), ("cross_n", cross_n)):
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name}={v!r} is outside [0, 1]; normalize alignments first")
    return max(self_a_n, self_b_n) - cross_n


def compute_instance(
    set_a: GenerationSet,
    set_b: GenerationSet,
    metric: str,
    c: int | None = None,
    seed: int | None = None,
) -> SeparabilityRecord:
    """Raw self/cross alignments for one instance; normalization happens in finalize_run."""
    if set_a.instance_id != set_b.instance_id:
        raise ValidationError(
            f"instance mismatch: {set_a.instance_id!r} vs {set_b.instance_id!r}"
        )
    self_a = estimate_self_alignment(set_a, metric, seed)
    self_b = estimate_self_alignment(set_b, metric, seed)
    cross = estimate_cross_alignment(set_a, set_b, metric, c, seed)
    return SeparabilityRecord(
        instance_id=set_a.instance_id,
        model_a=set_a.model_id,
        model_b=set_b.model_id,
        metric=metric,
        self_a=self_a.raw_value,
        self_b=self_b.raw_value,
        cross=cross.raw_value,
    )


def finalize_run(records: Sequence[SeparabilityRecord]) -> list[SeparabilityRecord]:
    """Normalize all raw alignments of a run jointly and fill in the deltas."""
    if not records:
        raise ValidationError("no instances to finalize")
    config = (records[0].model_a, records[0].model_b, records[0].metric)
    for rec in records:
        if (rec.model_a, rec.model_b, rec.metric) != config:
            raise ValidationError(
                f"mixed run configurations: {config} and "
                f"{(rec.model_a, rec.model_b, rec.metric)} (instance {rec.instance_id})"
            )
    raw: list[float] = []
    labels: list[str] = []
    for rec in records:
        raw.extend((rec.self_a, rec.self_b, rec.cross))
        labels.extend(f"{rec.instance_id}:{f}" for f in ("self_a", "self_b", "cross"))
    norm = min_max_normalize(raw, labels)
    out = []
    for i, rec in enumerate(records):
        sa, sb, cr = norm.values[3 * i : 3 * i + 3]
        delta = 0.0 if norm.degenerate else separability(sa, sb, cr)
        out.append(
            replace(
                rec,
                self_a_n=sa,
                self_b_n=sb,
                cross_n=cr,
                delta=delta,
                norm_min=norm.min,
                norm_max=norm.max,
                degenerate_norm=norm.degenerate,
            )
        )
    return out


def _deltas(records) -> list[float]:
    out = []
    for rec in records:
        if isinstance(rec, SeparabilityRecord):
            if rec.delta is None:
                raise ValidationError(f"record {rec.instance_id} is not finalized")
            out.append(rec.delta)
        else:
            out.append(float(rec))
    return out


def make_bins(values: Sequence[float], bin_count: int, range_mode: str = OBSERVED) -> list[tuple[float, float]]:
    """Contiguous equal-width bins over the observed support or over [0, 1].

    A zero-width observed support is widened to [v - 0.5, v + 0.5].
    """
    if bin_count < 1:
        raise ValidationError(f"bin_count must be >= 1, got {bin_count}")
    if range_mode == UNIT:
        lo, hi = 0.0, 1.0
    elif range_mode == OBSERVED:
        if not values:
            raise ValidationError("cannot derive an observed range from no values")
        lo, hi = min(values), max(values)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        raise ValidationError(f"range_mode must be one of {RANGE_MODES}, got {range_mode!r}")
    edges = np.linspace(lo, hi, bin_count + 1)
    edges[0], edges[-1] = lo, hi
    return [(float(edges[i]), float(edges[i + 1])) for i in range(bin_count)]


def bin_assign(delta: float, bins: Sequence[tuple[float, float]]) -> int:
    """Index of the half-open bin [lo, hi) holding ``delta``; the last bin is closed."""
    if not bins:
        raise ValidationError("no bins")
    lo, hi = bins[0][0], bins[-1][1]
    if not lo <= delta <= hi:
        raise ValidationError(f"value {delta!r} outside binned range [{lo}, {hi}]")
    uppers = [b[1] for b in bins[:-1]]
    return bisect.bisect_right(uppers, delta)


@dataclass(frozen=True)
class DistributionSummary:
    count: int
    mean: float
    variance: float
    histogram: list[tuple[float, float, int]]
    bin_count: int
    range_mode: str = OBSERVED


def distribution_stats(records, bin_count: int = 4, range_mode: str = OBSERVED) -> DistributionSummary:
    """Count, mean, population variance and an equal-width histogram of deltas.

    ``records`` may be finalized SeparabilityRecords or plain delta values.
    """
    deltas = _deltas(records)
    if not deltas:
        raise ValidationError("no instances")
    bins = make_bins(deltas, bin_count, range_mode)
    counts = [0] * len(bins)
    for d in deltas:
        counts[bin_assign(d, bins)] += 1
    # exact rational arithmetic: equal deltas give exactly zero variance
    mean = statistics.mean(deltas)
    variance = statistics.pvariance(deltas)
    return DistributionSummary(
        count=len(deltas),
        mean=mean,
        variance=variance,
        histogram=[(lo, hi, n) for (lo, hi), n in zip(bins, counts)],
        bin_count=len(bins),
        range_mode=range_mode,
    )
