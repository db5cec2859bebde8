"""Choose instances for annotation using their separability."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Sequence

import numpy as np

from sepkit.errors import ConfigError, ValidationError
from sepkit.separability import OBSERVED, SeparabilityRecord, bin_assign, make_bins

WEIGHTED = "weighted"
STRATIFIED = "stratified"
TOP = "top"
MODES = (WEIGHTED, STRATIFIED, TOP)

EPSILON = 1e-6


def _check(records: Sequence[SeparabilityRecord], n: int) -> None:
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    if n > len(records):
        raise ConfigError(f"cannot select {n} of {len(records)} instances")
    for rec in records:
        if rec.delta is None:
            raise ValidationError(f"record {rec.instance_id} is not finalized")


def select_top(records: Sequence[SeparabilityRecord], n: int) -> list[str]:
    ranked = sorted(records, key=lambda r: (-r.delta, r.instance_id))
    return [r.instance_id for r in ranked[:n]]


def select_weighted(records: Sequence[SeparabilityRecord], n: int, rng: np.random.Generator) -> list[str]:
    """Draw without replacement with probability proportional to max(delta, 1e-6)."""
    if all(r.delta <= 0 for r in records):
        raise ValidationError(
            "every separability is <= 0, so weighted selection is uniform noise; use stratified mode"
        )
    ordered = sorted(records, key=lambda r: r.instance_id)
    weights = np.array([max(r.delta, EPSILON) for r in ordered])
    picks = rng.choice(len(ordered), size=n, replace=False, p=weights / weights.sum())
    return [ordered[int(i)].instance_id for i in picks]


def select_stratified(
    records: Sequence[SeparabilityRecord],
    n: int,
    rng: np.random.Generator,
    bin_count: int = 4,
    range_mode: str = OBSERVED,
) -> list[str]:
    """Equal quotas per occupied bin, remainder to the highest bins.

    A bin too small for its quota gives the shortfall to the other bins,
    highest first.
    """
    bins = make_bins([r.delta for r in records], bin_count, range_mode)
    members: dict[int, list[str]] = defaultdict(list)
    for rec in sorted(records, key=lambda r: r.instance_id):
        members[bin_assign(rec.delta, bins)].append(rec.instance_id)
    occupied = sorted(members)
    quota = {b: 0 for b in occupied}
    remaining = n
    while remaining > 0:
        open_bins = [b for b in occupied if quota[b] < len(members[b])]
        share, extra = divmod(remaining, len(open_bins))
        for b in open_bins:
            quota[b] += share
        for b in sorted(open_bins, reverse=True)[:extra]:
            quota[b] += 1
        remaining = 0
        for b in open_bins:
            over = quota[b] - len(members[b])
            if over > 0:
                quota[b] -= over
                remaining += over
    out = []
    for b in occupied:
        if quota[b]:
            picks = rng.choice(len(members[b]), size=quota[b], replace=False)
            out.extend(members[b][int(i)] for i in picks)
    return out


def select_instances(
    records: Sequence[SeparabilityRecord],
    mode: str,
    n: int,
    seed: int = 0,
    bin_count: int = 4,
    range_mode: str = OBSERVED,
) -> list[str]:
    _check(records, n)
    rng = np.random.default_rng(seed)
    if mode == TOP:
        return select_top(records, n)
    if mode == WEIGHTED:
        return select_weighted(records, n, rng)
    if mode == STRATIFIED:
        return select_stratified(records, n, rng, bin_count, range_mode)
    raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
