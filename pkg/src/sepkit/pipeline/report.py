"""Report files: distribution summaries, binned tables, text histograms, leaderboards."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Any

from sepkit.errors import ValidationError
from sepkit.ratings import BinRow, ConsistencyRecord, binned_consistency, binned_preference_strength
from sepkit.separability import OBSERVED, DistributionSummary, SeparabilityRecord, distribution_stats

from .io import Leaderboard, leaderboard_dict, write_json, write_separability

BAR_WIDTH = 40
FORMATS = ("jsonl", "json", "text")


def summary_dict(summary: DistributionSummary) -> dict[str, Any]:
    return {
        "count": summary.count,
        "mean": summary.mean,
        "variance": summary.variance,
        "bin_count": summary.bin_count,
        "range_mode": summary.range_mode,
        "histogram": [{"lo": lo, "hi": hi, "count": n} for lo, hi, n in summary.histogram],
    }


def bin_rows_dict(rows: Sequence[BinRow]) -> list[dict[str, Any]]:
    return [
        {
            "bin": r.bin,
            "lo": r.lo,
            "hi": r.hi,
            "support": r.support,
            "mean": r.mean,
            "proportions": [{"value": v, "proportion": p} for v, p in r.proportions.items()],
        }
        for r in rows
    ]


def render_histogram(summary: DistributionSummary, width: int = BAR_WIDTH, title: str = "separability") -> str:
    """Fixed-width bar rows; bar length is proportional to the bin count."""
    peak = max((n for _, _, n in summary.histogram), default=0)
    lines = [f"{title}: n={summary.count} mean={summary.mean:.4f} var={summary.variance:.4f}"]
    last = len(summary.histogram) - 1
    for i, (lo, hi, n) in enumerate(summary.histogram):
        bar = "#" * (round(width * n / peak) if peak else 0)
        close = "]" if i == last else ")"
        lines.append(f"[{lo:+.3f}, {hi:+.3f}{close} {n:6d} |{bar}")
    return "\n".join(lines) + "\n"


def render_bin_table(rows: Sequence[BinRow], title: str) -> str:
    values = sorted({v for r in rows for v in r.proportions})
    header = ["bin", "range", "n", "mean"] + [f"{v:g}" for v in values]
    body = []
    last = len(rows) - 1
    for r in rows:
        close = "]" if r.bin == last else ")"
        cells = [
            str(r.bin),
            f"[{r.lo:.3f}, {r.hi:.3f}{close}",
            str(r.support),
            "-" if r.mean is None else f"{r.mean:.3f}",
        ]
        cells += [f"{r.proportions.get(v, 0.0):.3f}" for v in values]
        body.append(cells)
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    lines = [title, fmt.format(*header)] + [fmt.format(*row) for row in body]
    return "\n".join(lines) + "\n"


def render_leaderboard(board: Leaderboard) -> str:
    lines = []
    for name, entries in leaderboard_dict(board)["tables"].items():
        lines.append(f"{name} ELO")
        for e in entries:
            ci = f"  [{e['ci'][0]:.2f}, {e['ci'][1]:.2f}]" if "ci" in e else ""
            lines.append(f"  {e['rank']:>3}. {e['model']:<24} {e['rating']:9.2f}{ci}")
    for g in board.gaps:
        lines.append(
            f"gap {g.model_a} - {g.model_b}: vanilla {g.gap_vanilla:+.2f}, "
            f"sep {g.gap_sep:+.2f}, narrowing {g.narrowing:+.2f}"
        )
    return "\n".join(lines) + "\n"


def write_report(
    out_dir: str | Path,
    records: Sequence[SeparabilityRecord],
    consistency: Sequence[ConsistencyRecord] | None = None,
    leaderboard: Leaderboard | None = None,
    bin_count: int = 4,
    range_mode: str = OBSERVED,
    formats: Sequence[str] = FORMATS,
) -> list[Path]:
    """Write every report artifact into ``out_dir`` and return the paths written."""
    if not records:
        raise ValidationError("no instances")
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValidationError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    summary = distribution_stats(records, bin_count, range_mode)
    tables: dict[str, list[BinRow]] = {}
    if consistency:
        for aggregate in (False, True):
            suffix = "_by_instance" if aggregate else "_by_rating_set"
            tables["consistency" + suffix] = binned_consistency(
                consistency, records, bin_count, range_mode, aggregate
            )
            tables["preference_strength" + suffix] = binned_preference_strength(
                consistency, records, bin_count, range_mode, aggregate
            )

    if "jsonl" in formats:
        path = out / "separability.jsonl"
        write_separability(path, records)
        written.append(path)
    if "json" in formats:
        path = out / "distribution.json"
        first = records[0]
        write_json(
            path,
            {
                "model_a": first.model_a,
                "model_b": first.model_b,
                "metric": first.metric,
                "summary": summary_dict(summary),
                "binned": {name: bin_rows_dict(rows) for name, rows in tables.items()},
            },
        )
        written.append(path)
        if leaderboard is not None:
            path = out / "leaderboard.json"
            write_json(path, leaderboard_dict(leaderboard))
            written.append(path)
    if "text" in formats:
        parts = [render_histogram(summary)]
        for name, rows in tables.items():
            parts.append(render_bin_table(rows, name))
        if leaderboard is not None:
            parts.append(render_leaderboard(leaderboard))
        path = out / "report.txt"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(parts))
        written.append(path)
    return written

