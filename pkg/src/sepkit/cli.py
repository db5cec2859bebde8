"""Command-line entry point: ``sepkit <command> [options]``.

Exit codes: 0 success, 1 validation error, 2 partial sampling failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from sepkit.elo import bootstrap_table, compare_tables, pool_by_instance
from sepkit.errors import ConfigError, SepkitError, ValidationError
from sepkit.pipeline import io
from sepkit.pipeline.report import render_bin_table, write_report
from sepkit.pipeline.run import (
    RunConfig,
    attach_deltas,
    compute_alignments,
    compute_separability,
    consistency_records,
    matches_from_ratings,
    resolve_pair,
)
from sepkit.pipeline.sampler import PROMPT_PRESETS, SamplerEndpoint, sample_generations
from sepkit.pipeline.selection import MODES, select_instances
from sepkit.ratings import binned_consistency, binned_preference_strength
from sepkit.rng import derive_seed
from sepkit.separability import RANGE_MODES
from sepkit.textsim import ENTITY_JACCARD, METRICS

log = logging.getLogger("sepkit")

EXIT_OK, EXIT_VALIDATION, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    g.add_argument("--seed", type=int)
    g.add_argument("--metric", choices=sorted(METRICS))
    g.add_argument("--k", type=int, help="samples per model and instance")
    g.add_argument("--temperature", type=float)
    g.add_argument("--c", type=int, help="cross-alignment comparisons (default k*k)")
    g.add_argument("--bins", type=int, dest="bin_count")
    g.add_argument("--bin-range", choices=RANGE_MODES, dest="bin_range_mode")
    g.add_argument("--workers", type=int)
    g.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _elo_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ELO")
    g.add_argument("--sep-weighted", action="store_true", default=None,
                   help="also compute the separability-weighted table (needs --separability)")
    g.add_argument("--T", type=float, dest="T")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--base-k", type=float, dest="base_k")
    g.add_argument("--initial-rating", type=float, dest="initial_rating")
    g.add_argument("--bootstrap-trials", type=int, dest="bootstrap_trials")
    g.add_argument("--no-shuffle", action="store_true",
                   help="keep instance order fixed in bootstrap trials")


def _corpus_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--generations", type=Path, required=True)
    p.add_argument("--embeddings", type=Path)
    p.add_argument("--entities", type=Path)
    p.add_argument("--model-a")
    p.add_argument("--model-b")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="sepkit", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample generations from a chat-completions endpoint")
    p.add_argument("--instances", type=Path, required=True, help="JSONL rows {instance_id, prompt}")
    p.add_argument("--endpoint-config", type=Path, help="JSON with SamplerEndpoint fields")
    p.add_argument("--base-url")
    p.add_argument("--model", dest="model_name")
    p.add_argument("--model-id", help="label written to generation rows (default: --model)")
    p.add_argument("--api-key-env", dest="api_key_env_var")
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-retries", type=int)
    p.add_argument("--max-parallel", type=int)
    p.add_argument("--min-interval", type=float, help="seconds between request starts")
    p.add_argument("--system-prompt")
    p.add_argument("--one-call-per-sample", action="store_true", default=None)
    p.add_argument("--preset", choices=sorted(PROMPT_PRESETS))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--errors", type=Path, help="error rows (default: <out>.errors.jsonl)")

    p = sub.add_parser("align", parents=[common], help="raw self/cross alignment estimates")
    _corpus_inputs(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("sep", parents=[common], help="per-instance separability records")
    _corpus_inputs(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("consistency", parents=[common], help="rating consistency and binned tables")
    p.add_argument("--ratings", type=Path, required=True)
    p.add_argument("--separability", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="consistency records JSONL")
    p.add_argument("--tables", type=Path, help="binned tables JSON")

    p = sub.add_parser("elo", parents=[common], help="ELO and separability-weighted ELO leaderboard")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matches", type=Path)
    src.add_argument("--ratings", type=Path)
    p.add_argument("--separability", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _elo_flags(p)

    p = sub.add_parser("select", parents=[common], help="pick instances for annotation")
    p.add_argument("--separability", type=Path, required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", type=Path, help="write ids here instead of stdout")

    p = sub.add_parser("report", parents=[common], help="distribution, tables, histogram, leaderboard")
    p.add_argument("--separability", type=Path, required=True)
    p.add_argument("--consistency", type=Path)
    p.add_argument("--leaderboard", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--format", action="append", choices=("jsonl", "json", "text"), dest="formats")

    p = sub.add_parser("synth", parents=[common], help="write the synthetic demo corpus")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--instances", type=int, default=40)
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON ({exc.msg})") from None
    for name in ("seed", "metric", "k", "temperature", "c", "bin_count", "bin_range_mode",
                 "workers", "bootstrap_trials"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    elo = dict(data.get("elo", {}))
    for name in ("T", "alpha", "beta", "base_k", "initial_rating"):
        value = getattr(args, name, None)
        if value is not None:
            elo[name] = value
    data["elo"] = elo
    return RunConfig.from_mapping(data)


def _load_corpus(args, config: RunConfig):
    corpus = io.load_generations(args.generations)
    if not corpus:
        raise ValidationError(f"{args.generations}: no instances")
    embeddings = io.load_embeddings(args.embeddings) if args.embeddings else None
    entities = io.load_entities(args.entities) if args.entities else None
    if config.metric == ENTITY_JACCARD and entities is None:
        log.warning("no entities file given; using the capitalized-word fallback extractor")
    return io.attach(corpus, embeddings, entities)


def cmd_sample(args, config: RunConfig) -> int:
    data = {}
    if args.endpoint_config:
        with open(args.endpoint_config, encoding="utf-8") as fh:
            data = json.load(fh)
    for name in ("base_url", "model_name", "model_id", "api_key_env_var", "timeout", "max_retries",
                 "max_parallel", "min_interval", "system_prompt", "one_call_per_sample"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if "base_url" not in data or "model_name" not in data:
        raise ConfigError("sample needs --base-url and --model (or an endpoint config)")
    endpoint = SamplerEndpoint.from_mapping(data)
    instances = []
    for lineno, row in io.iter_jsonl(args.instances):
        if "instance_id" not in row or "prompt" not in row:
            raise ValidationError(f"{args.instances}:{lineno}: need instance_id and prompt")
        instances.append((str(row["instance_id"]), str(row["prompt"])))
    result = sample_generations(endpoint, instances, config.k, config.temperature, args.preset)
    io.write_jsonl(
        args.out, (io.generation_row(g, config.temperature) for g in result.generations)
    )
    errors_path = args.errors or args.out.with_name(args.out.name + ".errors.jsonl")
    if result.errors:
        io.write_jsonl(errors_path, ({"kind": "error", **asdict(e)} for e in result.errors))
        print(f"{len(result.errors)} sample(s) failed; see {errors_path}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_align(args, config: RunConfig) -> int:
    corpus = _load_corpus(args, config)
    a, b = resolve_pair(corpus, args.model_a, args.model_b)
    io.write_alignments(args.out, compute_alignments(corpus, a, b, config))
    return EXIT_OK


def cmd_sep(args, config: RunConfig) -> int:
    corpus = _load_corpus(args, config)
    a, b = resolve_pair(corpus, args.model_a, args.model_b)
    records = compute_separability(corpus, a, b, config)
    io.write_separability(args.out, records)
    return EXIT_OK


def cmd_consistency(args, config: RunConfig) -> int:
    ratings = io.load_ratings(args.ratings)
    if not ratings:
        raise ValidationError(f"{args.ratings}: no rating sets")
    records = io.load_separability(args.separability)
    cons = consistency_records(ratings, records)
    io.write_consistency(args.out, cons)
    tables = {}
    for aggregate in (False, True):
        suffix = "_by_instance" if aggregate else "_by_rating_set"
        tables["consistency" + suffix] = binned_consistency(
            cons, records, config.bin_count, config.bin_range_mode, aggregate
        )
        tables["preference_strength" + suffix] = binned_preference_strength(
            cons, records, config.bin_count, config.bin_range_mode, aggregate
        )
    if args.tables:
        from sepkit.pipeline.report import bin_rows_dict

        io.write_json(args.tables, {name: bin_rows_dict(rows) for name, rows in tables.items()})
    print(render_bin_table(tables["consistency_by_instance"], "mean consistency by separability bin"), end="")
    return EXIT_OK


def cmd_elo(args, config: RunConfig) -> int:
    if args.matches:
        matches = io.load_matches(args.matches)
    else:
        matches = matches_from_ratings(io.load_ratings(args.ratings))
    if not matches:
        raise ValidationError("no matches")
    sep_records = io.load_separability(args.separability) if args.separability else None
    if sep_records is not None:
        matches = attach_deltas(matches, sep_records)
    want_sep = bool(args.sep_weighted) or sep_records is not None
    if args.sep_weighted and sep_records is None and any(m.delta is None for m in matches):
        raise ValidationError("--sep-weighted needs --separability or deltas in the matches file")
    shuffle = not args.no_shuffle
    pool = pool_by_instance(matches)
    vanilla_cfg = replace(config.elo, sep_weighted=False)
    trials = config.bootstrap_trials
    tables = {
        "vanilla": bootstrap_table(pool, trials, derive_seed(config.seed, "bootstrap"), vanilla_cfg, shuffle)
    }
    gaps = []
    elo_cfg = vanilla_cfg
    if want_sep:
        elo_cfg = replace(config.elo, sep_weighted=True)
        tables["sep"] = bootstrap_table(pool, trials, derive_seed(config.seed, "bootstrap"), elo_cfg, shuffle)
        gaps = compare_tables(tables["vanilla"], tables["sep"])
    board = io.Leaderboard(elo_cfg, tables, gaps, config.bootstrap_trials, config.seed)
    io.write_leaderboard(args.out, board)
    from sepkit.pipeline.report import render_leaderboard

    print(render_leaderboard(board), end="")
    return EXIT_OK


def cmd_select(args, config: RunConfig) -> int:
    records = io.load_separability(args.separability)
    if not records:
        raise ValidationError("no instances")
    ids = select_instances(
        records, args.mode, args.n, derive_seed(config.seed, "selection"),
        config.bin_count, config.bin_range_mode,
    )
    text = "".join(f"{i}\n" for i in ids)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args, config: RunConfig) -> int:
    records = io.load_separability(args.separability)
    if not records:
        raise ValidationError("no instances")
    cons = io.load_consistency(args.consistency) if args.consistency else None
    board = io.load_leaderboard(args.leaderboard) if args.leaderboard else None
    formats = tuple(args.formats) if args.formats else ("jsonl", "json", "text")
    paths = write_report(args.out_dir, records, cons, board, config.bin_count, config.bin_range_mode, formats)
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_synth(args, config: RunConfig) -> int:
    from sepkit.synthetic import write_bundle

    for path in write_bundle(args.out_dir, config.seed, args.instances):
        print(path)
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample,
    "align": cmd_align,
    "sep": cmd_sep,
    "consistency": cmd_consistency,
    "elo": cmd_elo,
    "select": cmd_select,
    "report": cmd_report,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = _run_config(args)
        for name in ("out", "tables", "errors"):
            path = getattr(args, name, None)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SepkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
