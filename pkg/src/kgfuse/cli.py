"""Command-line entry point.

Each subcommand is one pipeline stage; flags override the config file.
Example::

    kgfuse all -c run.cfg --out results/
    kgfuse filter -c run.cfg --threshold 0.2 --relations /people/person/nationality
"""

from __future__ import annotations

import argparse
import logging
import sys

from .interchange import write_sentence_pairs_tsv
from .pipeline import PipelineError, RunConfig, run_stage
from .rules import drop_constant_rules, load_rules
from .sentences import load_lexicon, load_relation_meta, sentence_pairs


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="key = value config file")
    parser.add_argument("--out", help="output directory for stage artifacts")
    parser.add_argument("--train", help="train triples TSV")
    parser.add_argument("--valid", help="validation triples TSV")
    parser.add_argument("--test", help="test triples TSV")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgfuse",
        description="rule/neural fusion pipeline for knowledge-graph completion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load splits, dump vocabulary and stats")
    _add_common(p)

    p = sub.add_parser("filter", help="drop constant rules and NLI-gate the rest")
    _add_common(p)
    p.add_argument("--rules", help="rule file (4-column TSV)")
    p.add_argument("--nli", help="NLI score table (rule_id TSV)")
    p.add_argument("--nli-endpoint", dest="nli_endpoint", help="HTTP scorer service URL")
    p.add_argument("--gamma", type=float, help="weight of confidence*neutral")
    p.add_argument("--threshold", type=float, help="keep rules with final score above this")
    p.add_argument("--relations", help="comma-separated relations to gate (default: none)")
    p.add_argument("--meta", help="relation metadata JSON (for --nli-endpoint)")
    p.add_argument("--lexicon", help="placeholder lexicon JSON (for --nli-endpoint)")
    p.add_argument("--skip-bad-rules", dest="skip_bad_rules", action="store_const", const=True)

    p = sub.add_parser("answer", help="logical candidates for every query")
    _add_common(p)
    p.add_argument("--rules", help="rule file (filtered artifact used when present)")
    p.add_argument("--queries", help="query triples TSV (default: the test file)")
    p.add_argument(
        "--mask-direct-edges", dest="mask_direct_edges", action="store_const", const=True,
        help="hide each query's own train edges while grounding (training exports)",
    )
    p.add_argument("--skip-bad-rules", dest="skip_bad_rules", action="store_const", const=True)

    p = sub.add_parser("fuse", help="combine neural and logical candidates")
    _add_common(p)
    p.add_argument("--neural", help="neural score JSON-lines for the query set")
    p.add_argument("--logical", help="logical score JSON-lines (default: answer artifact)")
    p.add_argument("--flags", help="per-relation flag TSV")
    p.add_argument("--tune", action="store_const", const=True,
                   help="tune flags on validation data instead of reading --flags")
    p.add_argument("--neural-valid", dest="neural_valid", help="neural scores for validation queries")
    p.add_argument("--rules", help="rule file (used when tuning has to ground validation queries)")
    p.add_argument("--top-logical", dest="top_logical", type=int,
                   help="truncate logical candidates to the best N before fusing (0 = all)")

    p = sub.add_parser("evaluate", help="filtered Hits@N / MRR report")
    _add_common(p)
    p.add_argument("--ranking", help="ranking JSON-lines (default: fuse artifact)")
    p.add_argument("--queries", help="query triples TSV (default: the test file)")

    p = sub.add_parser("explain", help="natural-language explanations for top answers")
    _add_common(p)
    p.add_argument("--ranking", help="ranking JSON-lines (default: fuse artifact)")
    p.add_argument("--rules", help="rule file (filtered artifact used when present)")
    p.add_argument("--meta", help="relation metadata JSON")
    p.add_argument("--lexicon", help="placeholder lexicon JSON")
    p.add_argument("--labels", help="optional entity label TSV")
    p.add_argument("--explain-top", dest="explain_top", type=int,
                   help="how many answers per query to explain")

    p = sub.add_parser("all", help="run every stage in order")
    _add_common(p)
    for flag, kwargs in (
        ("--rules", {}),
        ("--nli", {}),
        ("--gamma", {"type": float}),
        ("--threshold", {"type": float}),
        ("--relations", {}),
        ("--neural", {}),
        ("--neural-valid", {"dest": "neural_valid"}),
        ("--flags", {}),
        ("--tune", {"action": "store_const", "const": True}),
        ("--meta", {}),
        ("--lexicon", {}),
        ("--labels", {}),
        ("--queries", {}),
        ("--top-logical", {"dest": "top_logical", "type": int}),
        ("--explain-top", {"dest": "explain_top", "type": int}),
        ("--skip-bad-rules", {"dest": "skip_bad_rules", "action": "store_const", "const": True}),
    ):
        p.add_argument(flag, **kwargs)

    p = sub.add_parser("sentences", help="export premise/hypothesis pairs for a rule file")
    _add_common(p)
    p.add_argument("--rules", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("-o", "--output", required=True, help="sentence-pair TSV to write")
    p.add_argument("--skip-bad-rules", dest="skip_bad_rules", action="store_const", const=True)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    skip = {"command", "config", "verbose", "output"}
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in skip and value is not None
    }
    return config.with_overrides(overrides)


def _export_sentences(config: RunConfig, output: str) -> int:
    from .kg import load_kg

    kg = load_kg(config.train, config.valid, config.test)
    rules = load_rules(
        config.rules, kg.vocab, on_error="skip" if config.skip_bad_rules else "raise"
    )
    meta, missing = load_relation_meta(config.meta, kg.vocab)
    if missing:
        logging.getLogger(__name__).warning(
            "no sentence metadata for %d relations", len(missing)
        )
    lexicon = load_lexicon(config.lexicon)
    pairs, failures = sentence_pairs(drop_constant_rules(rules), meta, lexicon)
    write_sentence_pairs_tsv(output, pairs)
    for rule_id, reason in failures:
        logging.getLogger(__name__).warning("rule %d not converted: %s", rule_id, reason)
    print(f"wrote {len(pairs)} sentence pairs to {output} ({len(failures)} failures)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _config_from_args(args)
        if args.command == "sentences":
            return _export_sentences(config, args.output)
        run_stage(config, args.command)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
