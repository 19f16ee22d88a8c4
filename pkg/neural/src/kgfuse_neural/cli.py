"""Command-line entry points for training, score export, and NLI scoring."""

from __future__ import annotations

import argparse
import logging
import sys

from .data import load_dataset
from .export import export_split_scores
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .nli import LexicalOverlapScorer, read_sentence_pairs, score_rules, write_nli_tsv
from .sp import read_logical_export
from .train import TrainConfig, train_base, train_fusion


def _add_data_args(parser):
    parser.add_argument("--train", required=True)
    parser.add_argument("--valid")
    parser.add_argument("--test")
    parser.add_argument("--entities", help="vocabulary dump from the rule engine")
    parser.add_argument("--relations", help="relation dump (with inv@ reciprocals)")


def _add_train_args(parser):
    parser.add_argument("--epochs", type=int, default=80)
    parser.add_argument("--batch-size", type=int, default=128)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--label-smoothing", type=float, default=0.1)
    parser.add_argument("--eval-interval", type=int, default=10)
    parser.add_argument("--eval-split", default="test")
    parser.add_argument("--dim", type=int, default=200)
    parser.add_argument("--reshape", default="10x20", help="rows x cols, multiplies to dim")
    parser.add_argument("--channels", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--curve", help="training-curve CSV to write")
    parser.add_argument("--checkpoint", required=True, help="model file to write")


def _configs(args, num_entities, num_relations, use_sp):
    rows, _, cols = args.reshape.partition("x")
    model_config = ModelConfig(
        num_entities=num_entities,
        num_relations=num_relations,
        dim=args.dim,
        reshape=(int(rows), int(cols)),
        channels=args.channels,
        use_sp=use_sp,
    )
    train_config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        label_smoothing=args.label_smoothing,
        eval_interval=args.eval_interval,
        eval_split=args.eval_split,
        seed=args.seed,
    )
    return model_config, train_config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kgfuse-neural")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-base", help="train the plain entity scorer")
    _add_data_args(p)
    _add_train_args(p)

    p = sub.add_parser("train-fusion", help="train the scorer with the logical plane")
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--logical", required=True,
                   help="logical score JSON-lines for the training queries "
                        "(export them with `kgfuse answer --mask-direct-edges`)")

    p = sub.add_parser("export-scores", help="dump top-k entity scores per query")
    _add_data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--logical", help="logical export (fusion checkpoints only)")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("score-nli", help="score rule sentence pairs")
    p.add_argument("--pairs", required=True, help="rule_id<TAB>premise<TAB>hypothesis")
    p.add_argument("--model", help="transformers checkpoint; lexical stub when omitted")
    p.add_argument("-o", "--output", required=True)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "score-nli":
        if args.model:
            from .nli import TransformersNliScorer

            scorer = TransformersNliScorer(args.model)
        else:
            scorer = LexicalOverlapScorer()
        table, skipped = score_rules(read_sentence_pairs(args.pairs), scorer)
        write_nli_tsv(args.output, table)
        print(f"scored {len(table)} rules ({len(skipped)} skipped) -> {args.output}")
        return 0

    data = load_dataset(args.train, args.valid, args.test, args.entities, args.relations)

    if args.command == "export-scores":
        model = load_checkpoint(args.checkpoint)
        logical = read_logical_export(args.logical) if args.logical else None
        count = export_split_scores(model, data, args.split, args.output,
                                    k=min(args.k, data.vocab.num_entities),
                                    logical_export=logical)
        print(f"exported {count} queries -> {args.output}")
        return 0

    use_sp = args.command == "train-fusion"
    model_config, train_config = _configs(
        args, data.vocab.num_entities, data.vocab.num_relations, use_sp
    )
    if use_sp:
        logical = read_logical_export(args.logical)
        model, curve = train_fusion(data, logical, model_config, train_config, args.curve)
    else:
        model, curve = train_base(data, model_config, train_config, args.curve)
    save_checkpoint(model, args.checkpoint)
    if curve:
        final = curve[-1]
        print(
            f"final epoch {final['epoch']}: hits@1 {final['hits@1']:.4f} "
            f"hits@10 {final['hits@10']:.4f} mrr {final['mrr']:.4f}"
        )
    print(f"checkpoint -> {args.checkpoint}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
