#!/usr/bin/env python3
"""Regenerate the toy fixture's neural score files and the golden report.

The golden metrics are computed here with the brute-force reference code
from tests/oracles.py (exhaustive grounding enumeration, naive merge-sort
fusion, explicit filtered re-ranking), NOT with the package's fast paths,
so the pipeline test compares two independent computations.

Run from the repository root:  python scripts/compute_golden.py
"""

import json
import os
import random
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "tests"))
sys.path.insert(0, os.path.join(ROOT, "src"))

from kgfuse.kg import load_kg  # noqa: E402
from kgfuse.rules import drop_constant_rules, load_rules  # noqa: E402
from kgfuse.interchange import write_scores_jsonl, write_flags_tsv  # noqa: E402

from oracles import (  # noqa: E402
    brute_filtered_rank,
    brute_metrics,
    enumerate_bindings,
    eq9_direct,
    naive_combine,
    recompute_kept_rules,
)

TOY = os.path.join(ROOT, "tests", "fixtures", "toy")

GAMMA = 1.0
THRESHOLD = 0.5
ENABLED = ("nationality",)
FLAGS = {"nationality": 1, "speaks": 0, "lives_in": 1}
SEED = 7


def read_triples(kg, path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            h, r, t = line.rstrip("\n").split("\t")
            out.append((kg.vocab.entity_id(h), kg.vocab.relation_id(r), kg.vocab.entity_id(t)))
    return out


def unique_queries(kg, triples):
    seen, queries = set(), []
    for h, r, t in triples:
        for key in ((h, r), (t, kg.vocab.reciprocal(r))):
            if key not in seen:
                seen.add(key)
                queries.append(key)
    return queries


def oracle_logical(kg, rules_by_head, bound, relation):
    """Rule-derived scores via exhaustive binding enumeration."""
    reciprocal = kg.vocab.is_reciprocal(relation)
    base = kg.vocab.base_relation(relation)
    train = set(kg.splits["train"])
    confidences: dict[int, list[float]] = {}
    for rule in rules_by_head.get(base, []):
        if reciprocal:
            derived = enumerate_bindings(
                rule, rule.head.object.label, bound, rule.head.subject.label,
                train, kg.num_entities,
            )
        else:
            derived = enumerate_bindings(
                rule, rule.head.subject.label, bound, rule.head.object.label,
                train, kg.num_entities,
            )
        for entity in derived:
            confidences.setdefault(entity, []).append(rule.confidence)
    return {e: eq9_direct(confs) for e, confs in confidences.items()}


def synth_neural(kg, queries, triples, rng):
    """Deterministic synthetic neural scores over every entity; gold gets a
    bump on a fixed subset of queries so the metrics are interesting."""
    golds: dict[tuple, list[int]] = {}
    for h, r, t in triples:
        golds.setdefault((h, r), []).append(t)
        golds.setdefault((t, kg.vocab.reciprocal(r)), []).append(h)
    records = []
    for i, (bound, relation) in enumerate(queries):
        scores = {e: round(rng.random() * 0.8, 6) for e in range(kg.num_entities)}
        if i % 2 == 0:
            # gold lands near the top but has to fight a few random scores
            for gold in golds[(bound, relation)]:
                scores[gold] = round(0.55 + rng.random() * 0.35, 6)
        if i % 3 == 0:
            distractor = rng.randrange(kg.num_entities)
            if distractor not in golds[(bound, relation)]:
                scores[distractor] = round(0.88 + rng.random() * 0.1, 6)
        records.append((bound, relation, scores))
    return records


def main():
    kg = load_kg(
        os.path.join(TOY, "train.txt"),
        os.path.join(TOY, "valid.txt"),
        os.path.join(TOY, "test.txt"),
    )
    rules = drop_constant_rules(load_rules(os.path.join(TOY, "rules.tsv"), kg.vocab))

    nli = {}
    with open(os.path.join(TOY, "nli.tsv"), encoding="utf-8") as fh:
        for line in fh:
            rid, e, n, c = line.rstrip("\n").split("\t")
            nli[int(rid)] = type("S", (), {"entailment": float(e), "neutral": float(n)})()
    enabled_ids = {kg.vocab.relation_id(name) for name in ENABLED}
    kept_ids = recompute_kept_rules(rules, nli, GAMMA, THRESHOLD, enabled_ids)
    kept = [r for r in rules if r.rule_id in kept_ids]
    print(f"rules kept after gate: {sorted(kept_ids)}")

    rules_by_head: dict[int, list] = {}
    for rule in kept:
        rules_by_head.setdefault(rule.head.relation, []).append(rule)

    test_triples = read_triples(kg, os.path.join(TOY, "test.txt"))
    valid_triples = read_triples(kg, os.path.join(TOY, "valid.txt"))
    test_queries = unique_queries(kg, test_triples)
    valid_queries = unique_queries(kg, valid_triples)

    rng = random.Random(SEED)
    neural_test = synth_neural(kg, test_queries, test_triples, rng)
    write_scores_jsonl(os.path.join(TOY, "neural_test.jsonl"), neural_test)
    neural_valid = synth_neural(kg, valid_queries, valid_triples, rng)
    write_scores_jsonl(os.path.join(TOY, "neural_valid.jsonl"), neural_valid)

    flag_ids = {kg.vocab.relation_id(name): flag for name, flag in FLAGS.items()}
    write_flags_tsv(os.path.join(TOY, "flags.tsv"), flag_ids)

    # fuse + evaluate with the oracle implementations
    neural_by_query = {(h, r): scores for h, r, scores in neural_test}
    ranks = []
    per_relation: dict[int, list[int]] = {}
    for h, r, t in test_triples:
        for bound, relation, gold in ((h, r, t), (t, kg.vocab.reciprocal(r), h)):
            a = neural_by_query[(bound, relation)]
            b = oracle_logical(kg, rules_by_head, bound, relation)
            flag = flag_ids.get(kg.vocab.base_relation(relation), 1)
            ranking = naive_combine(a, b, flag)
            known = kg.known_answers(bound, relation) - {gold}
            rank = brute_filtered_rank(ranking, gold, known)
            ranks.append(rank)
            per_relation.setdefault(kg.vocab.base_relation(relation), []).append(rank)

    golden = {
        "overall": brute_metrics(ranks),
        "per_relation": {
            kg.vocab.relation_name(rel): brute_metrics(rel_ranks)
            for rel, rel_ranks in sorted(per_relation.items())
        },
    }
    with open(os.path.join(TOY, "golden_report.json"), "w", encoding="utf-8") as fh:
        json.dump(golden, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(golden["overall"], indent=2))


if __name__ == "__main__":
    main()
