"""Independent brute-force reference implementations used by the tests.

Each function here deliberately takes the dumbest correct path (full
enumeration, rebuild-and-sort) and shares no code with the package, so a
bug has to occur twice, in two different shapes, to slip through.
"""

from __future__ import annotations

from itertools import product

from kgfuse.rules import Constant, Rule


def enumerate_bindings(
    rule: Rule,
    fixed_label: str,
    fixed_value: int,
    report_label: str,
    triples: set,
    num_entities: int,
) -> set[int]:
    """All values of `report_label` over bindings satisfying the body.

    Tries every assignment of every other variable over the full entity
    range; atoms are checked exactly as written (subject, relation, object)
    against the train triple set, ignoring inversion bits on purpose, so
    this also cross-checks the chain normalization.
    """
    variables = []
    for atom in (rule.head, *rule.body):
        for term in (atom.subject, atom.object):
            if isinstance(term, Constant):
                raise ValueError("oracle only handles variable-pure rules")
            if term.label not in variables:
                variables.append(term.label)
    free = [v for v in variables if v != fixed_label]

    derived = set()
    for combo in product(range(num_entities), repeat=len(free)):
        binding = dict(zip(free, combo))
        binding[fixed_label] = fixed_value
        ok = True
        for atom in rule.body:
            fact = (binding[atom.subject.label], atom.relation, binding[atom.object.label])
            if fact not in triples:
                ok = False
                break
        if ok:
            derived.add(binding[report_label])
    return derived


def enumerate_groundings(rule: Rule, bound: int, triples: set, num_entities: int) -> set[int]:
    """Tail-side grounding: bind the head subject, report the head object."""
    return enumerate_bindings(
        rule, rule.head.subject.label, bound, rule.head.object.label, triples, num_entities
    )


def enumerate_reverse_groundings(rule: Rule, bound: int, triples: set, num_entities: int) -> set[int]:
    """Head-side grounding: bind the head object, report the head subject."""
    return enumerate_bindings(
        rule, rule.head.object.label, bound, rule.head.subject.label, triples, num_entities
    )


def eq9_direct(confidences: list[float]) -> float:
    """Decayed top-7 sum, written as literal powers."""
    return sum(c / 100 ** i for i, c in enumerate(sorted(confidences, reverse=True)[:7]))


def naive_combine(a: dict, b: dict, flag: int) -> list[tuple[int, float]]:
    """Merge the two maps per the flag semantics, then fully sort."""
    merged: dict[int, float] = {}
    for entity, score in a.items():
        if flag == 0:
            merged[entity] = score if entity in b else -1.0
        else:
            merged[entity] = score + b.get(entity, 0.0)
    if flag == 1:
        for entity, score in b.items():
            if entity not in a:
                merged[entity] = score
    return sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))


def brute_filtered_rank(ranking: list[tuple[int, float]], gold: int, known: set[int]) -> int:
    """Rebuild the filtered list explicitly, then find gold in it."""
    filtered = [e for e, _ in ranking if e == gold or e not in known]
    if gold in filtered:
        return filtered.index(gold) + 1
    return len(filtered) + 1


def recompute_kept_rules(rules, nli_table, gamma: float, threshold: float, enabled: set[int]):
    """Which rule ids survive the NLI gate, recomputed from first principles."""
    kept = set()
    for rule in rules:
        if rule.head.relation not in enabled:
            kept.add(rule.rule_id)
            continue
        scores = nli_table[rule.rule_id]
        final = scores.entailment + gamma * rule.confidence * scores.neutral
        if final > threshold:
            kept.add(rule.rule_id)
    return kept


def brute_metrics(ranks: list[int]) -> dict:
    return {
        "hits@1": sum(r <= 1 for r in ranks) / len(ranks),
        "hits@5": sum(r <= 5 for r in ranks) / len(ranks),
        "hits@10": sum(r <= 10 for r in ranks) / len(ranks),
        "mrr": sum(1 / r for r in ranks) / len(ranks),
        "count": len(ranks),
    }
