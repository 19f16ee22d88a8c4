"""Forward chaining of chain rules over the train graph, and candidate scoring.

An entity derived by several rules keeps one confidence per rule, sorted
descending; its score is the decayed sum of the top seven::

    score = sum_{i=1..min(7, k)} s_i / 100**(i-1)

so a single strong rule outranks any pile of weaker ones (0.7 beats
0.6 + 0.5/100 = 0.605).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Optional

from .kg import FORWARD, INVERSE, IndexedKG
from .rules import Rule, RuleSet

MAX_RULES_PER_ENTITY = 7

EdgeMask = FrozenSet[tuple[int, int, int]]


@dataclass(frozen=True)
class Query:
    """A tail-completion query (bound, relation, ?).

    Head-side queries arrive here already rewritten onto the reciprocal
    relation id. ``gold`` is the expected answer during evaluation.
    """

    bound: int
    relation: int
    gold: Optional[int] = None


@dataclass
class ScoredCandidates:
    """entity id -> score, tagged with which stage produced it."""

    scores: dict[int, float]
    provenance: str = "logical"

    def __len__(self) -> int:
        return len(self.scores)


def ground_rule(
    rule: Rule,
    bound: int,
    kg: IndexedKG,
    mask: EdgeMask = frozenset(),
) -> set[int]:
    """All entities the rule derives when its head subject is ``bound``.

    Walks the body chain breadth-first, one body atom at a time, keeping a
    deduplicated set of partial bindings projected onto the variables that
    still matter (the visited-set pruning keeps hub entities from blowing
    up memory). Repeated variables are checked for consistency rather than
    rebound, so the result matches exhaustive enumeration of all bindings.

    ``mask`` hides individual train edges (as base-relation triples) from
    the walk; used to keep a training query's own edge out of its grounding.
    """
    if not rule.is_variable_pure:
        raise ValueError("only variable-pure rules can be grounded")
    head_subject = rule.head.subject.label  # type: ignore[union-attr]
    head_object = rule.head.object.label  # type: ignore[union-attr]

    # Variables still needed after each body position: everything mentioned
    # later plus the head object we ultimately report.
    live_after: list[tuple[str, ...]] = []
    needed = {head_object}
    for atom in reversed(rule.body):
        live_after.append(tuple(sorted(needed)))
        needed.update(atom.variables())
    live_after.reverse()

    frontier: list[dict[str, int]] = [{head_subject: bound}]
    for pos, atom in enumerate(rule.body):
        if atom.inverted:
            known, new, direction = atom.object, atom.subject, INVERSE
        else:
            known, new, direction = atom.subject, atom.object, FORWARD
        known_label = known.label  # type: ignore[union-attr]
        new_label = new.label  # type: ignore[union-attr]
        live = live_after[pos]
        seen: set[tuple[int, ...]] = set()
        next_frontier: list[dict[str, int]] = []
        for binding in frontier:
            src = binding[known_label]
            found = kg.neighbors(src, atom.relation, direction)
            if mask:
                if direction == FORWARD:
                    found = {t for t in found if (src, atom.relation, t) not in mask}
                else:
                    found = {h for h in found if (h, atom.relation, src) not in mask}
            if new_label in binding:
                # repeated variable: keep the binding only if consistent
                candidates = (binding[new_label],) if binding[new_label] in found else ()
            else:
                candidates = tuple(found)
            for entity in candidates:
                extended = dict(binding)
                extended[new_label] = entity
                projected = {v: extended[v] for v in live if v in extended}
                key = tuple(projected.get(v, -1) for v in live)
                if key in seen:
                    continue
                seen.add(key)
                next_frontier.append(projected)
        frontier = next_frontier
        if not frontier:
            return set()
    return {binding[head_object] for binding in frontier}


def iter_rule_groundings(
    query: Query,
    ruleset: RuleSet,
    kg: IndexedKG,
    mask: EdgeMask = frozenset(),
):
    """Yield (rule, confidence, derived entity set) for the query's relation.

    Rules arrive in descending-confidence group order. Head-side queries
    (reciprocal relation ids) walk each rule in reverse, binding the head's
    object variable instead.
    """
    reverse = kg.vocab.is_reciprocal(query.relation)
    base = kg.vocab.base_relation(query.relation)
    for rule, conf in ruleset.scored_rules_for(base):
        walked = rule.reversed() if reverse else rule
        yield rule, conf, ground_rule(walked, query.bound, kg, mask)


def collect_candidates(
    query: Query,
    ruleset: RuleSet,
    kg: IndexedKG,
    mask: EdgeMask = frozenset(),
) -> dict[int, list[float]]:
    """Ground every rule of the query's relation and gather confidences.

    Each rule contributes at most once per derived entity; because groups
    iterate in descending confidence order, every entity's list comes out
    sorted non-increasing.
    """
    candidates: dict[int, list[float]] = {}
    for _, conf, grounded in iter_rule_groundings(query, ruleset, kg, mask):
        for entity in grounded:
            candidates.setdefault(entity, []).append(conf)
    return candidates


def fired_rules(
    query: Query,
    ruleset: RuleSet,
    kg: IndexedKG,
    entity: int,
) -> list[Rule]:
    """The rules that derive one particular answer entity, strongest first."""
    return [
        rule
        for rule, _, grounded in iter_rule_groundings(query, ruleset, kg)
        if entity in grounded
    ]


def entity_score(confidences: list[float]) -> float:
    """Decayed sum of the top (at most) seven confidences.

    The list must already be sorted non-increasing; entries past the
    seventh carry no weight. Plain double accumulation is exact enough:
    terms fall off by 100x per position.
    """
    total = 0.0
    scale = 1.0
    for conf in confidences[:MAX_RULES_PER_ENTITY]:
        total += conf / scale
        scale *= 100.0
    return total


def logical_answers(
    query: Query,
    ruleset: RuleSet,
    kg: IndexedKG,
    mask: EdgeMask = frozenset(),
) -> ScoredCandidates:
    """Rule-derived candidate entities with their decayed-sum scores."""
    collected = collect_candidates(query, ruleset, kg, mask)
    return ScoredCandidates(
        scores={entity: entity_score(confs) for entity, confs in collected.items()},
        provenance="logical",
    )


def direct_edge_mask(query: Query, kg: IndexedKG) -> EdgeMask:
    """The query's own train edges, as base-relation triples.

    Masking these during grounding prevents rules from reading back the
    very fact a training query is supposed to predict.
    """
    base = kg.vocab.base_relation(query.relation)
    if kg.vocab.is_reciprocal(query.relation):
        heads = kg.neighbors(query.bound, base, INVERSE)
        return frozenset((h, base, query.bound) for h in heads)
    tails = kg.neighbors(query.bound, base, FORWARD)
    return frozenset((query.bound, base, t) for t in tails)
