"""Fusing neural and logical candidate maps into one ranking.

Two modes, selected by a per-relation boolean flag:

  flag 0  keep the neural ordering but demote every neural candidate the
          rules cannot justify to a -1 sentinel (a veto that still yields
          a full ranking);
  flag 1  sum scores where both sides agree and take the union otherwise.

Ties break on ascending entity id so rankings are reproducible.
"""

from __future__ import annotations

import heapq
import math
from typing import Callable, Mapping, Optional, Union

from .grounding import Query, ScoredCandidates

RankedAnswers = list[tuple[int, float]]

VETO_SCORE = -1.0

CandidateMap = Union[ScoredCandidates, Mapping[int, float]]


def _scores(candidates: CandidateMap) -> Mapping[int, float]:
    if isinstance(candidates, ScoredCandidates):
        return candidates.scores
    return candidates


def combine(neural: CandidateMap, logical: CandidateMap, flag: int) -> RankedAnswers:
    """Merge the two candidate maps into a descending ranking.

    The neural map must be non-empty (the neural side scores everything it
    exports); the logical map may be empty. Entities outside the neural map
    only enter the result under flag 1. NaN scores are rejected.
    """
    a = _scores(neural)
    b = _scores(logical)
    if not a:
        raise ValueError("neural candidate map must not be empty")

    heap: list[tuple[float, int]] = []
    for entity, score in a.items():
        if math.isnan(score):
            raise ValueError(f"NaN neural score for entity {entity}")
        if flag == 0:
            fused = score if entity in b else VETO_SCORE
        else:
            fused = score + b[entity] if entity in b else score
        heap.append((-fused, entity))
    if flag == 1:
        for entity, score in b.items():
            if math.isnan(score):
                raise ValueError(f"NaN logical score for entity {entity}")
            if entity not in a:
                heap.append((-score, entity))
    elif flag != 0:
        raise ValueError(f"flag must be 0 or 1, got {flag}")

    # ordered extraction from a heap: O(n log n), ties fall back to the
    # second tuple element, i.e. ascending entity id
    heapq.heapify(heap)
    ranked: RankedAnswers = []
    while heap:
        neg_score, entity = heapq.heappop(heap)
        ranked.append((entity, -neg_score))
    return ranked


def _filtered_reciprocal_rank(
    ranking: RankedAnswers, gold: int, known: set[int]
) -> float:
    rank = 0
    for entity, _ in ranking:
        if entity == gold:
            return 1.0 / (rank + 1)
        if entity not in known:
            rank += 1
    # gold missing from a truncated ranking: one past the filtered list
    return 1.0 / (rank + 1)


def tune_flags(
    queries: list[Query],
    neural_provider: Callable[[Query], CandidateMap],
    logical_provider: Callable[[Query], CandidateMap],
    known_provider: Callable[[Query], set[int]],
    base_relation: Optional[Callable[[int], int]] = None,
) -> dict[int, int]:
    """Pick the better fusion mode per relation on validation queries.

    Compares filtered MRR under both flags; ties and relations without
    validation queries default to flag 1 (the score-sum mode, which never
    vetoes). Queries are grouped by base relation when ``base_relation``
    is given, so both directions of a relation share one flag.
    """
    by_relation: dict[int, list[Query]] = {}
    for query in queries:
        if query.gold is None:
            raise ValueError("tune_flags needs gold answers on every query")
        rel = base_relation(query.relation) if base_relation else query.relation
        by_relation.setdefault(rel, []).append(query)

    flags: dict[int, int] = {}
    for rel, rel_queries in sorted(by_relation.items()):
        totals = {0: 0.0, 1: 0.0}
        for query in rel_queries:
            a = neural_provider(query)
            b = logical_provider(query)
            known = known_provider(query) - {query.gold}
            for flag in (0, 1):
                ranking = combine(a, b, flag)
                totals[flag] += _filtered_reciprocal_rank(ranking, query.gold, known)
        flags[rel] = 0 if totals[0] > totals[1] else 1
    return flags
