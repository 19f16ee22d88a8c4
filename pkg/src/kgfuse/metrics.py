"""Filtered ranking metrics: Hits@1/5/10, MRR, and per-relation breakdowns.

Filtered means every other known-correct answer is deleted from a ranking
before locating the gold entity, so a query is not penalized for ranking a
different true answer first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

RankRecord = tuple[tuple[int, int, int], int]  # ((bound, relation, gold), rank)


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class Metrics:
    hits1: float
    hits5: float
    hits10: float
    mrr: float
    count: int

    def as_dict(self) -> dict:
        return {
            "hits@1": self.hits1,
            "hits@5": self.hits5,
            "hits@10": self.hits10,
            "mrr": self.mrr,
            "count": self.count,
        }


def filtered_rank(
    ranking: list[tuple[int, float]], gold: int, known: set[int]
) -> int:
    """1-based rank of gold after deleting all other known answers.

    A gold entity missing from a truncated ranking ranks one past the end
    of the filtered list (callers should surface a warning; see
    ``filtered_rank_status``).
    """
    rank, _ = filtered_rank_status(ranking, gold, known)
    return rank


def filtered_rank_status(
    ranking: list[tuple[int, float]], gold: int, known: set[int]
) -> tuple[int, bool]:
    """(rank, gold_was_present)."""
    position = 0
    for entity, _ in ranking:
        if entity == gold:
            return position + 1, True
        if entity not in known:
            position += 1
    return position + 1, False


def aggregate(ranks: list[int]) -> Metrics:
    """Hits@N and MRR over a list of 1-based ranks."""
    if not ranks:
        raise MetricsError("cannot aggregate an empty rank list")
    n = len(ranks)
    return Metrics(
        hits1=sum(1 for r in ranks if r <= 1) / n,
        hits5=sum(1 for r in ranks if r <= 5) / n,
        hits10=sum(1 for r in ranks if r <= 10) / n,
        mrr=sum(1.0 / r for r in ranks) / n,
        count=n,
    )


def per_relation_metrics(
    records: list[RankRecord],
    base_relation=None,
) -> dict[int, Metrics]:
    """Aggregate separately per relation (both query directions of a
    relation pool together when ``base_relation`` maps reciprocal ids)."""
    by_rel: dict[int, list[int]] = {}
    for (_, relation, _), rank in records:
        rel = base_relation(relation) if base_relation else relation
        by_rel.setdefault(rel, []).append(rank)
    return {rel: aggregate(ranks) for rel, ranks in sorted(by_rel.items())}


def per_relation_delta(
    run_a: Mapping[tuple[int, int, int], int],
    run_b: Mapping[tuple[int, int, int], int],
    base_relation=None,
) -> tuple[dict[int, float], tuple[int, int, int]]:
    """Per-relation hits@10 difference between two runs on one query set.

    Returns (relation -> delta, (positive, zero, negative) counts).
    Raises MetricsError when the two runs cover different queries.
    """
    if set(run_a) != set(run_b):
        raise MetricsError("runs cover different query sets")
    metrics_a = per_relation_metrics(list(run_a.items()), base_relation)
    metrics_b = per_relation_metrics(list(run_b.items()), base_relation)
    deltas = {
        rel: metrics_a[rel].hits10 - metrics_b[rel].hits10 for rel in metrics_a
    }
    positive = sum(1 for d in deltas.values() if d > 0)
    zero = sum(1 for d in deltas.values() if d == 0)
    negative = sum(1 for d in deltas.values() if d < 0)
    return deltas, (positive, zero, negative)


def build_report(
    records: list[RankRecord],
    warnings: Optional[dict[str, int]] = None,
    relation_names=None,
    base_relation=None,
) -> dict:
    """Machine-readable evaluation report: overall, per-relation, warnings."""
    overall = aggregate([rank for _, rank in records])
    per_rel = per_relation_metrics(records, base_relation)
    report = {
        "overall": overall.as_dict(),
        "per_relation": [
            {
                "relation": rel,
                "name": relation_names(rel) if relation_names else str(rel),
                **metrics.as_dict(),
            }
            for rel, metrics in per_rel.items()
        ],
        "warnings": dict(warnings or {}),
    }
    return report


def render_report(report: dict) -> str:
    """Human-readable table for terminals and logs."""
    lines = []
    overall = report["overall"]
    lines.append(f"{'':24s}{'Hits@1':>8s}{'Hits@5':>8s}{'Hits@10':>9s}{'MRR':>8s}{'N':>8s}")
    lines.append(
        f"{'overall':24s}"
        f"{overall['hits@1'] * 100:8.2f}{overall['hits@5'] * 100:8.2f}"
        f"{overall['hits@10'] * 100:9.2f}{overall['mrr'] * 100:8.2f}{overall['count']:8d}"
    )
    for row in report["per_relation"]:
        name = row["name"]
        if len(name) > 22:
            name = name[:19] + "..."
        lines.append(
            f"{name:24s}"
            f"{row['hits@1'] * 100:8.2f}{row['hits@5'] * 100:8.2f}"
            f"{row['hits@10'] * 100:9.2f}{row['mrr'] * 100:8.2f}{row['count']:8d}"
        )
    for key, value in sorted(report["warnings"].items()):
        lines.append(f"warning: {key} = {value}")
    return "\n".join(lines) + "\n"
