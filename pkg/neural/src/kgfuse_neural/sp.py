"""Dense logical-score vectors from the rule engine's JSON-lines export."""

from __future__ import annotations

import json

import torch


class SpError(Exception):
    pass


def read_logical_export(path: str) -> dict[tuple[int, int], dict[int, float]]:
    out: dict[tuple[int, int], dict[int, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (int(record["h"]), int(record["r"]))
                out[key] = {int(e): float(s) for e, s in record["candidates"]}
            except (KeyError, ValueError, TypeError) as exc:
                raise SpError(f"{path}:{line_no}: bad score record: {exc}") from None
    return out


def build_sp(
    query: tuple[int, int],
    export: dict[tuple[int, int], dict[int, float]],
    num_entities: int,
    n: int = 10,
) -> torch.Tensor:
    """Vector over all entities with the query's top-n logical scores.

    Queries absent from the export get the all-zero vector (the rules had
    nothing to say), which the fusion model treats as "no logical signal".
    """
    vec = torch.zeros(num_entities)
    scores = export.get(query)
    if not scores:
        return vec
    top = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
    for entity, score in top:
        if not 0 <= entity < num_entities:
            raise SpError(f"entity id {entity} outside the vocabulary")
        vec[entity] = score
    return vec


def sp_matrix(
    queries: list[tuple[int, int]],
    export: dict[tuple[int, int], dict[int, float]],
    num_entities: int,
    n: int = 10,
) -> torch.Tensor:
    return torch.stack([build_sp(q, export, num_entities, n) for q in queries])
