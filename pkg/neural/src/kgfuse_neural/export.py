"""Score export in the rule engine's JSON-lines interchange format."""

from __future__ import annotations

import json
import os
import tempfile
from typing import Optional

import torch

from .data import Dataset
from .model import ConvScorer
from .sp import sp_matrix


class ExportError(Exception):
    pass


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@torch.no_grad()
def export_scores(
    model: ConvScorer,
    queries: list[tuple[int, int]],
    path: str,
    k: int = 1000,
    logical_export: Optional[dict] = None,
    sp_top_n: int = 10,
    batch_size: int = 256,
) -> int:
    """Write the top-k entities per query, best first, as JSON-lines.

    Queries are deduplicated keeping first occurrence; an out-of-range
    relation id is an error (the model cannot have scored it).
    """
    model.eval()
    num_entities = model.config.num_entities
    if k > num_entities:
        raise ExportError(f"k={k} exceeds the entity count {num_entities}")
    seen = set()
    unique: list[tuple[int, int]] = []
    for query in queries:
        if query[1] >= model.config.num_relations or query[1] < 0:
            raise ExportError(f"unknown relation id {query[1]} in query {query}")
        if query not in seen:
            seen.add(query)
            unique.append(query)

    lines = []
    for start in range(0, len(unique), batch_size):
        chunk = unique[start : start + batch_size]
        heads = torch.tensor([h for h, _ in chunk], dtype=torch.long)
        rels = torch.tensor([r for _, r in chunk], dtype=torch.long)
        sp = None
        if model.config.use_sp:
            sp = sp_matrix(chunk, logical_export or {}, num_entities, sp_top_n)
        probs = model.probabilities(heads, rels, sp)
        top = torch.topk(probs, k, dim=1)
        for row, (h, r) in enumerate(chunk):
            pairs = sorted(
                zip(top.indices[row].tolist(), top.values[row].tolist()),
                key=lambda kv: (-kv[1], kv[0]),
            )
            candidates = [[e, round(s, 8)] for e, s in pairs]
            lines.append(
                json.dumps({"h": h, "r": r, "candidates": candidates},
                           separators=(",", ":"))
            )
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))
    return len(unique)


def export_split_scores(model: ConvScorer, data: Dataset, split: str, path: str,
                        k: int = 1000, logical_export: Optional[dict] = None) -> int:
    queries = [(bound, relation) for bound, relation, _ in data.queries(split)]
    return export_scores(model, queries, path, k, logical_export)
