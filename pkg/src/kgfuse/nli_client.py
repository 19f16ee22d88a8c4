"""Optional HTTP client for an external premise/hypothesis scorer service.

Produces the same rule_id -> NliScores table as the TSV reader, so the
filter stage does not care where scores come from. Protocol: POST a JSON
array of {rule_id, premise, hypothesis} objects, receive a JSON array of
{entailment, neutral, contradiction} objects in the same order.
"""

from __future__ import annotations

import json
import urllib.request
from typing import Iterable

from .filtering import NliScores


class ScorerClientError(Exception):
    pass


def fetch_nli_scores(
    endpoint: str,
    pairs: Iterable[tuple[int, str, str]],
    batch_size: int = 64,
    timeout: float = 60.0,
) -> dict[int, NliScores]:
    """Score (rule_id, premise, hypothesis) triples against a service."""
    pairs = list(pairs)
    table: dict[int, NliScores] = {}
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start : start + batch_size]
        payload = json.dumps(
            [
                {"rule_id": rid, "premise": premise, "hypothesis": hypothesis}
                for rid, premise, hypothesis in batch
            ]
        ).encode("utf-8")
        request = urllib.request.Request(
            endpoint, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=timeout) as response:
                body = json.loads(response.read().decode("utf-8"))
        except (OSError, ValueError) as exc:
            raise ScorerClientError(f"scorer request failed: {exc}") from exc
        if not isinstance(body, list) or len(body) != len(batch):
            raise ScorerClientError(
                f"scorer returned {len(body) if isinstance(body, list) else 'non-list'} "
                f"results for a batch of {len(batch)}"
            )
        for (rule_id, _, _), scores in zip(batch, body):
            try:
                table[rule_id] = NliScores(
                    float(scores["entailment"]),
                    float(scores["neutral"]),
                    float(scores["contradiction"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ScorerClientError(
                    f"bad scorer response for rule {rule_id}: {exc}"
                ) from None
    return table
