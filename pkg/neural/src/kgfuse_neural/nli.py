"""Batch scoring of rule sentence pairs with an entailment classifier.

The scorer is pluggable: anything with
`score(premise, hypothesis) -> (entailment, neutral, contradiction)`.
`TransformersNliScorer` wraps a pretrained Hugging Face checkpoint when
one is available locally; `LexicalOverlapScorer` is a deterministic,
dependency-free stand-in used by the tests and for smoke runs.
"""

from __future__ import annotations

import logging
from typing import Iterable, Protocol

logger = logging.getLogger(__name__)


class NliError(Exception):
    pass


class NliScorer(Protocol):
    def score(self, premise: str, hypothesis: str) -> tuple[float, float, float]:
        ...


class LexicalOverlapScorer:
    """Entailment from token overlap; crude but deterministic.

    An identical premise/hypothesis scores pure entailment; disjoint
    sentences score mostly neutral. Not a substitute for a real NLI model,
    just enough structure to exercise the plumbing.
    """

    def score(self, premise: str, hypothesis: str) -> tuple[float, float, float]:
        p_tokens = set(premise.lower().replace(".", " ").split())
        h_tokens = set(hypothesis.lower().replace(".", " ").split())
        union = p_tokens | h_tokens
        overlap = len(p_tokens & h_tokens) / len(union) if union else 0.0
        entailment = overlap
        neutral = 0.8 * (1.0 - overlap)
        contradiction = 0.2 * (1.0 - overlap)
        return entailment, neutral, contradiction


class TransformersNliScorer:
    """Pretrained 3-way classifier via transformers; loaded lazily.

    `model_name` may be a hub id or a local checkpoint directory. Label
    order follows the model config's id2label mapping.
    """

    def __init__(self, model_name: str, device: str = "cpu"):
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForSequenceClassification.from_pretrained(model_name)
        self.model.to(device)
        self.model.eval()
        self.device = device
        labels = {i: label.lower() for i, label in self.model.config.id2label.items()}
        self._order = {}
        for idx, label in labels.items():
            for key in ("entailment", "neutral", "contradiction"):
                if key in label:
                    self._order[key] = idx
        if len(self._order) != 3:
            raise NliError(f"cannot map labels {labels} onto entailment/neutral/contradiction")

    def score(self, premise: str, hypothesis: str) -> tuple[float, float, float]:
        import torch

        inputs = self.tokenizer(premise, hypothesis, return_tensors="pt",
                                truncation=True).to(self.device)
        with torch.no_grad():
            probs = torch.softmax(self.model(**inputs).logits[0], dim=-1)
        return (
            probs[self._order["entailment"]].item(),
            probs[self._order["neutral"]].item(),
            probs[self._order["contradiction"]].item(),
        )


def score_rules(
    pairs: Iterable[tuple[int, str, str]],
    scorer: NliScorer,
) -> tuple[dict[int, tuple[float, float, float]], list[int]]:
    """Score (rule_id, premise, hypothesis) rows.

    Rows with an empty premise or hypothesis are skipped and reported in
    the second return value; every emitted probability triple is
    renormalized to sum to exactly 1.
    """
    table: dict[int, tuple[float, float, float]] = {}
    skipped: list[int] = []
    for rule_id, premise, hypothesis in pairs:
        if not premise.strip() or not hypothesis.strip():
            logger.warning("rule %d: empty premise or hypothesis, skipped", rule_id)
            skipped.append(rule_id)
            continue
        e, n, c = scorer.score(premise, hypothesis)
        total = e + n + c
        if total <= 0:
            raise NliError(f"rule {rule_id}: scorer returned non-positive mass")
        table[rule_id] = (e / total, n / total, c / total)
    return table, skipped


def read_sentence_pairs(path: str) -> list[tuple[int, str, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 3:
                raise NliError(f"{path}:{line_no}: expected `rule_id<TAB>premise<TAB>hypothesis`")
            out.append((int(fields[0]), fields[1], fields[2]))
    return out


def write_nli_tsv(path: str, table: dict[int, tuple[float, float, float]]) -> None:
    from .export import atomic_write

    lines = [
        f"{rule_id}\t{e!r}\t{n!r}\t{c!r}"
        for rule_id, (e, n, c) in sorted(table.items())
    ]
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))
