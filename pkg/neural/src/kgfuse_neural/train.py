"""1-N training loops for the base and fusion scorers.

Loss is binary cross-entropy against the multi-hot tail set with label
smoothing; filtered Hits@1/10 and MRR are computed at a fixed epoch
interval and appended to a training-curve CSV so base and fusion runs can
be compared epoch for epoch.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass
from typing import Optional

import torch

from .data import Dataset
from .model import ConvScorer, ModelConfig
from .sp import sp_matrix

logger = logging.getLogger(__name__)


class TrainingError(Exception):
    pass


@dataclass
class TrainConfig:
    epochs: int = 80
    batch_size: int = 128
    learning_rate: float = 1e-3
    label_smoothing: float = 0.1
    eval_interval: int = 10
    eval_split: str = "test"
    sp_top_n: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise TrainingError("epochs must be >= 1")
        for name in ("label_smoothing",):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise TrainingError(f"{name} must be a probability, got {value}")


def smooth(targets: torch.Tensor, epsilon: float) -> torch.Tensor:
    return targets * (1.0 - epsilon) + epsilon / targets.shape[1]


@torch.no_grad()
def evaluate_filtered(
    model: ConvScorer,
    data: Dataset,
    split: str = "test",
    logical_export: Optional[dict] = None,
    sp_top_n: int = 10,
    batch_size: int = 256,
    queries: Optional[list[tuple[int, int, int]]] = None,
) -> dict[str, float]:
    """Filtered ranking metrics; both query directions of a split unless an
    explicit (bound, relation, gold) list is given."""
    model.eval()
    if queries is None:
        queries = data.queries(split)
    if not queries:
        raise TrainingError(f"split {split!r} is empty")
    ranks = []
    for start in range(0, len(queries), batch_size):
        chunk = queries[start : start + batch_size]
        heads = torch.tensor([q[0] for q in chunk], dtype=torch.long)
        rels = torch.tensor([q[1] for q in chunk], dtype=torch.long)
        sp = None
        if model.config.use_sp:
            sp = sp_matrix(
                [(q[0], q[1]) for q in chunk],
                logical_export or {},
                data.vocab.num_entities,
                sp_top_n,
            )
        scores = model.probabilities(heads, rels, sp)
        for row, (bound, relation, gold) in enumerate(chunk):
            query_scores = scores[row].clone()
            known = data.known.get((bound, relation), set()) - {gold}
            if known:
                query_scores[sorted(known)] = -math.inf
            gold_score = query_scores[gold]
            rank = int((query_scores > gold_score).sum().item()) + 1
            ranks.append(rank)
    n = len(ranks)
    return {
        "hits@1": sum(1 for r in ranks if r <= 1) / n,
        "hits@10": sum(1 for r in ranks if r <= 10) / n,
        "mrr": sum(1.0 / r for r in ranks) / n,
    }


def train(
    data: Dataset,
    model_config: ModelConfig,
    config: TrainConfig,
    logical_export: Optional[dict] = None,
    curve_path: Optional[str] = None,
) -> tuple[ConvScorer, list[dict]]:
    """Shared loop; pass a logical export (and use_sp in the model config)
    to train the fusion variant."""
    if model_config.use_sp and logical_export is None:
        raise TrainingError("fusion training needs a logical export")
    torch.manual_seed(config.seed)
    rng = random.Random(config.seed)
    model = ConvScorer(model_config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = torch.nn.BCEWithLogitsLoss()

    curve: list[dict] = []
    for epoch in range(1, config.epochs + 1):
        model.train()
        epoch_loss = 0.0
        batches = 0
        for heads, rels, targets in data.batches(config.batch_size, rng):
            sp = None
            if model_config.use_sp:
                pairs = list(zip(heads.tolist(), rels.tolist()))
                sp = sp_matrix(
                    pairs, logical_export, data.vocab.num_entities, config.sp_top_n
                )
            optimizer.zero_grad()
            logits = model(heads, rels, sp)
            loss = loss_fn(logits, smooth(targets, config.label_smoothing))
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"loss diverged at epoch {epoch} (batch {batches}): {loss.item()}"
                )
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item()
            batches += 1
        if epoch % config.eval_interval == 0 or epoch == config.epochs:
            metrics = evaluate_filtered(
                model, data, config.eval_split, logical_export, config.sp_top_n
            )
            row = {"epoch": epoch, "loss": epoch_loss / max(batches, 1), **metrics}
            curve.append(row)
            logger.info(
                "epoch %d loss %.4f hits@1 %.3f hits@10 %.3f mrr %.3f",
                epoch, row["loss"], row["hits@1"], row["hits@10"], row["mrr"],
            )
    if curve_path:
        write_curve_csv(curve_path, curve)
    model.eval()
    return model, curve


def train_base(data: Dataset, model_config: ModelConfig, config: TrainConfig,
               curve_path: Optional[str] = None):
    if model_config.use_sp:
        raise TrainingError("use train_fusion for the sp-augmented model")
    return train(data, model_config, config, curve_path=curve_path)


def train_fusion(data: Dataset, logical_export: dict, model_config: ModelConfig,
                 config: TrainConfig, curve_path: Optional[str] = None):
    if not model_config.use_sp:
        raise TrainingError("fusion model config must set use_sp")
    return train(data, model_config, config, logical_export, curve_path)


def write_curve_csv(path: str, curve: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "hits@1", "hits@10", "mrr"])
        writer.writeheader()
        for row in curve:
            writer.writerow(row)
