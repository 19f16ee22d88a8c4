"""Toy-scale learning checks: the planted compositional pattern must be
learnable, and oracle-informative logical vectors must lift the fusion
model above the base model. Budgets stay far under the 10-minute cap."""

import csv
import time

import pytest
import torch

from kgfuse_neural.model import ConvScorer
from kgfuse_neural.sp import sp_matrix
from kgfuse_neural.train import (
    TrainConfig,
    TrainingError,
    evaluate_filtered,
    smooth,
    train,
    train_base,
    train_fusion,
)

from conftest import small_model_config

RANDOM_HITS10 = 10 / 50  # uniform ranking over the 50-entity toy world


@pytest.fixture(scope="module")
def trained_pair(toy_dataset, toy_logical_export):
    config = TrainConfig(
        epochs=300, batch_size=128, learning_rate=3e-3, eval_interval=300, seed=0
    )
    start = time.time()
    base, _ = train_base(
        toy_dataset,
        small_model_config(toy_dataset.vocab.num_entities, toy_dataset.vocab.num_relations),
        config,
    )
    fusion, _ = train_fusion(
        toy_dataset,
        toy_logical_export,
        small_model_config(
            toy_dataset.vocab.num_entities, toy_dataset.vocab.num_relations, use_sp=True
        ),
        config,
    )
    elapsed = time.time() - start
    assert elapsed < 600, f"toy training took {elapsed:.0f}s, over the 10-minute budget"
    return base, fusion


class TestToyLearning:
    def test_base_beats_random_baseline_3x(self, trained_pair, toy_dataset):
        base, _ = trained_pair
        metrics = evaluate_filtered(base, toy_dataset, queries=list(toy_dataset.test))
        print(f"base toy metrics: {metrics}")
        assert metrics["hits@10"] >= 3 * RANDOM_HITS10

    def test_fusion_beats_base_given_oracle_scores(
        self, trained_pair, toy_dataset, toy_logical_export
    ):
        base, fusion = trained_pair
        queries = list(toy_dataset.test)
        base_metrics = evaluate_filtered(base, toy_dataset, queries=queries)
        fusion_metrics = evaluate_filtered(
            fusion, toy_dataset, logical_export=toy_logical_export, queries=queries
        )
        print(f"fusion toy metrics: {fusion_metrics}")
        assert fusion_metrics["hits@1"] > base_metrics["hits@1"]
        assert fusion_metrics["hits@10"] >= base_metrics["hits@10"]

    def test_untrained_model_evaluates_near_random(self, toy_dataset):
        torch.manual_seed(3)
        model = ConvScorer(
            small_model_config(toy_dataset.vocab.num_entities, toy_dataset.vocab.num_relations)
        )
        metrics = evaluate_filtered(model, toy_dataset, queries=list(toy_dataset.test))
        # an untrained scorer must still produce a full, finite evaluation
        assert 0.0 <= metrics["mrr"] <= 1.0
        assert metrics["hits@10"] <= 0.9  # nowhere near the trained model


class TestTrainingMechanics:
    def test_sp_projection_gets_gradient(self, toy_dataset, toy_logical_export):
        torch.manual_seed(0)
        model = ConvScorer(
            small_model_config(
                toy_dataset.vocab.num_entities, toy_dataset.vocab.num_relations, use_sp=True
            )
        )
        model.train()
        import random as _random

        heads, rels, targets = next(toy_dataset.batches(64, _random.Random(0)))
        sp = sp_matrix(
            list(zip(heads.tolist(), rels.tolist())),
            toy_logical_export,
            toy_dataset.vocab.num_entities,
        )
        loss = torch.nn.functional.binary_cross_entropy_with_logits(
            model(heads, rels, sp), smooth(targets, 0.1)
        )
        loss.backward()
        assert model.sp_projection.weight.grad.norm().item() > 0

    def test_divergence_aborts_with_diagnostics(self, toy_dataset):
        config = TrainConfig(epochs=30, learning_rate=1e18, eval_interval=30, seed=0)
        with pytest.raises(TrainingError, match="diverged"):
            train(
                toy_dataset,
                small_model_config(
                    toy_dataset.vocab.num_entities, toy_dataset.vocab.num_relations
                ),
                config,
            )

    def test_curve_csv(self, toy_dataset, tmp_path):
        path = str(tmp_path / "curve.csv")
        config = TrainConfig(epochs=4, eval_interval=2, learning_rate=1e-3, seed=0)
        train_base(
            toy_dataset,
            small_model_config(toy_dataset.vocab.num_entities, toy_dataset.vocab.num_relations),
            config,
            curve_path=path,
        )
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["epoch"]) for r in rows] == [2, 4]
        assert all(0.0 <= float(r["mrr"]) <= 1.0 for r in rows)

    def test_config_validation(self):
        with pytest.raises(TrainingError):
            TrainConfig(epochs=0)
        with pytest.raises(TrainingError):
            TrainConfig(label_smoothing=1.5)
