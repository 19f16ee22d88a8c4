"""Convolutional 1-N entity scorer, with an optional logical-score plane.

The base model reshapes the head-entity and relation embeddings into two
stacked 2D planes, convolves, and projects the flattened feature maps back
to embedding size; logits are the dot products with every entity embedding
plus a per-entity bias. The fusion variant adds a third plane: the query's
dense logical score vector pushed through a learned projection to
embedding size. Everything else is unchanged, so with the projection
output forced to zero the fusion network computes the base score (modulo
batch norm, which renormalizes the zero plane; the equivalence checks run
with batch_norm off).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn


class ModelError(Exception):
    pass


@dataclass
class ModelConfig:
    num_entities: int
    num_relations: int
    dim: int = 200
    reshape: tuple[int, int] = (10, 20)
    channels: int = 32
    kernel: int = 3
    input_dropout: float = 0.2
    feature_dropout: float = 0.2
    hidden_dropout: float = 0.3
    batch_norm: bool = True
    use_sp: bool = False

    def __post_init__(self) -> None:
        rows, cols = self.reshape
        if rows * cols != self.dim:
            raise ModelError(
                f"reshape {self.reshape} does not multiply to embedding dim {self.dim}"
            )


class ConvScorer(nn.Module):
    """Scores (h, r) against every entity; `use_sp` adds the logical plane."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        rows, cols = config.reshape
        self.entity_embedding = nn.Embedding(config.num_entities, config.dim)
        self.relation_embedding = nn.Embedding(config.num_relations, config.dim)
        if config.use_sp:
            self.sp_projection = nn.Linear(config.num_entities, config.dim)
        image_height = self.input_planes * rows
        conv_h = image_height - config.kernel + 1
        conv_w = cols - config.kernel + 1
        if conv_h <= 0 or conv_w <= 0:
            raise ModelError("kernel larger than the stacked input image")
        self.conv = nn.Conv2d(1, config.channels, config.kernel)
        self.fc = nn.Linear(config.channels * conv_h * conv_w, config.dim)
        self.entity_bias = nn.Parameter(torch.zeros(config.num_entities))
        self.input_dropout = nn.Dropout(config.input_dropout)
        self.feature_dropout = nn.Dropout2d(config.feature_dropout)
        self.hidden_dropout = nn.Dropout(config.hidden_dropout)
        if config.batch_norm:
            self.bn_input = nn.BatchNorm2d(1)
            self.bn_features = nn.BatchNorm2d(config.channels)
            self.bn_hidden = nn.BatchNorm1d(config.dim)
        nn.init.xavier_normal_(self.entity_embedding.weight)
        nn.init.xavier_normal_(self.relation_embedding.weight)

    @property
    def input_planes(self) -> int:
        return 3 if self.config.use_sp else 2

    def _stacked_input(
        self, heads: torch.Tensor, relations: torch.Tensor, sp: Optional[torch.Tensor]
    ) -> torch.Tensor:
        rows, cols = self.config.reshape
        planes = [
            self.entity_embedding(heads).view(-1, 1, rows, cols),
            self.relation_embedding(relations).view(-1, 1, rows, cols),
        ]
        if self.config.use_sp:
            if sp is None:
                raise ModelError("fusion model needs the logical score vectors")
            planes.append(self.sp_projection(sp).view(-1, 1, rows, cols))
        elif sp is not None:
            raise ModelError("base model does not take logical score vectors")
        return torch.cat(planes, dim=2)

    def forward(
        self,
        heads: torch.Tensor,
        relations: torch.Tensor,
        sp: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        x = self._stacked_input(heads, relations, sp)
        if self.config.batch_norm:
            x = self.bn_input(x)
        x = self.input_dropout(x)
        x = self.conv(x)
        if self.config.batch_norm:
            x = self.bn_features(x)
        x = torch.relu(x)
        x = self.feature_dropout(x)
        x = self.fc(x.flatten(start_dim=1))
        x = self.hidden_dropout(x)
        if self.config.batch_norm:
            x = self.bn_hidden(x)
        x = torch.relu(x)
        logits = x @ self.entity_embedding.weight.t() + self.entity_bias
        return logits

    def probabilities(self, heads, relations, sp=None) -> torch.Tensor:
        return torch.sigmoid(self.forward(heads, relations, sp))

    def score_one(self, head: int, relation: int, tail: int,
                  sp: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Scalar logit for one triple; used by the gradient checks."""
        heads = torch.tensor([head], dtype=torch.long)
        relations = torch.tensor([relation], dtype=torch.long)
        return self.forward(heads, relations, sp)[0, tail]


def save_checkpoint(model: ConvScorer, path: str) -> None:
    torch.save({"config": model.config.__dict__, "state": model.state_dict()}, path)


def load_checkpoint(path: str) -> ConvScorer:
    payload = torch.load(path, weights_only=False)
    config = ModelConfig(**payload["config"])
    model = ConvScorer(config)
    model.load_state_dict(payload["state"])
    model.eval()
    return model
