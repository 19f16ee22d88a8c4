"""Dataset plumbing shared with the rule engine, by file format only.

The trainer never imports the rule engine; it reads the same triple TSVs
and the vocabulary dumps (`name<TAB>id`, reciprocal relations carrying an
`inv@` prefix) so entity/relation ids line up across both components.
Every (head, relation) pair is trained 1-N against all entities, with the
head-side direction folded in through the reciprocal relation ids.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import torch

RECIPROCAL_PREFIX = "inv@"


class DataError(Exception):
    pass


@dataclass
class Vocab:
    entity_ids: dict[str, int]
    relation_ids: dict[str, int]
    base_relation_count: int

    @property
    def num_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def num_relations(self) -> int:
        return len(self.relation_ids)

    def reciprocal(self, rid: int) -> int:
        base = self.base_relation_count
        return rid - base if rid >= base else rid + base


def _read_dump(path: str) -> dict[str, int]:
    out: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 2:
                raise DataError(f"{path}:{line_no}: expected `name<TAB>id`")
            out[fields[0]] = int(fields[1])
    return out


def load_vocab(entities_path: str, relations_path: str) -> Vocab:
    """Vocabulary from the rule engine's dump files."""
    relations = _read_dump(relations_path)
    base = sum(1 for name in relations if not name.startswith(RECIPROCAL_PREFIX))
    if len(relations) != 2 * base:
        raise DataError(
            f"{relations_path}: expected one {RECIPROCAL_PREFIX} entry per base relation"
        )
    return Vocab(_read_dump(entities_path), relations, base)


def vocab_from_triples(train_path: str) -> Vocab:
    """Standalone mode: intern names from a train file, then add reciprocals."""
    entity_ids: dict[str, int] = {}
    relation_ids: dict[str, int] = {}
    with open(train_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise DataError(f"{train_path}:{line_no}: expected 3 fields")
            h, r, t = fields
            entity_ids.setdefault(h, len(entity_ids))
            relation_ids.setdefault(r, len(relation_ids))
            entity_ids.setdefault(t, len(entity_ids))
    base = len(relation_ids)
    for name, rid in list(relation_ids.items()):
        relation_ids[RECIPROCAL_PREFIX + name] = base + rid
    return Vocab(entity_ids, relation_ids, base)


def read_triples(path: str, vocab: Vocab) -> list[tuple[int, int, int]]:
    """Interned triples; lines naming unknown entities/relations are skipped
    (they cannot be scored anyway)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise DataError(f"{path}:{line_no}: expected 3 fields")
            h, r, t = fields
            if h in vocab.entity_ids and r in vocab.relation_ids and t in vocab.entity_ids:
                out.append((vocab.entity_ids[h], vocab.relation_ids[r], vocab.entity_ids[t]))
    return out


@dataclass
class Dataset:
    """Splits plus the 1-N training table and filtered-evaluation indexes."""

    vocab: Vocab
    train: list[tuple[int, int, int]]
    valid: list[tuple[int, int, int]] = field(default_factory=list)
    test: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.train_pairs: dict[tuple[int, int], set[int]] = {}
        for h, r, t in self.train:
            self.train_pairs.setdefault((h, r), set()).add(t)
            self.train_pairs.setdefault((t, self.vocab.reciprocal(r)), set()).add(h)
        self.known: dict[tuple[int, int], set[int]] = {}
        for split in (self.train, self.valid, self.test):
            for h, r, t in split:
                self.known.setdefault((h, r), set()).add(t)
                self.known.setdefault((t, self.vocab.reciprocal(r)), set()).add(h)

    def queries(self, split: str) -> list[tuple[int, int, int]]:
        """(bound, relation, gold) for both directions of every split triple."""
        triples = getattr(self, split)
        out = []
        for h, r, t in triples:
            out.append((h, r, t))
            out.append((t, self.vocab.reciprocal(r), h))
        return out

    def batches(self, batch_size: int, rng: random.Random):
        """Shuffled 1-N batches: (heads, relations, multi-hot target rows)."""
        pairs = sorted(self.train_pairs)
        rng.shuffle(pairs)
        n = self.vocab.num_entities
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start : start + batch_size]
            heads = torch.tensor([h for h, _ in chunk], dtype=torch.long)
            rels = torch.tensor([r for _, r in chunk], dtype=torch.long)
            targets = torch.zeros((len(chunk), n))
            for row, pair in enumerate(chunk):
                targets[row, sorted(self.train_pairs[pair])] = 1.0
            yield heads, rels, targets


def load_dataset(train_path: str, valid_path: str | None = None,
                 test_path: str | None = None,
                 entities_path: str | None = None,
                 relations_path: str | None = None) -> Dataset:
    if entities_path and relations_path:
        vocab = load_vocab(entities_path, relations_path)
    else:
        vocab = vocab_from_triples(train_path)
    return Dataset(
        vocab=vocab,
        train=read_triples(train_path, vocab),
        valid=read_triples(valid_path, vocab) if valid_path else [],
        test=read_triples(test_path, vocab) if test_path else [],
    )
