"""Triple store: name interning, train/valid/test splits, adjacency indexes.

Facts are (head, relation, tail) integer triples. Queries in the head
direction, (?, r, t), are rewritten to tail queries over a reciprocal
relation that is registered for every base relation when the vocabulary
is finalized, so everything downstream only ever asks "complete the tail".
"""

from __future__ import annotations

import logging
from typing import Iterable, NamedTuple, Optional

logger = logging.getLogger(__name__)

FORWARD = "forward"
INVERSE = "inverse"

SPLITS = ("train", "valid", "test")

# Prefix used to derive the reciprocal relation's name in vocabulary dumps.
RECIPROCAL_PREFIX = "inv@"


class KgError(Exception):
    """Base error for triple-store problems."""


class TripleParseError(KgError):
    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class FrozenError(KgError):
    """Raised on mutation after a freeze step."""


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class Vocabulary:
    """Bijective name <-> dense-id maps for entities and relations.

    Mutable until :meth:`freeze` is called; afterwards lookups of unknown
    names raise ``KeyError`` instead of allocating ids.
    """

    def __init__(self) -> None:
        self._entity_ids: dict[str, int] = {}
        self._entity_names: list[str] = []
        self._relation_ids: dict[str, int] = {}
        self._relation_names: list[str] = []
        self._frozen = False
        # Set when reciprocal relations are registered; base relations keep
        # ids [0, base_relation_count), reciprocals live at id + base count.
        self._base_relation_count: Optional[int] = None

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def num_entities(self) -> int:
        return len(self._entity_names)

    @property
    def num_relations(self) -> int:
        return len(self._relation_names)

    @property
    def base_relation_count(self) -> int:
        if self._base_relation_count is None:
            return len(self._relation_names)
        return self._base_relation_count

    def entity_id(self, name: str, create: bool = False) -> int:
        eid = self._entity_ids.get(name)
        if eid is not None:
            return eid
        if not create or self._frozen:
            raise KeyError(name)
        eid = len(self._entity_names)
        self._entity_ids[name] = eid
        self._entity_names.append(name)
        return eid

    def relation_id(self, name: str, create: bool = False) -> int:
        rid = self._relation_ids.get(name)
        if rid is not None:
            return rid
        if not create or self._frozen:
            raise KeyError(name)
        rid = len(self._relation_names)
        self._relation_ids[name] = rid
        self._relation_names.append(name)
        return rid

    def entity_name(self, eid: int) -> str:
        return self._entity_names[eid]

    def relation_name(self, rid: int) -> str:
        return self._relation_names[rid]

    def has_entity(self, name: str) -> bool:
        return name in self._entity_ids

    def has_relation(self, name: str) -> bool:
        return name in self._relation_ids

    def entities(self) -> Iterable[str]:
        return iter(self._entity_names)

    def relations(self) -> Iterable[str]:
        return iter(self._relation_names)

    def register_reciprocals(self) -> None:
        """Add one reciprocal relation per base relation.

        Must be called at most once, before the vocabulary is frozen.
        Reciprocal of id r is r + base_relation_count.
        """
        if self._base_relation_count is not None:
            raise FrozenError("reciprocal relations already registered")
        if self._frozen:
            raise FrozenError("cannot extend a frozen vocabulary")
        base = len(self._relation_names)
        self._base_relation_count = base
        for rid in range(base):
            name = RECIPROCAL_PREFIX + self._relation_names[rid]
            self._relation_ids[name] = base + rid
            self._relation_names.append(name)

    def is_reciprocal(self, rid: int) -> bool:
        return self._base_relation_count is not None and rid >= self._base_relation_count

    def reciprocal(self, rid: int) -> int:
        """Map a relation id to its reciprocal (an involution)."""
        base = self._base_relation_count
        if base is None:
            raise KgError("reciprocal relations not registered")
        return rid - base if rid >= base else rid + base

    def base_relation(self, rid: int) -> int:
        return rid - self._base_relation_count if self.is_reciprocal(rid) else rid

    def freeze(self) -> None:
        self._frozen = True

    def dump_entities(self, path: str) -> None:
        _dump_tsv(path, self._entity_names)

    def dump_relations(self, path: str) -> None:
        _dump_tsv(path, self._relation_names)


def _dump_tsv(path: str, names: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, name in enumerate(names):
            fh.write(f"{name}\t{i}\n")


def load_vocab_tsv(path: str) -> dict[str, int]:
    """Read a `name<TAB>id` dump back into a dict."""
    out: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 2:
                raise TripleParseError(path, line_no, f"expected 2 fields, got {len(fields)}")
            out[fields[0]] = int(fields[1])
    return out


class IndexedKG:
    """Triples of all splits plus the indexes grounding and evaluation need.

    Adjacency indexes cover the train split only (grounding must not read
    held-out facts); the known-answer index covers the union of all splits
    and backs the filtered ranking protocol.
    """

    def __init__(self, vocab: Optional[Vocabulary] = None) -> None:
        self.vocab = vocab if vocab is not None else Vocabulary()
        self.splits: dict[str, list[Triple]] = {s: [] for s in SPLITS}
        self.skipped: dict[str, int] = {s: 0 for s in SPLITS}
        # train-only adjacency
        self._tails_by_head_rel: dict[tuple[int, int], set[int]] = {}
        self._heads_by_tail_rel: dict[tuple[int, int], set[int]] = {}
        self._train_by_rel: dict[int, list[Triple]] = {}
        # union of all splits
        self._known_tails: dict[tuple[int, int], set[int]] = {}
        self._known_heads: dict[tuple[int, int], set[int]] = {}
        self._frozen = False

    # -- loading ----------------------------------------------------------

    def load_triples(self, path: str, split: str) -> int:
        """Load a tab-separated triple file into one split.

        While the vocabulary is mutable (train loading) unseen names are
        interned; once frozen, lines naming unknown entities/relations are
        counted in ``self.skipped`` and logged, not fatal.

        Returns the number of triples stored.
        """
        if split not in SPLITS:
            raise KgError(f"unknown split {split!r}")
        if self._frozen:
            raise FrozenError("cannot load into a frozen store")
        create = not self.vocab.frozen
        count = 0
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                fields = line.rstrip("\r\n").split("\t")
                if len(fields) != 3:
                    raise TripleParseError(
                        path, line_no, f"expected 3 tab-separated fields, got {len(fields)}"
                    )
                h_name, r_name, t_name = fields
                try:
                    h = self.vocab.entity_id(h_name, create=create)
                    r = self.vocab.relation_id(r_name, create=create)
                    t = self.vocab.entity_id(t_name, create=create)
                except KeyError as exc:
                    self.skipped[split] += 1
                    logger.warning("%s:%d: unknown name %s, triple skipped", path, line_no, exc)
                    continue
                self.add(Triple(h, r, t), split)
                count += 1
        return count

    def add(self, triple: Triple, split: str) -> None:
        if self._frozen:
            raise FrozenError("cannot add to a frozen store")
        self.splits[split].append(triple)
        h, r, t = triple
        if split == "train":
            self._tails_by_head_rel.setdefault((h, r), set()).add(t)
            self._heads_by_tail_rel.setdefault((t, r), set()).add(h)
            self._train_by_rel.setdefault(r, []).append(triple)
        self._known_tails.setdefault((h, r), set()).add(t)
        self._known_heads.setdefault((t, r), set()).add(h)

    def finalize_vocabulary(self) -> None:
        """Register reciprocal relations and freeze the vocabulary.

        Call after the train split is loaded and before valid/test, so the
        held-out splits cannot grow the id space.
        """
        self.vocab.register_reciprocals()
        self.vocab.freeze()

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def num_entities(self) -> int:
        return self.vocab.num_entities

    # -- lookups ----------------------------------------------------------

    def _normalize(self, relation: int, direction: str) -> tuple[int, str]:
        # A reciprocal relation is the base relation read the other way.
        if self.vocab.is_reciprocal(relation):
            relation = self.vocab.base_relation(relation)
            direction = INVERSE if direction == FORWARD else FORWARD
        return relation, direction

    def neighbors(self, bound: int, relation: int, direction: str = FORWARD) -> set[int]:
        """Train-split completions of (bound, relation, ?) or (?, relation, bound)."""
        relation, direction = self._normalize(relation, direction)
        if direction == FORWARD:
            found = self._tails_by_head_rel.get((bound, relation))
        elif direction == INVERSE:
            found = self._heads_by_tail_rel.get((bound, relation))
        else:
            raise KgError(f"unknown direction {direction!r}")
        return found if found is not None else set()

    def known_answers(self, bound: int, relation: int, direction: str = FORWARD) -> set[int]:
        """Completions across train+valid+test; the filtered-ranking removal set."""
        relation, direction = self._normalize(relation, direction)
        if direction == FORWARD:
            found = self._known_tails.get((bound, relation))
        elif direction == INVERSE:
            found = self._known_heads.get((bound, relation))
        else:
            raise KgError(f"unknown direction {direction!r}")
        return found if found is not None else set()

    def train_triples_for(self, relation: int) -> list[Triple]:
        return self._train_by_rel.get(relation, [])

    def validate_indexes(self) -> None:
        """Check index/split consistency; raises KgError on violation."""
        train_unique = set(self.splits["train"])
        indexed = sum(len(v) for v in self._tails_by_head_rel.values())
        if indexed != len(train_unique):
            raise KgError("head-relation index size does not match unique train triples")
        indexed = sum(len(v) for v in self._heads_by_tail_rel.values())
        if indexed != len(train_unique):
            raise KgError("tail-relation index size does not match unique train triples")
        union = {t for s in SPLITS for t in self.splits[s]}
        known = sum(len(v) for v in self._known_tails.values())
        if known != len(union):
            raise KgError("known-answer index size does not match split union")
        for h, r, t in union:
            if t not in self.known_answers(h, r, FORWARD):
                raise KgError(f"triple {(h, r, t)} missing from known-answer index")
        for h, r, t in train_unique:
            if t not in self.neighbors(h, r, FORWARD) or h not in self.neighbors(t, r, INVERSE):
                raise KgError(f"train triple {(h, r, t)} missing from adjacency")


def load_kg(
    train_path: str,
    valid_path: Optional[str] = None,
    test_path: Optional[str] = None,
) -> IndexedKG:
    """Standard load sequence: train (open vocab), freeze, then valid/test."""
    kg = IndexedKG()
    kg.load_triples(train_path, "train")
    kg.finalize_vocabulary()
    if valid_path:
        kg.load_triples(valid_path, "valid")
    if test_path:
        kg.load_triples(test_path, "test")
    kg.freeze()
    return kg
