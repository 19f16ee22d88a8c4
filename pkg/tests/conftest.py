import os
import random

import pytest

from kgfuse.kg import IndexedKG, Triple
from kgfuse.rules import parse_rule_line

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
TOY = os.path.join(FIXTURES, "toy")
MIDS = os.path.join(FIXTURES, "mids")


def toy_path(name: str) -> str:
    return os.path.join(TOY, name)


def build_kg(train, valid=(), test=()):
    """IndexedKG from in-memory (head, relation, tail) name triples.

    All names are interned up front, so held-out splits may mention
    entities absent from train (unlike the strict file-loading path).
    """
    kg = IndexedKG()
    for h, r, t in (*train, *valid, *test):
        kg.vocab.entity_id(h, create=True)
        kg.vocab.relation_id(r, create=True)
        kg.vocab.entity_id(t, create=True)
    for h, r, t in train:
        kg.add(
            Triple(kg.vocab.entity_id(h), kg.vocab.relation_id(r), kg.vocab.entity_id(t)),
            "train",
        )
    kg.finalize_vocabulary()
    for split, triples in (("valid", valid), ("test", test)):
        for h, r, t in triples:
            kg.add(
                Triple(kg.vocab.entity_id(h), kg.vocab.relation_id(r), kg.vocab.entity_id(t)),
                split,
            )
    kg.freeze()
    return kg


def random_kg(rng: random.Random, max_entities: int = 30, max_relations: int = 8):
    """A random train-only graph. Entity names are multi-letter on purpose,
    so they can never be mistaken for rule variables."""
    n_entities = rng.randint(4, max_entities)
    n_relations = rng.randint(1, max_relations)
    entities = [f"ent{i}" for i in range(n_entities)]
    relations = [f"rel{i}" for i in range(n_relations)]
    n_triples = rng.randint(n_entities, 4 * n_entities)
    triples = set()
    while len(triples) < n_triples:
        triples.add(
            (rng.choice(entities), rng.choice(relations), rng.choice(entities))
        )
    kg = IndexedKG()
    # intern every name up front so sparse graphs still cover the id space
    for name in entities:
        kg.vocab.entity_id(name, create=True)
    for name in relations:
        kg.vocab.relation_id(name, create=True)
    for h, r, t in sorted(triples):
        kg.add(Triple(kg.vocab.entity_id(h), kg.vocab.relation_id(r), kg.vocab.entity_id(t)), "train")
    kg.finalize_vocabulary()
    kg.freeze()
    return kg


def random_chain_rule(rng: random.Random, kg: IndexedKG, rule_id: int = 0):
    """A random variable-pure chain rule over the graph's relations.

    Atoms are written in either direction, and intermediate chain variables
    occasionally reuse an earlier variable, which exercises the
    repeated-variable consistency path in grounding.
    """
    length = rng.randint(1, 3)
    relations = [kg.vocab.relation_name(rng.randrange(kg.vocab.base_relation_count))
                 for _ in range(length + 1)]
    chain = ["X"]
    fresh = iter("ABC")
    for i in range(1, length):
        if rng.random() < 0.15:
            chain.append(rng.choice(chain))
        else:
            chain.append(next(fresh))
    chain.append("X" if (length > 1 and rng.random() < 0.1) else "Y")

    body_parts = []
    for i in range(length):
        left, right = chain[i], chain[i + 1]
        if rng.random() < 0.5:
            body_parts.append(f"{relations[i + 1]}({left},{right})")
        else:
            body_parts.append(f"{relations[i + 1]}({right},{left})")
    head_object = chain[-1]
    text = f"10\t7\t0.7\t{relations[0]}(X,{head_object}) <= {', '.join(body_parts)}"
    return parse_rule_line(text, kg.vocab, rule_id=rule_id)


def random_typed_rule(rng: random.Random, kg, meta, rule_id: int = 0):
    """A random chain rule whose variable types line up with the relation
    metadata, so sentence conversion always succeeds."""
    moves: dict[str, list] = {}
    for rid, entry in meta.items():
        name = kg.vocab.relation_name(rid)
        moves.setdefault(entry.head_type, []).append((name, True, entry.tail_type))
        moves.setdefault(entry.tail_type, []).append((name, False, entry.head_type))
    for _ in range(500):
        head_rid = rng.choice(list(meta))
        head = meta[head_rid]
        length = rng.randint(1, 3)
        chain = ["X"] + [c for c, _ in zip("AB", range(length - 1))] + ["Y"]
        current_type = head.head_type
        atoms = []
        for i in range(length):
            options = moves.get(current_type, [])
            if i == length - 1:
                options = [o for o in options if o[2] == head.tail_type]
            if not options:
                atoms = None
                break
            rel, forward, current_type = rng.choice(options)
            left, right = chain[i], chain[i + 1]
            atoms.append(f"{rel}({left},{right})" if forward else f"{rel}({right},{left})")
        if atoms is None:
            continue
        text = (
            f"1\t1\t0.5\t{kg.vocab.relation_name(head_rid)}(X,Y) <= {', '.join(atoms)}"
        )
        return parse_rule_line(text, kg.vocab, rule_id=rule_id)
    raise RuntimeError("could not generate a type-consistent rule")


@pytest.fixture
def toy_kg():
    from kgfuse.kg import load_kg

    return load_kg(toy_path("train.txt"), toy_path("valid.txt"), toy_path("test.txt"))
