"""Rules rendered as natural-language premise/hypothesis pairs and explanations.

Every relation carries a curated template ("[H]'s nationality is [T]"),
expected head/tail entity types, and optional per-slot rendering forms
(a nationality tail renders as the demonym: America -> American). Rule
variables get placeholder names drawn from per-type pools; a variable
shared between atoms keeps one name, distinct variables never collide,
which is what makes the sentences read as one coherent argument.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .kg import Vocabulary
from .rules import Atom, Constant, Rule


class SentenceError(Exception):
    pass


class MetaError(SentenceError):
    """Bad relation metadata: duplicates, missing slots."""


class ConversionError(SentenceError):
    """A rule that cannot be rendered (type conflict, missing metadata)."""


HEAD_SLOT = "[H]"
TAIL_SLOT = "[T]"

NAME_FORM = "name"
DEMONYM_FORM = "demonym"

MIN_POOL_SIZE = 4  # a size-3 chain rule binds at most 4 variables


@dataclass(frozen=True)
class RelationMeta:
    relation: str
    head_type: str
    tail_type: str
    template: str
    head_form: str = NAME_FORM
    tail_form: str = NAME_FORM

    def __post_init__(self) -> None:
        if self.template.count(HEAD_SLOT) != 1 or self.template.count(TAIL_SLOT) != 1:
            raise MetaError(
                f"template for {self.relation!r} must contain exactly one "
                f"{HEAD_SLOT} and one {TAIL_SLOT}: {self.template!r}"
            )
        for form in (self.head_form, self.tail_form):
            if form not in (NAME_FORM, DEMONYM_FORM):
                raise MetaError(f"unknown slot form {form!r} for {self.relation!r}")

    def render(self, head_text: str, tail_text: str) -> str:
        return self.template.replace(HEAD_SLOT, head_text).replace(TAIL_SLOT, tail_text)


@dataclass
class EntityLexicon:
    """Ordered placeholder-name pools per entity type, plus demonyms."""

    pools: dict[str, list[str]]
    demonyms: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for etype, names in self.pools.items():
            if len(set(names)) < MIN_POOL_SIZE:
                raise MetaError(
                    f"type {etype!r} needs at least {MIN_POOL_SIZE} distinct names"
                )
        self._demonym_inverse = {v: k for k, v in self.demonyms.items()}

    def surface(self, name: str, form: str) -> str:
        if form == DEMONYM_FORM:
            return self.demonyms.get(name, name)
        return name

    def base_name(self, surface: str) -> str:
        """Undo a demonym, for parsing names back out of sentences."""
        return self._demonym_inverse.get(surface, surface)


@dataclass(frozen=True)
class SentencePair:
    premise: str
    hypothesis: str


def load_relation_meta(path: str, vocab: Optional[Vocabulary] = None):
    """Load the curated metadata file.

    Returns (table, missing) where table maps relation id -> RelationMeta
    when a vocabulary is given (name -> RelationMeta otherwise) and missing
    lists base relations of the vocabulary without an entry.
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    by_name: dict[str, RelationMeta] = {}
    for entry in raw:
        constraints = entry.get("constraints") or {}
        meta = RelationMeta(
            relation=entry["relation"],
            head_type=entry["head_type"],
            tail_type=entry["tail_type"],
            template=entry["template"].rstrip(". "),
            head_form=constraints.get("head_form", NAME_FORM),
            tail_form=constraints.get("tail_form", NAME_FORM),
        )
        if meta.relation in by_name:
            raise MetaError(f"duplicate metadata entry for {meta.relation!r}")
        by_name[meta.relation] = meta
    if vocab is None:
        return by_name, []
    table: dict[int, RelationMeta] = {}
    missing: list[str] = []
    for rid in range(vocab.base_relation_count):
        name = vocab.relation_name(rid)
        if name in by_name:
            table[rid] = by_name[name]
        else:
            missing.append(name)
    return table, missing


def load_lexicon(path: str) -> EntityLexicon:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return EntityLexicon(pools=raw["types"], demonyms=raw.get("demonyms", {}))


def _atoms_in_order(rule: Rule) -> list[Atom]:
    return [rule.head, *rule.body]


def _slot_requirements(rule: Rule, meta: dict[int, RelationMeta]):
    """Yield (variable label, required type, relation name) over all slots,
    head atom first, subject before object."""
    for atom in _atoms_in_order(rule):
        if atom.relation not in meta:
            raise ConversionError(
                f"no metadata for relation id {atom.relation}"
            )
        info = meta[atom.relation]
        for term, etype in ((atom.subject, info.head_type), (atom.object, info.tail_type)):
            if isinstance(term, Constant):
                raise ConversionError(
                    "constant-bearing rules are not converted to sentences; "
                    "eliminate them first"
                )
            yield term.label, etype, info.relation


def assign_placeholders(
    rule: Rule, meta: dict[int, RelationMeta], lexicon: EntityLexicon
) -> dict[str, str]:
    """Give each variable one placeholder name of its resolved type.

    Types must agree everywhere a variable appears; names are taken
    first-fit from the type's pool in order of variable appearance, and a
    name is never reused for a second variable.
    """
    resolved: dict[str, tuple[str, str]] = {}  # var -> (type, relation that set it)
    order: list[str] = []
    for label, etype, relation in _slot_requirements(rule, meta):
        if label not in resolved:
            resolved[label] = (etype, relation)
            order.append(label)
        elif resolved[label][0] != etype:
            raise ConversionError(
                f"variable {label!r} typed {resolved[label][0]!r} by "
                f"{resolved[label][1]!r} but {etype!r} by {relation!r}"
            )
    binding: dict[str, str] = {}
    used: set[str] = set()
    for label in order:
        etype = resolved[label][0]
        pool = lexicon.pools.get(etype)
        if pool is None:
            raise ConversionError(f"no placeholder pool for type {etype!r}")
        name = next((n for n in pool if n not in used), None)
        if name is None:
            raise ConversionError(f"placeholder pool for {etype!r} exhausted")
        binding[label] = name
        used.add(name)
    return binding


def _render_atom(
    atom: Atom,
    binding: dict[str, str],
    meta: dict[int, RelationMeta],
    lexicon: EntityLexicon,
) -> str:
    info = meta[atom.relation]
    head_name = binding[atom.subject.label]  # type: ignore[union-attr]
    tail_name = binding[atom.object.label]  # type: ignore[union-attr]
    return info.render(
        lexicon.surface(head_name, info.head_form),
        lexicon.surface(tail_name, info.tail_form),
    )


def rule_to_sentence_pair(
    rule: Rule, meta: dict[int, RelationMeta], lexicon: EntityLexicon
) -> SentencePair:
    """Premise from the body atoms (in body order), hypothesis from the head."""
    binding = assign_placeholders(rule, meta, lexicon)
    body_parts = [_render_atom(atom, binding, meta, lexicon) for atom in rule.body]
    return SentencePair(
        premise=". ".join(body_parts) + ".",
        hypothesis=_render_atom(rule.head, binding, meta, lexicon) + ".",
    )


def _readable(name: str) -> bool:
    # Freebase machine ids (/m/02jx1) are not worth reading back to a user.
    return bool(name) and not name.startswith("/")


def explain(
    entity: int,
    query,
    fired_rules: list[Rule],
    meta: dict[int, RelationMeta],
    lexicon: EntityLexicon,
    vocab: Vocabulary,
    reciprocal: bool = False,
    entity_labels: Optional[dict[int, str]] = None,
) -> list[str]:
    """One explanation per fired rule, strongest rule first.

    Each reads "<premise> Therefore, <hypothesis>." with the query entity
    and the answer substituted for the head variables wherever the
    vocabulary (or an optional label map) offers a readable name;
    intermediate variables keep their placeholder names.

    ``reciprocal`` marks a head-side query, where the bound entity sits in
    the head's object slot instead of its subject slot.
    """
    def display(eid: int) -> Optional[str]:
        if entity_labels and eid in entity_labels:
            return entity_labels[eid]
        name = vocab.entity_name(eid)
        return name if _readable(name) else None

    out: list[str] = []
    for rule in sorted(fired_rules, key=lambda r: (-r.confidence, r.rule_id)):
        binding = assign_placeholders(rule, meta, lexicon)
        subject_label = rule.head.subject.label  # type: ignore[union-attr]
        object_label = rule.head.object.label  # type: ignore[union-attr]
        bound_label, answer_label = (
            (object_label, subject_label) if reciprocal else (subject_label, object_label)
        )
        for label, eid in ((bound_label, query.bound), (answer_label, entity)):
            name = display(eid)
            if name is not None:
                binding[label] = name
        body_parts = [_render_atom(atom, binding, meta, lexicon) for atom in rule.body]
        hypothesis = _render_atom(rule.head, binding, meta, lexicon)
        out.append(". ".join(body_parts) + ". Therefore, " + hypothesis + ".")
    return out


def sentence_pairs(
    rules: Iterable[Rule],
    meta: dict[int, RelationMeta],
    lexicon: EntityLexicon,
) -> tuple[list[tuple[int, SentencePair]], list[tuple[int, str]]]:
    """Convert many rules; returns (pairs, failures) with failure reasons."""
    pairs: list[tuple[int, SentencePair]] = []
    failures: list[tuple[int, str]] = []
    for rule in rules:
        try:
            pairs.append((rule.rule_id, rule_to_sentence_pair(rule, meta, lexicon)))
        except ConversionError as exc:
            failures.append((rule.rule_id, str(exc)))
    return pairs, failures
