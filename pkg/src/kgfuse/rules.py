"""Typed Horn rules parsed from AnyBurl-style rule files.

A rule line has four tab-separated columns::

    predicted<TAB>correctly_predicted<TAB>confidence<TAB>rule text

and the rule text reads ``head(A,B) <= atom(A,C), atom(C,B)``. Arguments
that are single letters (or wrapped in square brackets) are variables;
anything else is an entity constant resolved against the vocabulary.

Variable-pure rule bodies must form a connected chain from the head's
subject variable to its object variable. Body atoms written against the
chain direction get an ``inverted`` bit instead of being rewritten, so
grounding stays a left-to-right walk and the original text survives
round trips.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

from .kg import Vocabulary

logger = logging.getLogger(__name__)

MAX_BODY_ATOMS = 3


class RuleError(Exception):
    """Base error for rule handling."""


class RuleParseError(RuleError):
    """Malformed rule text or unknown relation/entity name."""


class RuleSizeError(RuleError):
    """Body longer than the supported maximum of 3 atoms."""


class RuleChainError(RuleError):
    """Variable-pure body that is not a connected head-to-head chain."""


@dataclass(frozen=True)
class Variable:
    label: str


@dataclass(frozen=True)
class Constant:
    entity: int


Term = Union[Variable, Constant]


@dataclass(frozen=True)
class Atom:
    relation: int
    subject: Term
    object: Term
    # True when the body chain enters this atom at its object and exits at
    # its subject. Meaningless on head atoms and constant-bearing bodies.
    inverted: bool = False

    def variables(self) -> list[str]:
        out = []
        if isinstance(self.subject, Variable):
            out.append(self.subject.label)
        if isinstance(self.object, Variable):
            out.append(self.object.label)
        return out


@dataclass(frozen=True)
class Rule:
    rule_id: int
    head: Atom
    body: tuple[Atom, ...]
    predicted: int
    correctly_predicted: int
    confidence: float

    @property
    def is_variable_pure(self) -> bool:
        for atom in (self.head, *self.body):
            if isinstance(atom.subject, Constant) or isinstance(atom.object, Constant):
                return False
        return True

    def reversed(self) -> "Rule":
        """The same implication walked object-to-subject.

        Used to answer head-side (reciprocal) queries: the head's object
        variable becomes the bound one and the body is traversed right to
        left with every inversion bit flipped. Only meaningful for
        variable-pure rules.
        """
        head = Atom(self.head.relation, self.head.object, self.head.subject)
        body = tuple(
            replace(atom, inverted=not atom.inverted) for atom in reversed(self.body)
        )
        return replace(self, head=head, body=body)


def confidence(correctly_predicted: int, predicted: int) -> float:
    """Fraction of a rule's predictions that were correct on the train graph."""
    if predicted <= 0:
        raise RuleError("confidence undefined for predicted <= 0")
    return correctly_predicted / predicted


def _parse_term(token: str, vocab: Vocabulary) -> Term:
    token = token.strip()
    if not token:
        raise RuleParseError("empty argument")
    if len(token) == 1 and token.isalpha():
        return Variable(token)
    if token.startswith("[") and token.endswith("]") and len(token) > 2:
        return Variable(token[1:-1])
    try:
        return Constant(vocab.entity_id(token))
    except KeyError:
        raise RuleParseError(f"unknown entity {token!r}") from None


def _parse_atom(text: str, vocab: Vocabulary) -> Atom:
    text = text.strip()
    open_idx = text.find("(")
    if open_idx <= 0 or not text.endswith(")"):
        raise RuleParseError(f"malformed atom {text!r}")
    rel_name = text[:open_idx].strip()
    inner = text[open_idx + 1 : -1]
    args = inner.split(",")
    if len(args) != 2:
        raise RuleParseError(f"atom {text!r} must have exactly 2 arguments")
    try:
        relation = vocab.relation_id(rel_name)
    except KeyError:
        raise RuleParseError(f"unknown relation {rel_name!r}") from None
    return Atom(relation, _parse_term(args[0], vocab), _parse_term(args[1], vocab))


def _split_atoms(text: str) -> list[str]:
    """Split a comma-joined atom list without breaking inside parentheses."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise RuleParseError(f"unbalanced parentheses in {text!r}")
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    if depth != 0:
        raise RuleParseError(f"unbalanced parentheses in {text!r}")
    parts.append(text[start:])
    return parts


def normalize_chain(head: Atom, body: tuple[Atom, ...]) -> tuple[Atom, ...]:
    """Assign inversion bits by walking the body from the head's subject.

    Raises RuleChainError if the body is not a connected chain ending at
    the head's object variable.
    """
    current = head.subject.label  # type: ignore[union-attr]
    out = []
    for atom in body:
        subj_ok = isinstance(atom.subject, Variable) and atom.subject.label == current
        obj_ok = isinstance(atom.object, Variable) and atom.object.label == current
        if subj_ok:
            out.append(replace(atom, inverted=False))
            current = atom.object.label  # type: ignore[union-attr]
        elif obj_ok:
            out.append(replace(atom, inverted=True))
            current = atom.subject.label  # type: ignore[union-attr]
        else:
            raise RuleChainError(
                f"body atom does not contain the chain variable {current!r}"
            )
    if current != head.object.label:  # type: ignore[union-attr]
        raise RuleChainError(
            f"chain ends at {current!r}, not the head object variable"
        )
    return tuple(out)


def parse_rule_text(text: str, vocab: Vocabulary, rule_id: int = 0,
                    predicted: int = 0, correctly_predicted: int = 0,
                    conf: float = 0.0) -> Rule:
    """Parse the `head <= body` portion of a rule line."""
    if "<=" not in text:
        raise RuleParseError(f"missing '<=' in rule {text!r}")
    head_text, body_text = text.split("<=", 1)
    head = _parse_atom(head_text, vocab)
    body_atoms = tuple(_parse_atom(part, vocab) for part in _split_atoms(body_text))
    if not body_atoms:
        raise RuleParseError("empty rule body")
    if len(body_atoms) > MAX_BODY_ATOMS:
        raise RuleSizeError(
            f"body has {len(body_atoms)} atoms, maximum is {MAX_BODY_ATOMS}"
        )
    rule = Rule(rule_id, head, body_atoms, predicted, correctly_predicted, conf)
    if rule.is_variable_pure:
        rule = replace(rule, body=normalize_chain(head, body_atoms))
    return rule


def parse_rule_line(line: str, vocab: Vocabulary, rule_id: int = 0) -> Rule:
    """Parse one four-column rule line.

    The confidence column is stored as parsed; the prediction counts are
    kept for audit and are not used to recompute it.
    """
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 4:
        raise RuleParseError(f"expected 4 tab-separated columns, got {len(fields)}")
    try:
        predicted = int(fields[0])
        correct = int(fields[1])
        conf = float(fields[2])
    except ValueError as exc:
        raise RuleParseError(f"bad numeric column: {exc}") from None
    return parse_rule_text(
        fields[3], vocab, rule_id=rule_id,
        predicted=predicted, correctly_predicted=correct, conf=conf,
    )


def _term_text(term: Term, vocab: Vocabulary) -> str:
    if isinstance(term, Variable):
        return term.label
    return vocab.entity_name(term.entity)


def atom_text(atom: Atom, vocab: Vocabulary) -> str:
    return (
        f"{vocab.relation_name(atom.relation)}"
        f"({_term_text(atom.subject, vocab)},{_term_text(atom.object, vocab)})"
    )


def rule_text(rule: Rule, vocab: Vocabulary) -> str:
    body = ", ".join(atom_text(a, vocab) for a in rule.body)
    return f"{atom_text(rule.head, vocab)} <= {body}"


def rule_line(rule: Rule, vocab: Vocabulary) -> str:
    """Four-column line; reparsing it reproduces the rule exactly."""
    return (
        f"{rule.predicted}\t{rule.correctly_predicted}\t"
        f"{rule.confidence!r}\t{rule_text(rule, vocab)}"
    )


def load_rules(path: str, vocab: Vocabulary, on_error: str = "raise") -> list[Rule]:
    """Parse a rule file; rule ids are 0-based line indexes.

    on_error="skip" logs and drops unparseable lines (useful on raw rule
    dumps that mention names outside the train vocabulary).
    """
    if on_error not in ("raise", "skip"):
        raise ValueError(f"on_error must be 'raise' or 'skip', got {on_error!r}")
    rules: list[Rule] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for idx, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                rules.append(parse_rule_line(line, vocab, rule_id=idx))
            except RuleError as exc:
                if on_error == "raise":
                    raise RuleParseError(f"{path}:{idx + 1}: {exc}") from exc
                skipped += 1
    if skipped:
        logger.warning("%s: skipped %d unparseable rule lines", path, skipped)
    return rules


def drop_constant_rules(rules: Iterable[Rule]) -> list[Rule]:
    """Keep only rules whose every term is a variable, preserving order.

    Constant-bearing rules memorize specific graph facts instead of a
    reasoning path and are removed before any grounding or filtering.
    """
    return [r for r in rules if r.is_variable_pure]


@dataclass
class RuleSet:
    """Rules partitioned by head relation, each group sorted by confidence.

    Ties keep parse order (the sort is stable over the input list).
    """

    rules: list[Rule]
    groups: dict[int, list[Rule]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.groups:
            by_rel: dict[int, list[Rule]] = {}
            for rule in self.rules:
                by_rel.setdefault(rule.head.relation, []).append(rule)
            self.groups = {
                rel: sorted(group, key=lambda r: -r.confidence)
                for rel, group in by_rel.items()
            }

    def rules_for(self, relation: int) -> list[Rule]:
        return self.groups.get(relation, [])

    def scored_rules_for(self, relation: int) -> list[tuple[Rule, float]]:
        """(rule, confidence) pairs for grounding; zero-confidence rules
        derive nothing and are skipped."""
        return [
            (r, r.confidence) for r in self.rules_for(relation) if r.confidence > 0.0
        ]

    def head_relations(self) -> list[int]:
        return sorted(self.groups)

    def __len__(self) -> int:
        return len(self.rules)


def group_rules(rules: list[Rule]) -> RuleSet:
    return RuleSet(rules=list(rules))
