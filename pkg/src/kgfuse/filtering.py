"""Keep-or-drop gating of rules from NLI probabilities and graph confidence.

Each rule's plausibility is::

    final = entailment + gamma * confidence * neutral

and the rule survives only when final exceeds the threshold; a surviving
rule keeps its original confidence, an eliminated one scores 0 and is
excluded from grounding and explanation. Gating applies only to rules
whose head relation is in the enabled set; everything else passes through
untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .rules import Rule, RuleSet


class FilterError(Exception):
    pass


@dataclass(frozen=True)
class NliScores:
    """Class probabilities from a premise/hypothesis entailment judgment."""

    entailment: float
    neutral: float
    contradiction: float

    def __post_init__(self) -> None:
        for name in ("entailment", "neutral", "contradiction"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise FilterError(f"{name} probability {p} outside [0, 1]")
        total = self.entailment + self.neutral + self.contradiction
        if abs(total - 1.0) > 1e-6:
            raise FilterError(f"probabilities sum to {total}, expected 1")


@dataclass(frozen=True)
class FilterConfig:
    gamma: float = 1.0
    threshold: float = 0.5
    enabled_relations: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise FilterError(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 <= self.threshold <= 1.0 + self.gamma:
            raise FilterError(
                f"threshold {self.threshold} outside achievable range [0, {1.0 + self.gamma}]"
            )


def final_score(nli: NliScores, confidence: float, gamma: float) -> float:
    """Plausibility of a rule: entailment, plus graph confidence weighted by
    how neutral the NLI judgment is. A contradicted rule scores near zero."""
    return nli.entailment + gamma * confidence * nli.neutral


def effective_confidence(final: float, threshold: float, confidence: float) -> float:
    """Original confidence if the rule clears the threshold (strictly), else 0."""
    return confidence if final > threshold else 0.0


@dataclass(frozen=True)
class RuleAudit:
    rule_id: int
    enabled: bool
    final_score: Optional[float]
    effective_confidence: float


@dataclass
class FilteredRuleSet:
    """A RuleSet with per-rule effective confidences after NLI gating.

    Groups are re-sorted on effective confidence; eliminated rules stay in
    the set (for audit) but never reach grounding or explanations.
    """

    rules: list[Rule]
    effective: dict[int, float]
    audits: dict[int, RuleAudit]
    config: FilterConfig
    groups: dict[int, list[Rule]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.groups:
            by_rel: dict[int, list[Rule]] = {}
            for rule in self.rules:
                by_rel.setdefault(rule.head.relation, []).append(rule)
            self.groups = {
                rel: sorted(group, key=lambda r: -self.effective[r.rule_id])
                for rel, group in by_rel.items()
            }

    def rules_for(self, relation: int) -> list[Rule]:
        return self.groups.get(relation, [])

    def scored_rules_for(self, relation: int) -> list[tuple[Rule, float]]:
        return [
            (r, self.effective[r.rule_id])
            for r in self.rules_for(relation)
            if self.effective[r.rule_id] > 0.0
        ]

    def surviving_rules(self) -> list[Rule]:
        """Rules that were not eliminated by the gate. Disabled-relation
        rules always survive, whatever their confidence."""
        return [r for r in self.rules if not self.eliminated(r.rule_id)]

    def eliminated(self, rule_id: int) -> bool:
        audit = self.audits[rule_id]
        return audit.enabled and audit.final_score is not None and \
            audit.final_score <= self.config.threshold

    def head_relations(self) -> list[int]:
        return sorted(self.groups)

    def __len__(self) -> int:
        return len(self.rules)


def filter_rules(
    ruleset: Union[RuleSet, FilteredRuleSet],
    nli_table: Mapping[int, NliScores],
    config: FilterConfig,
) -> FilteredRuleSet:
    """Apply the gate to every rule under an enabled head relation.

    Scores are always computed from the rule's original confidence, so
    filtering an already-filtered set with the same config is a no-op.
    Raises FilterError when an enabled-relation rule has no NLI record.
    """
    missing = [
        rule.rule_id
        for rule in ruleset.rules
        if rule.head.relation in config.enabled_relations and rule.rule_id not in nli_table
    ]
    if missing:
        raise FilterError(f"missing NLI records for rule ids {sorted(missing)}")

    effective: dict[int, float] = {}
    audits: dict[int, RuleAudit] = {}
    for rule in ruleset.rules:
        enabled = rule.head.relation in config.enabled_relations
        if enabled:
            final = final_score(nli_table[rule.rule_id], rule.confidence, config.gamma)
            eff = effective_confidence(final, config.threshold, rule.confidence)
        else:
            final = None
            eff = rule.confidence
        effective[rule.rule_id] = eff
        audits[rule.rule_id] = RuleAudit(rule.rule_id, enabled, final, eff)
    return FilteredRuleSet(
        rules=list(ruleset.rules), effective=effective, audits=audits, config=config
    )
