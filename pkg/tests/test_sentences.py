import random
import re

import pytest

from kgfuse.grounding import Query
from kgfuse.kg import load_kg
from kgfuse.rules import load_rules, parse_rule_line
from kgfuse.sentences import (
    ConversionError,
    EntityLexicon,
    MetaError,
    RelationMeta,
    assign_placeholders,
    explain,
    load_lexicon,
    load_relation_meta,
    rule_to_sentence_pair,
    sentence_pairs,
)

from conftest import toy_path


@pytest.fixture(scope="module")
def toy():
    kg = load_kg(toy_path("train.txt"), toy_path("valid.txt"), toy_path("test.txt"))
    meta, missing = load_relation_meta(toy_path("meta.json"), kg.vocab)
    assert not missing
    lexicon = load_lexicon(toy_path("lexicon.json"))
    rules = load_rules(toy_path("rules.tsv"), kg.vocab)
    return kg, meta, lexicon, rules


class TestLoadRelationMeta:
    def test_toy_table_complete(self, toy):
        kg, meta, _, _ = toy
        assert len(meta) == kg.vocab.base_relation_count
        nationality = meta[kg.vocab.relation_id("nationality")]
        assert nationality.head_type == "Person"
        assert nationality.tail_type == "Country"
        assert nationality.tail_form == "demonym"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "meta.json"
        path.write_text("[]")
        table, _ = load_relation_meta(str(path))
        assert table == {}

    def test_duplicate_relation_rejected(self, tmp_path):
        entry = '{"relation": "r", "head_type": "A", "tail_type": "B", "template": "[H] x [T]"}'
        path = tmp_path / "meta.json"
        path.write_text(f"[{entry}, {entry}]")
        with pytest.raises(MetaError):
            load_relation_meta(str(path))

    def test_template_must_have_both_slots(self):
        with pytest.raises(MetaError):
            RelationMeta("r", "A", "B", "[H] has no tail")
        with pytest.raises(MetaError):
            RelationMeta("r", "A", "B", "[H] both [T] and [T]")

    def test_missing_relations_reported(self, toy, tmp_path):
        kg, *_ = toy
        path = tmp_path / "meta.json"
        path.write_text(
            '[{"relation": "nationality", "head_type": "Person", '
            '"tail_type": "Country", "template": "[H] of [T]"}]'
        )
        table, missing = load_relation_meta(str(path), kg.vocab)
        assert len(table) == 1
        assert len(missing) == kg.vocab.base_relation_count - 1


class TestLexicon:
    def test_pool_minimum_enforced(self):
        with pytest.raises(MetaError):
            EntityLexicon(pools={"Person": ["OnlyOne", "Two", "Three"]})

    def test_demonym_surface_and_inverse(self, toy):
        _, _, lexicon, _ = toy
        assert lexicon.surface("America", "demonym") == "American"
        assert lexicon.surface("America", "name") == "America"
        assert lexicon.base_name("American") == "America"
        assert lexicon.surface("Atlantis", "demonym") == "Atlantis"


class TestAssignPlaceholders:
    def test_paper_pairing(self, toy):
        kg, meta, lexicon, rules = toy
        binding = assign_placeholders(rules[0], meta, lexicon)  # nationality <= place_of_birth
        assert binding == {"X": "Jack", "Y": "America"}

    def test_distinct_same_type_variables_get_distinct_names(self, toy):
        kg, meta, lexicon, _ = toy
        # X, B are both Person; A, Y are both School; no name may repeat
        rule = parse_rule_line(
            "1\t1\t0.5\tstudied_at(X,Y) <= studied_at(X,A), studied_at(B,A), studied_at(B,Y)",
            kg.vocab,
        )
        binding = assign_placeholders(rule, meta, lexicon)
        assert binding["X"] != binding["B"]
        assert binding["A"] != binding["Y"]
        assert len(set(binding.values())) == 4

    def test_deterministic_first_fit(self, toy):
        kg, meta, lexicon, _ = toy
        rule = parse_rule_line("1\t1\t0.5\tspeaks(X,Y) <= speaks(X,Y)", kg.vocab)
        assert assign_placeholders(rule, meta, lexicon) == {
            "X": "Jack",
            "Y": "Esperanto",
        }

    def test_type_conflict_names_variable_and_relations(self, toy):
        kg, meta, lexicon, _ = toy
        # Y is a Language in the head but a Country in the body
        rule = parse_rule_line("1\t1\t0.5\tspeaks(X,Y) <= lives_in(X,Y)", kg.vocab)
        with pytest.raises(ConversionError) as exc:
            assign_placeholders(rule, meta, lexicon)
        message = str(exc.value)
        assert "'Y'" in message and "speaks" in message and "lives_in" in message


class TestSentencePair:
    def test_paper_nationality_example(self, toy):
        kg, meta, lexicon, rules = toy
        pair = rule_to_sentence_pair(rules[0], meta, lexicon)
        assert pair.premise == "Jack's place of birth is America."
        assert pair.hypothesis == "Jack's nationality is American."

    def test_two_atom_body_shares_intermediate(self, toy):
        kg, meta, lexicon, rules = toy
        pair = rule_to_sentence_pair(rules[2], meta, lexicon)  # speaks <= lives_in, official_language
        assert pair.premise == (
            "Jack lives in America. The official language of America is Esperanto."
        )
        assert pair.hypothesis == "Jack speaks Esperanto."

    def test_identity_rule_premise_equals_hypothesis(self, toy):
        kg, meta, lexicon, _ = toy
        rule = parse_rule_line("1\t1\t0.5\tspeaks(X,Y) <= speaks(X,Y)", kg.vocab)
        pair = rule_to_sentence_pair(rule, meta, lexicon)
        assert pair.premise == pair.hypothesis

    def test_determinism(self, toy):
        kg, meta, lexicon, rules = toy
        for rule in rules:
            first = rule_to_sentence_pair(rule, meta, lexicon)
            second = rule_to_sentence_pair(rule, meta, lexicon)
            assert first == second

    def test_batch_conversion_reports_failures(self, toy):
        kg, meta, lexicon, rules = toy
        bad = parse_rule_line("1\t1\t0.5\tspeaks(X,Y) <= lives_in(X,Y)", kg.vocab, rule_id=99)
        pairs, failures = sentence_pairs([*rules, bad], meta, lexicon)
        assert len(pairs) == len(rules)
        assert failures and failures[0][0] == 99


def extract_slot_names(sentence, meta_entry, lexicon):
    """Parse the two slot fills back out of a rendered sentence."""
    pattern = re.escape(meta_entry.template)
    pattern = pattern.replace(re.escape("[H]"), "(?P<h>.+?)")
    pattern = pattern.replace(re.escape("[T]"), "(?P<t>.+?)")
    match = re.fullmatch(pattern, sentence)
    assert match, f"{sentence!r} does not match {meta_entry.template!r}"
    return lexicon.base_name(match.group("h")), lexicon.base_name(match.group("t"))


class TestPlaceholderSoundness:
    def test_structure_recoverable_from_sentences(self, toy):
        """Shared variables render as one name, distinct as different names,
        recovered by parsing the sentences back against the templates."""
        from conftest import random_typed_rule

        kg, meta, lexicon, _ = toy
        rng = random.Random(211)
        checked = 0
        for _ in range(150):
            rule = random_typed_rule(rng, kg, meta)
            pair = rule_to_sentence_pair(rule, meta, lexicon)
            checked += 1
            name_of: dict[str, str] = {}
            seen_names: dict[str, str] = {}
            sentences = pair.premise[:-1].split(". ") + [pair.hypothesis[:-1]]
            for atom, sentence in zip([*rule.body, rule.head], [*sentences[:-1], sentences[-1]]):
                h_name, t_name = extract_slot_names(sentence, meta[atom.relation], lexicon)
                for label, name in ((atom.subject.label, h_name), (atom.object.label, t_name)):
                    if label in name_of:
                        assert name_of[label] == name  # shared variable, same name
                    else:
                        assert name not in seen_names  # distinct variable, fresh name
                        name_of[label] = name
                        seen_names[name] = label
        assert checked >= 100


class TestExplain:
    def test_paper_therefore_sentence(self, toy):
        kg, meta, lexicon, rules = toy
        query = Query(kg.vocab.entity_id("Jack"), kg.vocab.relation_id("nationality"))
        texts = explain(
            kg.vocab.entity_id("America"), query, [rules[0]], meta, lexicon, kg.vocab
        )
        assert texts == [
            "Jack's place of birth is America. Therefore, Jack's nationality is American."
        ]

    def test_no_fired_rules_no_explanations(self, toy):
        kg, meta, lexicon, _ = toy
        query = Query(kg.vocab.entity_id("Jack"), kg.vocab.relation_id("nationality"))
        assert explain(kg.vocab.entity_id("America"), query, [], meta, lexicon, kg.vocab) == []

    def test_three_rules_ordered_by_confidence(self, toy):
        kg, meta, lexicon, rules = toy
        nationality_rules = [rules[0], rules[1], rules[3]]  # 0.9, 0.6, 0.8
        query = Query(kg.vocab.entity_id("Bob"), kg.vocab.relation_id("nationality"))
        texts = explain(
            kg.vocab.entity_id("Germany"), query, nationality_rules, meta, lexicon, kg.vocab
        )
        assert len(texts) == 3
        assert texts[0] == (
            "Bob's place of birth is Germany. Therefore, Bob's nationality is German."
        )
        assert texts[1].startswith("Bob was born in the city of Paris.")
        assert texts[2] == "Bob lives in Germany. Therefore, Bob's nationality is German."

    def test_reciprocal_query_substitutes_other_slot(self, toy):
        kg, meta, lexicon, rules = toy
        inv = kg.vocab.reciprocal(kg.vocab.relation_id("nationality"))
        query = Query(kg.vocab.entity_id("America"), inv)
        texts = explain(
            kg.vocab.entity_id("Jack"), query, [rules[0]], meta, lexicon, kg.vocab,
            reciprocal=True,
        )
        assert texts == [
            "Jack's place of birth is America. Therefore, Jack's nationality is American."
        ]

    def test_unreadable_names_keep_placeholders(self, toy):
        kg, meta, lexicon, rules = toy
        query = Query(kg.vocab.entity_id("Jack"), kg.vocab.relation_id("nationality"))

        class MidVocab:
            """Vocabulary whose names are all Freebase machine ids."""

            def entity_name(self, eid):
                return "/m/0something"

        texts = explain(
            kg.vocab.entity_id("America"), query, [rules[0]], meta, lexicon, MidVocab()
        )
        # nothing readable to substitute, so the placeholder pair stays
        assert texts == [
            "Jack's place of birth is America. Therefore, Jack's nationality is American."
        ]

    def test_entity_labels_override_unreadable_names(self, toy):
        kg, meta, lexicon, rules = toy
        query = Query(kg.vocab.entity_id("Jack"), kg.vocab.relation_id("nationality"))

        class MidVocab:
            def entity_name(self, eid):
                return "/m/0something"

        labels = {
            kg.vocab.entity_id("Jack"): "Marie",
            kg.vocab.entity_id("America"): "France",
        }
        texts = explain(
            kg.vocab.entity_id("America"), query, [rules[0]], meta, lexicon, MidVocab(),
            entity_labels=labels,
        )
        assert texts == [
            "Marie's place of birth is France. Therefore, Marie's nationality is French."
        ]
