"""Pipeline stages from triple files to an evaluation report with explanations.

Stages exchange artifacts only through files in the output directory, so
any producer (including external models) can replace any stage. Data
artifacts are deterministic functions of the inputs; run metadata (hashes,
versions) goes to a separate manifest.

Stage order: ingest -> filter -> answer -> fuse -> evaluate -> explain.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

from . import __version__, interchange
from .filtering import FilterConfig, FilterError, filter_rules
from .fusion import combine, tune_flags
from .grounding import Query, direct_edge_mask, fired_rules, logical_answers
from .kg import IndexedKG, Triple, load_kg
from .metrics import build_report, filtered_rank_status, render_report
from .nli_client import fetch_nli_scores
from .rules import RuleSet, drop_constant_rules, group_rules, load_rules
from .sentences import explain, load_lexicon, load_relation_meta, sentence_pairs

logger = logging.getLogger(__name__)

STAGES = ("ingest", "filter", "answer", "fuse", "evaluate", "explain", "all")

ARTIFACTS = {
    "entities": "vocab_entities.tsv",
    "relations": "vocab_relations.tsv",
    "ingest_stats": "ingest_stats.json",
    "filtered_rules": "rules_filtered.tsv",
    "filter_audit": "filter_audit.json",
    "sentences": "sentence_pairs.tsv",
    "logical": "logical_scores.jsonl",
    "logical_valid": "logical_valid.jsonl",
    "flags": "flags.tsv",
    "ranking": "ranking.jsonl",
    "report": "report.json",
    "report_text": "report.txt",
    "explanations": "explanations.jsonl",
    "manifest": "manifest.json",
}


class PipelineError(Exception):
    pass


class ConfigError(PipelineError):
    pass


class MissingArtifactError(PipelineError):
    def __init__(self, path: str, stage: str):
        super().__init__(f"missing artifact {path}; run the {stage!r} stage first")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean from {text!r}")


@dataclass
class RunConfig:
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    rules: Optional[str] = None
    meta: Optional[str] = None
    lexicon: Optional[str] = None
    nli: Optional[str] = None
    nli_endpoint: Optional[str] = None
    gamma: float = 1.0
    threshold: float = 0.5
    relations: str = ""  # comma-separated names or ids; empty = filter off
    neural: Optional[str] = None
    neural_valid: Optional[str] = None
    flags: Optional[str] = None
    tune: bool = False
    queries: Optional[str] = None  # defaults to the test file
    logical: Optional[str] = None  # defaults to the answer-stage artifact
    ranking: Optional[str] = None  # defaults to the fuse-stage artifact
    labels: Optional[str] = None  # optional entity-label TSV for explanations
    top_logical: int = 0  # 0 = pass the full logical candidate set to fusion
    explain_top: int = 3
    mask_direct_edges: bool = False
    skip_bad_rules: bool = False
    out: str = "out"

    _PATH_KEYS = (
        "train", "valid", "test", "rules", "meta", "lexicon", "nli",
        "neural", "neural_valid", "flags", "queries", "logical", "labels",
        "ranking",
    )

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{line_no}: expected `key = value`")
                key, _, value = stripped.partition("=")
                values[key.strip()] = value.strip()
        return cls().with_overrides(values)

    def with_overrides(self, values: dict) -> "RunConfig":
        config = dataclasses.replace(self)
        for key, value in values.items():
            if value is None:
                continue
            if not hasattr(config, key) or key.startswith("_"):
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(config, key)
            if isinstance(value, str):
                if key in ("gamma", "threshold"):
                    value = float(value)
                elif key in ("top_logical", "explain_top"):
                    value = int(value)
                elif key in ("tune", "mask_direct_edges", "skip_bad_rules"):
                    value = _parse_bool(value)
            setattr(config, key, value)
        return config

    def validate(self, required: tuple[str, ...], reads: tuple[str, ...] = ()) -> None:
        """Check the stage's inputs before any work starts.

        ``required`` keys must be set; ``reads`` are optional path keys this
        stage consumes when set. Only those paths must exist: a config may
        legitimately name artifacts another step has not produced yet.
        """
        for key in required:
            value = getattr(self, key)
            if value is None or value == "":
                raise ConfigError(f"config key {key!r} is required for this stage")
        for key in (*required, *reads):
            if key not in self._PATH_KEYS:
                continue
            value = getattr(self, key)
            if value and not os.path.exists(value):
                raise ConfigError(f"config path {key} = {value!r} does not exist")
        try:
            FilterConfig(gamma=self.gamma, threshold=self.threshold)
        except FilterError as exc:
            raise ConfigError(str(exc)) from None

    def as_dict(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if not k.startswith("_")}


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Pipeline:
    def __init__(self, config: RunConfig):
        self.config = config
        self._kg: Optional[IndexedKG] = None

    # -- shared loading -----------------------------------------------------

    def artifact(self, name: str) -> str:
        return os.path.join(self.config.out, ARTIFACTS[name])

    def load_graph(self) -> IndexedKG:
        if self._kg is None:
            self.config.validate(("train",), reads=("valid", "test"))
            self._kg = load_kg(self.config.train, self.config.valid, self.config.test)
        return self._kg

    def enabled_relation_ids(self, kg: IndexedKG) -> frozenset[int]:
        ids = set()
        for token in self.config.relations.split(","):
            token = token.strip()
            if not token:
                continue
            if token.isdigit():
                ids.add(int(token))
            else:
                try:
                    ids.add(kg.vocab.relation_id(token))
                except KeyError:
                    raise ConfigError(f"unknown relation {token!r} in `relations`") from None
        return frozenset(ids)

    def _load_ruleset(self, kg: IndexedKG, path: str) -> RuleSet:
        on_error = "skip" if self.config.skip_bad_rules else "raise"
        rules = load_rules(path, kg.vocab, on_error=on_error)
        return group_rules(drop_constant_rules(rules))

    def _rules_path(self) -> str:
        filtered = self.artifact("filtered_rules")
        if os.path.exists(filtered):
            return filtered
        if self.config.rules:
            return self.config.rules
        raise MissingArtifactError(filtered, "filter")

    def _queries_path(self) -> str:
        path = self.config.queries or self.config.test
        if not path:
            raise ConfigError("need `queries` or `test` to know what to answer")
        return path

    def _read_query_triples(self, kg: IndexedKG, path: str) -> list[Triple]:
        triples = []
        skipped = 0
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                fields = line.rstrip("\r\n").split("\t")
                if len(fields) != 3:
                    raise PipelineError(
                        f"{path}:{line_no}: expected 3 tab-separated fields"
                    )
                try:
                    triples.append(
                        Triple(
                            kg.vocab.entity_id(fields[0]),
                            kg.vocab.relation_id(fields[1]),
                            kg.vocab.entity_id(fields[2]),
                        )
                    )
                except KeyError:
                    skipped += 1
        if skipped:
            logger.warning("%s: %d query triples name unknown entities/relations", path, skipped)
        return triples

    @staticmethod
    def _unique_queries(kg: IndexedKG, triples: list[Triple]) -> list[tuple[int, int]]:
        """Both directions of every triple, deduplicated, in file order."""
        seen: set[tuple[int, int]] = set()
        queries: list[tuple[int, int]] = []
        for h, r, t in triples:
            for key in ((h, r), (t, kg.vocab.reciprocal(r))):
                if key not in seen:
                    seen.add(key)
                    queries.append(key)
        return queries

    def _manifest_update(self, stage: str, inputs: list[str]) -> None:
        path = self.artifact("manifest")
        entries = []
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                entries = json.load(fh).get("runs", [])
        config_dict = self.config.as_dict()
        entries.append(
            {
                "stage": stage,
                "version": __version__,
                "created": datetime.now(timezone.utc).isoformat(),
                "config": config_dict,
                "config_sha256": hashlib.sha256(
                    json.dumps(config_dict, sort_keys=True).encode()
                ).hexdigest(),
                "inputs": {p: _sha256(p) for p in inputs if p and os.path.exists(p)},
            }
        )
        interchange.atomic_write(path, json.dumps({"runs": entries}, indent=2) + "\n")

    # -- stages ---------------------------------------------------------------

    def ingest(self) -> None:
        self.config.validate(("train",), reads=("valid", "test"))
        kg = self.load_graph()
        kg.validate_indexes()
        os.makedirs(self.config.out, exist_ok=True)
        kg.vocab.dump_entities(self.artifact("entities"))
        kg.vocab.dump_relations(self.artifact("relations"))
        stats = {
            "entities": kg.vocab.num_entities,
            "relations": kg.vocab.base_relation_count,
            "relations_with_reciprocals": kg.vocab.num_relations,
            "triples": {split: len(kg.splits[split]) for split in kg.splits},
            "skipped": dict(kg.skipped),
        }
        interchange.atomic_write(
            self.artifact("ingest_stats"), json.dumps(stats, indent=2, sort_keys=True) + "\n"
        )
        self._manifest_update(
            "ingest", [self.config.train, self.config.valid, self.config.test]
        )

    def filter(self) -> None:
        self.config.validate(("train", "rules"), reads=("nli", "meta", "lexicon"))
        kg = self.load_graph()
        enabled = self.enabled_relation_ids(kg)
        on_error = "skip" if self.config.skip_bad_rules else "raise"
        rules = load_rules(self.config.rules, kg.vocab, on_error=on_error)
        kept = drop_constant_rules(rules)
        ruleset = group_rules(kept)

        nli_table = {}
        if self.config.nli:
            nli_table = interchange.read_nli_tsv(self.config.nli)
        elif self.config.nli_endpoint and enabled:
            meta, _ = load_relation_meta(self.config.meta, kg.vocab)
            lexicon = load_lexicon(self.config.lexicon)
            to_score = [r for r in kept if r.head.relation in enabled]
            pairs, failures = sentence_pairs(to_score, meta, lexicon)
            if failures:
                raise PipelineError(
                    f"{len(failures)} rules could not be converted to sentences: "
                    f"{failures[:5]}"
                )
            nli_table = fetch_nli_scores(
                self.config.nli_endpoint,
                [(rid, p.premise, p.hypothesis) for rid, p in pairs],
            )
        elif enabled:
            raise ConfigError("enabled relations require `nli` or `nli_endpoint`")

        filtered = filter_rules(
            ruleset,
            nli_table,
            FilterConfig(self.config.gamma, self.config.threshold, enabled),
        )

        # surviving rules keep their original file lines, so a disabled
        # filter is a byte-identical pass-through
        with open(self.config.rules, encoding="utf-8") as fh:
            original_lines = fh.read().splitlines()
        out_lines = [
            original_lines[rule.rule_id] for rule in filtered.surviving_rules()
        ]
        os.makedirs(self.config.out, exist_ok=True)
        interchange.atomic_write(
            self.artifact("filtered_rules"),
            "\n".join(out_lines) + ("\n" if out_lines else ""),
        )
        audit = {
            str(a.rule_id): {
                "enabled": a.enabled,
                "final_score": a.final_score,
                "effective_confidence": a.effective_confidence,
            }
            for a in filtered.audits.values()
        }
        audit["_dropped_constant_rules"] = len(rules) - len(kept)
        interchange.atomic_write(
            self.artifact("filter_audit"), json.dumps(audit, indent=2, sort_keys=True) + "\n"
        )
        self._manifest_update("filter", [self.config.rules, self.config.nli or ""])

    def _answer_queries(self, kg: IndexedKG, ruleset: RuleSet, queries_path: str, out_path: str) -> None:
        triples = self._read_query_triples(kg, queries_path)
        records = []
        for bound, relation in self._unique_queries(kg, triples):
            query = Query(bound, relation)
            mask = direct_edge_mask(query, kg) if self.config.mask_direct_edges else frozenset()
            answers = logical_answers(query, ruleset, kg, mask)
            records.append((bound, relation, answers.scores))
        interchange.write_scores_jsonl(out_path, records)

    def answer(self) -> None:
        self.config.validate(("train",), reads=("rules", "queries"))
        kg = self.load_graph()
        ruleset = self._load_ruleset(kg, self._rules_path())
        os.makedirs(self.config.out, exist_ok=True)
        queries_path = self._queries_path()
        self._answer_queries(kg, ruleset, queries_path, self.artifact("logical"))
        self._manifest_update("answer", [self._rules_path(), queries_path])

    def _logical_path(self) -> str:
        if self.config.logical:
            return self.config.logical
        path = self.artifact("logical")
        if not os.path.exists(path):
            raise MissingArtifactError(path, "answer")
        return path

    def _truncate(self, scores: dict[int, float]) -> dict[int, float]:
        limit = self.config.top_logical
        if limit <= 0 or len(scores) <= limit:
            return scores
        top = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:limit]
        return dict(top)

    def fuse(self) -> None:
        self.config.validate(("train", "neural"), reads=("logical", "flags", "neural_valid"))
        kg = self.load_graph()
        neural = interchange.read_scores_jsonl(self.config.neural)
        logical = interchange.read_scores_jsonl(self._logical_path())
        os.makedirs(self.config.out, exist_ok=True)

        if self.config.tune:
            flags = self._tune(kg)
        elif self.config.flags:
            flags = interchange.read_flags_tsv(self.config.flags)
        else:
            flags = {}

        def flag_for(relation: int) -> int:
            return flags.get(kg.vocab.base_relation(relation), 1)

        records = []
        for (bound, relation), neural_scores in neural.items():
            logical_scores = self._truncate(logical.get((bound, relation), {}))
            ranking = combine(neural_scores, logical_scores, flag_for(relation))
            records.append((bound, relation, ranking))
        interchange.write_ranking_jsonl(self.artifact("ranking"), records)
        self._manifest_update(
            "fuse", [self.config.neural, self._logical_path(), self.config.flags or ""]
        )

    def _tune(self, kg: IndexedKG) -> dict[int, int]:
        if not (self.config.valid and self.config.neural_valid):
            raise ConfigError("tuning requires `valid` and `neural_valid`")
        logical_valid_path = self.artifact("logical_valid")
        if not os.path.exists(logical_valid_path):
            ruleset = self._load_ruleset(kg, self._rules_path())
            self._answer_queries(kg, ruleset, self.config.valid, logical_valid_path)
        neural_valid = interchange.read_scores_jsonl(self.config.neural_valid)
        logical_valid = interchange.read_scores_jsonl(logical_valid_path)

        queries = []
        for h, r, t in self._read_query_triples(kg, self.config.valid):
            queries.append(Query(h, r, gold=t))
            queries.append(Query(t, kg.vocab.reciprocal(r), gold=h))
        queries = [q for q in queries if (q.bound, q.relation) in neural_valid]

        flags = tune_flags(
            queries,
            lambda q: neural_valid[(q.bound, q.relation)],
            lambda q: logical_valid.get((q.bound, q.relation), {}),
            lambda q: kg.known_answers(q.bound, q.relation),
            base_relation=kg.vocab.base_relation,
        )
        interchange.write_flags_tsv(self.artifact("flags"), flags)
        return flags

    def _ranking_path(self) -> str:
        if self.config.ranking:
            return self.config.ranking
        path = self.artifact("ranking")
        if not os.path.exists(path):
            raise MissingArtifactError(path, "fuse")
        return path

    def evaluate(self) -> None:
        self.config.validate(("train",), reads=("ranking", "queries"))
        kg = self.load_graph()
        ranking_path = self._ranking_path()
        rankings = interchange.read_ranking_jsonl(ranking_path)
        queries_path = self._queries_path()
        triples = self._read_query_triples(kg, queries_path)

        records = []
        missing_gold = 0
        missing_queries = 0
        for h, r, t in triples:
            for bound, relation, gold in ((h, r, t), (t, kg.vocab.reciprocal(r), h)):
                ranking = rankings.get((bound, relation))
                if ranking is None:
                    missing_queries += 1
                    continue
                known = kg.known_answers(bound, relation) - {gold}
                rank, found = filtered_rank_status(ranking, gold, known)
                if not found:
                    missing_gold += 1
                records.append(((bound, relation, gold), rank))
        if not records:
            raise PipelineError("no evaluable queries; is the ranking file empty?")
        if missing_queries:
            raise PipelineError(
                f"{missing_queries} queries missing from {ranking_path}; "
                "re-run the fuse stage on the same query set"
            )
        report = build_report(
            records,
            warnings={"gold_missing_from_ranking": missing_gold},
            relation_names=kg.vocab.relation_name,
            base_relation=kg.vocab.base_relation,
        )
        os.makedirs(self.config.out, exist_ok=True)
        interchange.atomic_write(
            self.artifact("report"), json.dumps(report, indent=2, sort_keys=True) + "\n"
        )
        interchange.atomic_write(self.artifact("report_text"), render_report(report))
        self._manifest_update("evaluate", [ranking_path, queries_path])

    def explain(self) -> None:
        self.config.validate(("train", "meta", "lexicon"), reads=("ranking", "rules", "labels"))
        kg = self.load_graph()
        ranking_path = self._ranking_path()
        rankings = interchange.read_ranking_jsonl(ranking_path)
        ruleset = self._load_ruleset(kg, self._rules_path())
        meta, missing = load_relation_meta(self.config.meta, kg.vocab)
        if missing:
            logger.warning("no sentence metadata for %d relations", len(missing))
        lexicon = load_lexicon(self.config.lexicon)
        labels = _load_labels(self.config.labels, kg) if self.config.labels else None

        lines = []
        for (bound, relation), ranking in rankings.items():
            query = Query(bound, relation)
            reciprocal = kg.vocab.is_reciprocal(relation)
            for entity, score in ranking[: self.config.explain_top]:
                fired = fired_rules(query, ruleset, kg, entity)
                texts = explain(
                    entity, query, fired, meta, lexicon, kg.vocab,
                    reciprocal=reciprocal, entity_labels=labels,
                )
                lines.append(
                    json.dumps(
                        {
                            "h": bound,
                            "r": relation,
                            "entity": entity,
                            "score": score,
                            "explanations": texts,
                        },
                        separators=(",", ":"),
                    )
                )
        os.makedirs(self.config.out, exist_ok=True)
        interchange.atomic_write(
            self.artifact("explanations"), "\n".join(lines) + ("\n" if lines else "")
        )
        self._manifest_update("explain", [ranking_path, self.config.meta, self.config.lexicon])

    def run(self, stage: str) -> None:
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")
        if stage == "all":
            for step in ("ingest", "filter", "answer", "fuse", "evaluate", "explain"):
                logger.info("stage %s", step)
                getattr(self, step)()
        else:
            getattr(self, stage)()


def _load_labels(path: str, kg: IndexedKG) -> dict[int, str]:
    """Optional `entity_name<TAB>label` table for readable explanations."""
    labels: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 2:
                continue
            try:
                labels[kg.vocab.entity_id(fields[0])] = fields[1]
            except KeyError:
                continue
    return labels


def run_stage(config: RunConfig, stage: str) -> None:
    Pipeline(config).run(stage)
