"""Readers and writers for the files stages exchange.

Everything is plain TSV or JSON-lines, written deterministically (sorted
candidates, stable key order, no timestamps) so re-running a stage with
unchanged inputs reproduces its artifacts byte for byte. Writes go through
a temp file plus rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable, Mapping

from .filtering import NliScores


class InterchangeError(Exception):
    pass


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sort_candidates(scores: Mapping[int, float]) -> list[list]:
    """Descending by score, ascending entity id on ties."""
    return [[e, s] for e, s in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))]


# -- per-query score maps (logical and neural exports) ---------------------


def write_scores_jsonl(path: str, records: Iterable[tuple[int, int, Mapping[int, float]]]) -> None:
    """records: (bound entity, relation, entity -> score)."""
    lines = []
    for bound, relation, scores in records:
        lines.append(
            json.dumps(
                {"h": bound, "r": relation, "candidates": sort_candidates(scores)},
                separators=(",", ":"),
            )
        )
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_scores_jsonl(path: str) -> dict[tuple[int, int], dict[int, float]]:
    out: dict[tuple[int, int], dict[int, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (int(record["h"]), int(record["r"]))
                out[key] = {int(e): float(s) for e, s in record["candidates"]}
            except (KeyError, ValueError, TypeError) as exc:
                raise InterchangeError(f"{path}:{line_no}: bad score record: {exc}") from None
    return out


# -- fused rankings ---------------------------------------------------------


def write_ranking_jsonl(path: str, records: Iterable[tuple[int, int, list[tuple[int, float]]]]) -> None:
    lines = []
    for bound, relation, ranking in records:
        lines.append(
            json.dumps(
                {"h": bound, "r": relation, "ranking": [[e, s] for e, s in ranking]},
                separators=(",", ":"),
            )
        )
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_ranking_jsonl(path: str) -> dict[tuple[int, int], list[tuple[int, float]]]:
    out: dict[tuple[int, int], list[tuple[int, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (int(record["h"]), int(record["r"]))
                out[key] = [(int(e), float(s)) for e, s in record["ranking"]]
            except (KeyError, ValueError, TypeError) as exc:
                raise InterchangeError(f"{path}:{line_no}: bad ranking record: {exc}") from None
    return out


# -- NLI score tables -------------------------------------------------------


def write_nli_tsv(path: str, table: Mapping[int, NliScores]) -> None:
    lines = [
        f"{rule_id}\t{s.entailment!r}\t{s.neutral!r}\t{s.contradiction!r}"
        for rule_id, s in sorted(table.items())
    ]
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_nli_tsv(path: str) -> dict[int, NliScores]:
    table: dict[int, NliScores] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 4:
                raise InterchangeError(
                    f"{path}:{line_no}: expected 4 fields, got {len(fields)}"
                )
            try:
                table[int(fields[0])] = NliScores(
                    float(fields[1]), float(fields[2]), float(fields[3])
                )
            except ValueError as exc:
                raise InterchangeError(f"{path}:{line_no}: {exc}") from None
    return table


# -- sentence pairs ---------------------------------------------------------


def write_sentence_pairs_tsv(path: str, pairs: Iterable[tuple[int, "SentencePair"]]) -> None:
    lines = []
    for rule_id, pair in pairs:
        if "\t" in pair.premise or "\t" in pair.hypothesis:
            raise InterchangeError(f"rule {rule_id}: tab character inside sentence")
        lines.append(f"{rule_id}\t{pair.premise}\t{pair.hypothesis}")
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_sentence_pairs_tsv(path: str) -> list[tuple[int, str, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 3:
                raise InterchangeError(
                    f"{path}:{line_no}: expected 3 fields, got {len(fields)}"
                )
            out.append((int(fields[0]), fields[1], fields[2]))
    return out


# -- fusion flag tables -----------------------------------------------------


def write_flags_tsv(path: str, flags: Mapping[int, int]) -> None:
    lines = [f"{rel}\t{flag}" for rel, flag in sorted(flags.items())]
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def read_flags_tsv(path: str) -> dict[int, int]:
    flags: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 2 or fields[1] not in ("0", "1"):
                raise InterchangeError(f"{path}:{line_no}: expected `relation<TAB>0|1`")
            flags[int(fields[0])] = int(fields[1])
    return flags
