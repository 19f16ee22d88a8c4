import json
import os

import pytest

from kgfuse.cli import main

from conftest import toy_path


def write_config(tmp_path, out_dir):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "\n".join(
            [
                f"train = {toy_path('train.txt')}",
                f"valid = {toy_path('valid.txt')}",
                f"test = {toy_path('test.txt')}",
                f"rules = {toy_path('rules.tsv')}",
                f"meta = {toy_path('meta.json')}",
                f"lexicon = {toy_path('lexicon.json')}",
                f"nli = {toy_path('nli.tsv')}",
                f"neural = {toy_path('neural_test.jsonl')}",
                f"flags = {toy_path('flags.tsv')}",
                "relations = nationality",
                f"out = {out_dir}",
            ]
        )
        + "\n"
    )
    return str(cfg)


class TestCli:
    def test_all_stages_end_to_end(self, tmp_path):
        out = str(tmp_path / "out")
        cfg = write_config(tmp_path, out)
        assert main(["all", "-c", cfg]) == 0
        report = json.load(open(os.path.join(out, "report.json")))
        golden = json.load(open(toy_path("golden_report.json")))
        assert report["overall"]["mrr"] == pytest.approx(golden["overall"]["mrr"], abs=1e-9)

    def test_single_stage_with_flag_override(self, tmp_path):
        out = str(tmp_path / "out")
        cfg = write_config(tmp_path, out)
        assert main(["filter", "-c", cfg, "--threshold", "0.9"]) == 0
        lines = open(os.path.join(out, "rules_filtered.tsv")).read().splitlines()
        # at threshold 0.9 only rule 0 (final 0.974) survives the gate
        source = open(toy_path("rules.tsv")).read().splitlines()
        assert lines == [source[0], source[2], source[4]]

    def test_missing_dependency_exits_nonzero(self, tmp_path, capsys):
        out = str(tmp_path / "out")
        cfg = write_config(tmp_path, out)
        assert main(["evaluate", "-c", cfg]) == 2
        assert "fuse" in capsys.readouterr().err

    def test_sentences_subcommand(self, tmp_path):
        out = str(tmp_path / "pairs.tsv")
        code = main(
            [
                "sentences",
                "--train", toy_path("train.txt"),
                "--rules", toy_path("rules.tsv"),
                "--meta", toy_path("meta.json"),
                "--lexicon", toy_path("lexicon.json"),
                "-o", out,
            ]
        )
        assert code == 0
        lines = open(out).read().splitlines()
        assert len(lines) == 5
        rule0 = lines[0].split("\t")
        assert rule0[1] == "Jack's place of birth is America."
        assert rule0[2] == "Jack's nationality is American."
