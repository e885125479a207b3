import json
from pathlib import Path

import pytest

from iprg.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def read_jsonl(path):
    return [json.loads(l) for l in Path(path).read_text().splitlines() if l.strip()]


@pytest.fixture()
def smoke_index(tmp_path):
    index_dir = tmp_path / "idx"
    rc = main(["index", "--corpus", str(FIXTURES / "smoke_corpus.jsonl"),
               "--index", str(index_dir)])
    assert rc == 0
    return index_dir


class TestCmdIndex:
    def test_builds_and_reports_count(self, smoke_index, capsys):
        manifest = json.loads((smoke_index / "manifest.json").read_text())
        assert manifest["count"] >= 3
        assert manifest["embedder_tag"].startswith("lexical-v1:")

    def test_missing_corpus_names_path(self, tmp_path, capsys):
        rc = main(["index", "--corpus", str(tmp_path / "nope.jsonl"),
                   "--index", str(tmp_path / "idx")])
        assert rc != 0
        assert "nope.jsonl" in capsys.readouterr().err

    def test_rebuild_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            rc = main(["index", "--corpus", str(FIXTURES / "smoke_corpus.jsonl"),
                       "--index", str(tmp_path / name)])
            assert rc == 0
        for fname in ("manifest.json", "passages.jsonl", "vectors.f32", "idf.f64"):
            assert (tmp_path / "a" / fname).read_bytes() == (
                tmp_path / "b" / fname
            ).read_bytes()


class TestCmdPlanData:
    def test_writes_examples(self, tmp_path):
        out = tmp_path / "plan.jsonl"
        rc = main(["plan-data", "--dataset", str(FIXTURES / "smoke_dataset.jsonl"),
                   "--out", str(out)])
        assert rc == 0
        records = read_jsonl(out)
        assert records
        for rec in records:
            assert rec["prompt"] and rec["keywords"]

    def test_prompts_are_growing_prefixes(self, tmp_path):
        out = tmp_path / "plan.jsonl"
        main(["plan-data", "--dataset", str(FIXTURES / "smoke_dataset.jsonl"),
              "--out", str(out)])
        by_pair = {}
        for rec in read_jsonl(out):
            pair_id = rec["id"].rsplit(":", 1)[0]
            by_pair.setdefault(pair_id, []).append(rec["prompt"])
        for prompts in by_pair.values():
            for earlier, later in zip(prompts, prompts[1:]):
                assert len(later) > len(earlier)


class TestCmdAnswer:
    def _answer(self, index_dir, tmp_path, *extra):
        preds = tmp_path / "preds.jsonl"
        trace = tmp_path / "trace.jsonl"
        rc = main(["answer",
                   "--dataset", str(FIXTURES / "smoke_dataset.jsonl"),
                   "--index", str(index_dir),
                   "--generator-script", str(FIXTURES / "smoke_generator_script.jsonl"),
                   "--out", str(preds), "--out-trace", str(trace),
                   "--deterministic", *extra])
        return rc, preds, trace

    def test_two_files_written(self, smoke_index, tmp_path):
        rc, preds, trace = self._answer(smoke_index, tmp_path)
        assert rc == 0
        assert len(read_jsonl(preds)) == 3
        headers = [r for r in read_jsonl(trace) if "question_id" in r]
        assert len(headers) == 3

    def test_irg_mode_has_empty_keywords(self, smoke_index, tmp_path):
        rc, _, trace = self._answer(smoke_index, tmp_path, "--mode", "irg")
        assert rc == 0
        for rec in read_jsonl(trace):
            if "iteration" in rec:
                assert rec["keywords"] == []
                assert "keywords:" not in rec["query"]

    def test_unreachable_generator_fails(self, smoke_index, tmp_path):
        preds = tmp_path / "p.jsonl"
        rc = main(["answer",
                   "--dataset", str(FIXTURES / "smoke_dataset.jsonl"),
                   "--index", str(smoke_index),
                   "--generator-url", "http://127.0.0.1:1",
                   "--out", str(preds)])
        assert rc == 2

    def test_no_generator_configured(self, smoke_index, tmp_path, monkeypatch):
        monkeypatch.delenv("IPRG_SIDECAR_URL", raising=False)
        rc = main(["answer",
                   "--dataset", str(FIXTURES / "smoke_dataset.jsonl"),
                   "--index", str(smoke_index),
                   "--out", str(tmp_path / "p.jsonl")])
        assert rc == 2

    def test_deterministic_reruns_identical(self, smoke_index, tmp_path):
        (tmp_path / "one").mkdir()
        (tmp_path / "two").mkdir()
        rc1, p1, t1 = self._answer(smoke_index, tmp_path / "one")
        rc2, p2, t2 = self._answer(smoke_index, tmp_path / "two")
        assert rc1 == rc2 == 0
        assert p1.read_bytes() == p2.read_bytes()
        assert t1.read_bytes() == t2.read_bytes()


class TestCmdEval:
    def _self_predictions(self, tmp_path):
        preds = tmp_path / "preds.jsonl"
        with preds.open("w") as f:
            for rec in read_jsonl(FIXTURES / "smoke_dataset.jsonl"):
                f.write(json.dumps({"id": rec["id"], "answer": rec["answer"]}) + "\n")
        return preds

    def test_self_eval_scores_100(self, tmp_path, capsys):
        preds = self._self_predictions(tmp_path)
        out = tmp_path / "report.jsonl"
        rc = main(["eval", "--predictions", str(preds),
                   "--dataset", str(FIXTURES / "smoke_dataset.jsonl"),
                   "--out", str(out)])
        assert rc == 0
        summary = [r for r in read_jsonl(out) if r["type"] == "summary"][0]
        for key in ("r1_recall", "r1_f1", "rl_recall", "rl_f1"):
            assert summary[key] == 100.0

    def test_report_contains_config_echo(self, tmp_path):
        preds = self._self_predictions(tmp_path)
        out = tmp_path / "report.jsonl"
        main(["eval", "--predictions", str(preds),
              "--dataset", str(FIXTURES / "smoke_dataset.jsonl"), "--out", str(out)])
        config = [r for r in read_jsonl(out) if r["type"] == "config"][0]
        assert "rouge_variant" in config and "dale_chall_list_version" in config

    def test_nli_without_endpoint_fails(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("IPRG_SIDECAR_URL", raising=False)
        preds = self._self_predictions(tmp_path)
        rc = main(["eval", "--predictions", str(preds),
                   "--dataset", str(FIXTURES / "smoke_dataset.jsonl"), "--nli"])
        assert rc == 2
        assert "--nli" in capsys.readouterr().err

    def test_readability_and_aspects_columns(self, tmp_path):
        preds = self._self_predictions(tmp_path)
        out = tmp_path / "report.jsonl"
        rc = main(["eval", "--predictions", str(preds),
                   "--dataset", str(FIXTURES / "smoke_dataset.jsonl"),
                   "--readability", "--aspects", "--out", str(out)])
        assert rc == 0
        items = [r for r in read_jsonl(out) if r["type"] == "item"]
        assert all("fkgl" in r for r in items)
        q1 = [r for r in items if r["id"] == "q1"][0]
        assert q1["aspect_coverage"] == 1.0


class TestUsageErrors:
    def test_unknown_command_exit_1(self):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag_exit_1(self):
        assert main(["index", "--corpus", "x"]) == 1
