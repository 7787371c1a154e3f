import json

import pytest
from click.testing import CliRunner

from divsynth.annotator import SessionStore
from divsynth.cli import cli, main
from divsynth.corpus import Note, load_corpus, save_corpus
from divsynth.mockdata import StyleCorpusSpec, make_style_corpus

SPEC = StyleCorpusSpec(n_notes=240, label_noise=0.0)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def data_dir(tmp_path):
    working = make_style_corpus(SPEC, seed=3, id_prefix="w")
    save_corpus(working, tmp_path / "working.jsonl")
    test = make_style_corpus(SPEC.balanced(60), seed=4, id_prefix="t")
    save_corpus(test, tmp_path / "test.jsonl")
    return tmp_path


class TestCorpusSplit:
    def test_split_outputs(self, runner, tmp_path):
        notes = []
        for i in range(80):
            label = "present" if i % 2 == 0 else "absent"
            notes.append(Note(id=f"n{i}", text=f"t o k e n s {i}",
                              entity="effusion", label=label))
        from divsynth.corpus import Corpus
        save_corpus(Corpus(notes), tmp_path / "all.jsonl")
        result = runner.invoke(cli, [
            "corpus", "split", "--entity", "effusion", "--n-pos", "10",
            "--n-neg", "10", "--working", "40", "--seed", "7",
            "--in", str(tmp_path / "all.jsonl"),
            "--out-test", str(tmp_path / "test.jsonl"),
            "--out-working", str(tmp_path / "working.jsonl"),
        ])
        assert result.exit_code == 0, result.output
        test = load_corpus(tmp_path / "test.jsonl")
        working = load_corpus(tmp_path / "working.jsonl")
        assert len(test) == 20
        assert len(working) == 40
        assert set(test.ids()).isdisjoint(working.ids())


class TestStageCommands:
    def test_promptgen_and_generate_mock(self, runner, data_dir):
        reps_path = data_dir / "reps.jsonl"
        result = runner.invoke(cli, [
            "cluster", "random", "--n", "20", "--seed", "5",
            "--notes", str(data_dir / "working.jsonl"),
            "--out", str(reps_path),
        ])
        assert result.exit_code == 0, result.output

        prompts_path = data_dir / "prompts.jsonl"
        result = runner.invoke(cli, [
            "promptgen", "--method", "random", "--entity", SPEC.entity,
            "--per-class", "15", "--shots", "3", "--window", "30:60",
            "--seed", "2", "--notes", str(data_dir / "working.jsonl"),
            "--reps", str(reps_path), "--out", str(prompts_path),
        ])
        assert result.exit_code == 0, result.output
        assert sum(1 for _ in open(prompts_path)) == 30

        synth_path = data_dir / "synthetic.jsonl"
        result = runner.invoke(cli, [
            "generate", "--mock-seed", "9",
            "--prompts", str(prompts_path),
            "--notes", str(data_dir / "working.jsonl"),
            "--out", str(synth_path),
        ])
        assert result.exit_code == 0, result.output
        synth = load_corpus(synth_path)
        assert len(synth) == 30
        assert all(n.source == "synthetic" for n in synth)

    def test_reduce_and_cluster_pipeline(self, runner, data_dir):
        cache_path = data_dir / "embeddings.cache"
        from divsynth import jsonio
        from divsynth.embed import mock_embed

        working = load_corpus(data_dir / "working.jsonl")
        jsonio.write_jsonl(cache_path, (
            {"id": n.id, "model": "mock",
             "vector": mock_embed(n.text, 64, 0).tolist()}
            for n in working
        ))
        layout_path = data_dir / "layout.jsonl"
        result = runner.invoke(cli, [
            "reduce", "--method", "pca",
            "--in", str(cache_path), "--out", str(layout_path),
        ])
        assert result.exit_code == 0, result.output
        assert sum(1 for _ in open(layout_path)) == len(working)

        reps_path = data_dir / "reps.jsonl"
        result = runner.invoke(cli, [
            "cluster", "--k", "10", "--seed", "3",
            "--layout", str(layout_path),
            "--notes", str(data_dir / "working.jsonl"),
            "--out", str(reps_path),
        ])
        assert result.exit_code == 0, result.output
        assert sum(1 for _ in open(reps_path)) == 10

    def test_evaluate_curve(self, runner, data_dir):
        working = load_corpus(data_dir / "working.jsonl")
        ids = working.ids()
        save_corpus(working.subset(ids[:20]), data_dir / "baseline.jsonl")
        save_corpus(working.subset(ids[20:80]), data_dir / "pool.jsonl")
        out_dir = data_dir / "eval"
        result = runner.invoke(cli, [
            "evaluate", "curve",
            "--baseline", str(data_dir / "baseline.jsonl"),
            "--pool", str(data_dir / "pool.jsonl"),
            "--test", str(data_dir / "test.jsonl"),
            "--increment", "10", "--iterations", "3", "--repeats", "1",
            "--seed", "5", "--out", str(out_dir),
        ])
        assert result.exit_code == 0, result.output
        assert (out_dir / "curve.csv").exists()
        report = json.loads((out_dir / "report.json").read_text())
        assert report["threshold"] == 0.85

    def test_run_realworld(self, runner, data_dir, tmp_path):
        config = tmp_path / "config.toml"
        config.write_text(
            'k = 8\nshots = 3\nper_class = 12\nincrement = 5\n'
            'iterations = 2\nrepeats = 1\nbaseline_n = 10\n'
            'reducer = "pca"\nmock_embed_dim = 128\ncurve_epochs = 40\n',
            encoding="utf-8",
        )
        out_dir = tmp_path / "out"
        result = runner.invoke(cli, [
            "run", "--method", "realworld", "--entity", SPEC.entity,
            "--config", str(config), "--seed", "77",
            "--working", str(data_dir / "working.jsonl"),
            "--test", str(data_dir / "test.jsonl"),
            "--out", str(out_dir),
        ])
        assert result.exit_code == 0, result.output
        reports = list(out_dir.glob("report-realworld-*.json"))
        assert len(reports) == 1


class TestLabelCommand:
    def test_llm_labeling_wiring(self, runner, data_dir, monkeypatch):
        from divsynth import label as label_mod

        reps_path = data_dir / "reps.jsonl"
        runner.invoke(cli, [
            "cluster", "random", "--n", "6", "--seed", "1",
            "--notes", str(data_dir / "working.jsonl"),
            "--out", str(reps_path),
        ])
        monkeypatch.setenv("DIVSYNTH_API_KEY", "k")
        monkeypatch.setattr(label_mod, "chat_request",
                            lambda cfg, m, t, mt: ("PRESENT", "stop"))
        out_path = data_dir / "labels.jsonl"
        result = runner.invoke(cli, [
            "label", "--entity", SPEC.entity,
            "--base-url", "http://fake", "--model", "labeler",
            "--notes", str(data_dir / "working.jsonl"),
            "--reps", str(reps_path), "--out", str(out_path),
        ])
        assert result.exit_code == 0, result.output
        rows = [json.loads(line) for line in open(out_path)]
        assert len(rows) == 6
        assert all(r["label"] == "present" for r in rows)


class TestTuringExport:
    def test_export_turing_report(self, runner, tmp_path):
        store = SessionStore(tmp_path / "data")
        synth = [Note(id=f"s{i}", text=f"machine text {i}", entity="e",
                      source="synthetic", method="diversity") for i in range(4)]
        real = [Note(id=f"r{i}", text=f"human text {i}", entity="e")
                for i in range(4)]
        session = store.create_session("turing", synth, real, n_synth=2,
                                       n_real=2, seed=1)
        while True:
            item = store.next_item(session.session_id)
            if item.get("done"):
                break
            store.submit_judgment(session.session_id, item["item_id"], "real")
        out = tmp_path / "report.json"
        result = runner.invoke(cli, [
            "turing", "export", "--data-dir", str(tmp_path / "data"),
            "--session", session.session_id, "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["n_synth"] == 2
        assert report["correct_real"] == 2


class TestExitCodes:
    def test_usage_error_is_1(self):
        assert main(["corpus", "split"]) == 1

    def test_data_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a", "text": "x", "entity": "e"}\n'
                       '{"id": "a", "text": "y", "entity": "e"}\n',
                       encoding="utf-8")
        code = main([
            "corpus", "split", "--entity", "e",
            "--in", str(bad),
            "--out-test", str(tmp_path / "t.jsonl"),
            "--out-working", str(tmp_path / "w.jsonl"),
        ])
        assert code == 2

    def test_endpoint_error_is_3(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DIVSYNTH_API_KEY", "k")
        monkeypatch.setattr("time.sleep", lambda s: None)
        notes = tmp_path / "notes.jsonl"
        notes.write_text('{"id": "a", "text": "x y", "entity": "e"}\n',
                         encoding="utf-8")
        code = main([
            "embed", "--base-url", "http://127.0.0.1:1",
            "--model", "m", "--in", str(notes),
            "--cache", str(tmp_path / "cache.jsonl"),
        ])
        assert code == 3

    def test_success_is_0(self, tmp_path):
        notes = tmp_path / "notes.jsonl"
        from divsynth.corpus import Corpus
        corpus = Corpus([
            Note(id=f"n{i}", text="a b c",
                 entity="e", label="present" if i % 2 else "absent")
            for i in range(10)
        ])
        save_corpus(corpus, notes)
        code = main([
            "corpus", "split", "--entity", "e", "--n-pos", "2", "--n-neg", "2",
            "--working", "5", "--in", str(notes),
            "--out-test", str(tmp_path / "t.jsonl"),
            "--out-working", str(tmp_path / "w.jsonl"),
        ])
        assert code == 0
