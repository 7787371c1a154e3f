import json
from pathlib import Path

import pytest

from divsynth.corpus import save_corpus
from divsynth.errors import DataError
from divsynth.mockdata import StyleCorpusSpec, make_style_corpus
from divsynth.orchestrate import (ConditionRunner, PipelineConfig,
                                  compare_methods, derive_seed, load_config)


SMALL_SPEC = StyleCorpusSpec(n_notes=300, label_noise=0.08)


def small_config(**kw):
    defaults = dict(
        k=10, shots=3, per_class=20, increment=5, iterations=3, repeats=1,
        baseline_n=12, working_n=300, reducer="pca", mock_embed_dim=128,
        curve_epochs=60, master_seed=1234,
    )
    defaults.update(kw)
    return PipelineConfig(**defaults)


@pytest.fixture(scope="module")
def corpora(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpora")
    working = make_style_corpus(SMALL_SPEC, seed=5, id_prefix="w")
    test = make_style_corpus(SMALL_SPEC.balanced(80), seed=6, id_prefix="t")
    working_path = root / "working.jsonl"
    test_path = root / "test.jsonl"
    save_corpus(working, working_path)
    save_corpus(test, test_path)
    return working_path, test_path


class TestConfig:
    def test_load_toml_subset(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text(
            '# experiment configuration\n'
            'entities = ["pleural effusion", "edema"]\n'
            'k = 25\n'
            'threshold = 0.8\n'
            'reducer = "pca"\n'
            'master_seed = 99\n'
            '\n'
            '[umap]\n'
            'n_neighbors = 10\n'
            'min_dist = 0.25\n'
            '\n'
            '[embedding_endpoint]\n'
            'base_url = "http://localhost:8080"\n'
            'model = "embed-small"\n'
            'max_batch = 64\n',
            encoding="utf-8",
        )
        cfg = load_config(path)
        assert cfg.entities == ["pleural effusion", "edema"]
        assert cfg.k == 25
        assert cfg.threshold == 0.8
        assert cfg.umap.n_neighbors == 10
        assert cfg.umap.min_dist == 0.25
        assert cfg.embedding_endpoint.base_url == "http://localhost:8080"
        assert cfg.embedding_endpoint.max_batch == 64
        assert cfg.chat_endpoint is None

    def test_bad_value_reports_line(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("k = twenty\n", encoding="utf-8")
        with pytest.raises(DataError, match=":1"):
            load_config(path)

    def test_validation(self):
        with pytest.raises(DataError):
            PipelineConfig(k=0)
        with pytest.raises(DataError):
            PipelineConfig(threshold=1.5)
        with pytest.raises(DataError):
            PipelineConfig(reducer="tsne")

    def test_digest_changes_with_values(self):
        assert small_config().digest() != small_config(k=11).digest()
        assert small_config().digest() == small_config().digest()


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(1, "stage", "e", "m") == derive_seed(1, "stage", "e", "m")

    def test_method_changes_seed(self):
        assert derive_seed(1, "stage", "e", "diversity") != \
            derive_seed(1, "stage", "e", "random")

    def test_collision_scan(self):
        seen = set()
        for master in range(10):
            for stage in ("embed", "kmeans", "prompts", "generate", "curve"):
                for entity in ("a", "b", "c", "d"):
                    for method in ("diversity", "random", "zeroshot",
                                   "realworld", ""):
                        seen.add(derive_seed(master, stage, entity, method))
        assert len(seen) == 10 * 5 * 4 * 5


class TestRunCondition:
    def test_realworld_pool_is_real_and_disjoint(self, corpora, tmp_path):
        working_path, test_path = corpora
        runner = ConditionRunner(small_config(), working_path, test_path,
                                 tmp_path / "out")
        result = runner.run_condition("realworld", SMALL_SPEC.entity)
        pool = result["pool"]
        assert len(pool) == 40  # 2 * per_class
        assert all(n.source == "real" for n in pool)
        assert all(n.method == "realworld" for n in pool)
        baseline_ids = {n.id for n in result["baseline"]}
        assert baseline_ids.isdisjoint(n.id for n in pool)

    def test_diversity_end_to_end_with_mocks(self, corpora, tmp_path):
        working_path, test_path = corpora
        runner = ConditionRunner(small_config(), working_path, test_path,
                                 tmp_path / "out")
        result = runner.run_condition("diversity", SMALL_SPEC.entity)
        assert len(result["pool"]) == 40
        assert all(n.source == "synthetic" for n in result["pool"])
        assert all(n.method == "diversity" for n in result["pool"])
        assert len(result["baseline"]) == 10  # k medoids, labeled
        assert len(result["curve"].points) == 4
        for key in ("pool", "curve", "report", "manifest"):
            assert result["paths"][key].exists()

    def test_zeroshot_no_shots(self, corpora, tmp_path):
        working_path, test_path = corpora
        runner = ConditionRunner(small_config(), working_path, test_path,
                                 tmp_path / "out")
        result = runner.run_condition("zeroshot", SMALL_SPEC.entity)
        assert all(n.method == "zeroshot" for n in result["pool"])

    def test_unknown_method(self, corpora, tmp_path):
        working_path, test_path = corpora
        runner = ConditionRunner(small_config(), working_path, test_path,
                                 tmp_path / "out")
        with pytest.raises(DataError):
            runner.run_condition("bootstrap", SMALL_SPEC.entity)

    def test_deterministic_reports_across_fresh_runs(self, corpora, tmp_path):
        working_path, test_path = corpora
        outputs = []
        for run_dir in ("run1", "run2"):
            runner = ConditionRunner(small_config(), working_path, test_path,
                                     tmp_path / run_dir)
            result = runner.run_condition("diversity", SMALL_SPEC.entity)
            outputs.append({
                name: path.read_bytes()
                for name, path in result["paths"].items() if path is not None
            })
        assert outputs[0].keys() == outputs[1].keys()
        for name in outputs[0]:
            assert outputs[0][name] == outputs[1][name], f"{name} differs"

    def test_stage_checkpoint_reuse(self, corpora, tmp_path):
        working_path, test_path = corpora
        out = tmp_path / "out"
        runner = ConditionRunner(small_config(), working_path, test_path, out)
        first = runner.run_condition("diversity", SMALL_SPEC.entity)
        pool_bytes = first["paths"]["pool"].read_bytes()
        mtime = first["paths"]["pool"].stat().st_mtime_ns

        runner2 = ConditionRunner(small_config(), working_path, test_path, out)
        second = runner2.run_condition("diversity", SMALL_SPEC.entity)
        assert second["paths"]["pool"].stat().st_mtime_ns == mtime
        assert second["paths"]["pool"].read_bytes() == pool_bytes

    def test_manifest_records_inputs_and_seeds(self, corpora, tmp_path):
        working_path, test_path = corpora
        runner = ConditionRunner(small_config(), working_path, test_path,
                                 tmp_path / "out")
        result = runner.run_condition("random", SMALL_SPEC.entity)
        manifest = json.loads(result["paths"]["manifest"].read_text())
        assert manifest["config_digest"] == small_config().digest()
        assert manifest["working_digest"]
        assert manifest["test_digest"]
        assert any(k.startswith("curve/") for k in manifest["seeds"])
        assert all(isinstance(v, int) for v in manifest["seeds"].values())


class TestCompareMethods:
    def test_four_conditions_share_test_set(self, corpora, tmp_path):
        working_path, test_path = corpora
        out = compare_methods(small_config(), working_path, test_path,
                              tmp_path / "out", SMALL_SPEC.entity)
        summary = out["summary"]
        assert set(summary["methods"]) == {"diversity", "random", "zeroshot",
                                           "realworld"}
        digests = {
            json.loads(r["paths"]["manifest"].read_text())["test_digest"]
            for r in out["results"].values()
        }
        assert len(digests) == 1
        for method, entry in summary["methods"].items():
            if method != "realworld":
                assert "auroc_gap_pct" in entry
        assert (Path(tmp_path) / "out" /
                f"summary-{SMALL_SPEC.entity}.json").exists()
