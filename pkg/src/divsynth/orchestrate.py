"""Configuration, master seeding, and the four-condition experiment
driver (diversity / random / zeroshot / realworld)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import cluster as cluster_mod
from . import generate as generate_mod
from . import label as label_mod, metrics, promptgen, reduce as reduce_mod
from .corpus import Corpus, Note, TokenWindow, load_corpus, token_window
from .embed import EmbeddingCache, embed_batch, mock_embed_many
from .errors import DataError
from .httpapi import EndpointConfig
from .reduce import UmapParams
from .seeding import derive_seed as _derive

METHODS = ("diversity", "random", "zeroshot", "realworld")


@dataclass
class PipelineConfig:
    entities: list[str] = field(default_factory=lambda: ["pleural effusion"])
    k: int = 50
    shots: int = 5
    per_class: int = 325
    increment: int = 25
    iterations: int = 15
    repeats: int = 5
    baseline_n: int = 50
    working_n: int = 5000
    test_pos: int = 100
    test_neg: int = 100
    threshold: float = 0.85
    turing_n_synth: int = 50
    turing_n_real: int = 50
    window_low: int | None = None    # None -> auto from working corpus
    window_high: int | None = None
    reducer: str = "umap"            # umap | pca
    labeler: str = "self"            # self | llm | file:<path>
    mock_embed_dim: int = 512
    master_seed: int = 0
    umap: UmapParams = field(default_factory=UmapParams)
    embedding_endpoint: EndpointConfig | None = None
    chat_endpoint: EndpointConfig | None = None
    fewshot_template: str = "fewshot_default"
    zeroshot_template: str = "zeroshot_default"
    curve_epochs: int = 500
    curve_learning_rate: float = 0.1
    curve_l2: float = 1e-3

    def __post_init__(self):
        for name in ("k", "shots", "per_class", "increment", "iterations",
                     "repeats", "baseline_n", "working_n"):
            if getattr(self, name) <= 0:
                raise DataError(f"config {name} must be positive")
        if not (0.0 < self.threshold < 1.0):
            raise DataError("threshold must be in (0, 1)")
        if self.reducer not in ("umap", "pca"):
            raise DataError(f"unknown reducer {self.reducer!r}")

    def digest(self) -> str:
        def encode(obj):
            if isinstance(obj, (EndpointConfig, UmapParams)):
                return asdict(obj)
            return obj

        payload = {k: encode(v) for k, v in self.__dict__.items()}
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True, default=str).encode()
        ).hexdigest()


def load_config(path) -> PipelineConfig:
    """Read a TOML-style key/value config file.

    Supports the subset this project writes: `key = value` lines with
    JSON-compatible scalars/arrays, and `[section]` tables for the
    endpoint and UMAP parameter groups.
    """
    raw: dict = {}
    section: dict | None = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            section = {}
            raw[name] = section
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key = value")
        key, _, rhs = line.partition("=")
        try:
            value = json.loads(rhs.strip())
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: bad value {rhs.strip()!r}") from exc
        (section if section is not None else raw)[key.strip()] = value
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> PipelineConfig:
    raw = dict(raw)
    umap_params = UmapParams(**raw.pop("umap", {}))
    embedding = raw.pop("embedding_endpoint", None)
    chat = raw.pop("chat_endpoint", None)
    cfg = PipelineConfig(
        umap=umap_params,
        embedding_endpoint=EndpointConfig(**embedding) if embedding else None,
        chat_endpoint=EndpointConfig(**chat) if chat else None,
        **raw,
    )
    return cfg


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class ConditionRunner:
    """Runs one (method, entity) condition with stage checkpointing.

    Stage outputs are content-addressed: the file name embeds a digest
    of the config and the input corpus files, so reruns reuse completed
    stages and changed inputs cannot be silently mixed.
    """

    def __init__(self, cfg: PipelineConfig, working_path, test_path, out_dir):
        self.cfg = cfg
        self.working_path = Path(working_path)
        self.test_path = Path(test_path)
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.working = load_corpus(self.working_path)
        self.test = load_corpus(self.test_path)
        self._base_digest = hashlib.sha256(
            (cfg.digest() + file_digest(working_path) + file_digest(test_path)).encode()
        ).hexdigest()
        self.manifest: dict = {
            "config_digest": cfg.digest(),
            "working_digest": file_digest(working_path),
            "test_digest": file_digest(test_path),
            "stages": {},
            "seeds": {},
        }
        self._embed_cache = (
            EmbeddingCache(self.out_dir / "embeddings.cache")
            if cfg.embedding_endpoint is not None else None
        )

    # -- plumbing ---------------------------------------------------------

    def _seed(self, stage: str, entity: str, method: str) -> int:
        seed = _derive(self.cfg.master_seed, stage, entity, method)
        self.manifest["seeds"][f"{stage}/{entity}/{method}"] = seed
        return seed

    def _stage_path(self, name: str, ext: str = ".jsonl") -> Path:
        digest = hashlib.sha256((self._base_digest + name).encode()).hexdigest()[:12]
        return self.out_dir / f"{name}-{digest}{ext}"

    def _record_stage(self, name: str, path: Path) -> None:
        self.manifest["stages"][name] = {
            "file": path.name,
            "digest": file_digest(path),
        }

    def embedder(self, notes) -> np.ndarray:
        """Embedding features for notes; mock unless an endpoint is set.

        The mock embedding space is shared across methods and stages
        (seeded only by the master seed) so conditions stay comparable.
        """
        pairs = [(n.id, n.text) for n in notes]
        if self.cfg.embedding_endpoint is not None:
            vectors = embed_batch(pairs, self.cfg.embedding_endpoint,
                                  self._embed_cache)
        else:
            vectors = mock_embed_many(
                pairs, self.cfg.mock_embed_dim,
                _derive(self.cfg.master_seed, "embed-space"),
            )
        return np.vstack([v.values for v in vectors])

    def window(self) -> TokenWindow:
        if self.cfg.window_low is not None and self.cfg.window_high is not None:
            return TokenWindow(self.cfg.window_low, self.cfg.window_high)
        return token_window(self.working)

    def _labels_for(self, notes, entity: str) -> list[label_mod.LabelResult]:
        labeler = self.cfg.labeler
        if labeler == "self":
            results = []
            for n in notes:
                if n.label is None:
                    raise DataError(
                        f"labeler 'self' needs labels on notes; {n.id!r} has none"
                    )
                results.append(label_mod.LabelResult(
                    note_id=n.id, entity=entity, label=n.label, origin="file"))
            return results
        if labeler == "llm":
            if self.cfg.chat_endpoint is None:
                raise DataError("labeler 'llm' requires a chat endpoint")
            return label_mod.label_notes(notes, entity, self.cfg.chat_endpoint)
        if labeler.startswith("file:"):
            wanted = {n.id for n in notes}
            return [r for r in label_mod.load_labels(labeler[5:])
                    if r.note_id in wanted and r.entity == entity]
        raise DataError(f"unknown labeler {labeler!r}")

    def _apply_labels(self, notes, entity: str) -> list[Note]:
        results = self._labels_for(notes, entity)
        effective = label_mod.effective_labels(results)
        labeled = []
        for n in notes:
            res = effective.get((n.id, entity))
            if res is None:
                continue  # unlabeled notes drop out of prompting
            copy = Note(id=n.id, text=n.text, entity=n.entity, label=res.label,
                        source=n.source, method=n.method, extra=dict(n.extra))
            copy.token_count = n.token_count
            labeled.append(copy)
        return labeled

    # -- stages -----------------------------------------------------------

    def diversity_representatives(self, entity: str) -> cluster_mod.RepresentativeSet:
        path = self._stage_path(f"reps-diversity-{entity}")
        if path.exists():
            return cluster_mod.load_representatives(path)
        features = self.embedder(self.working.notes)
        if self.cfg.reducer == "umap":
            params = UmapParams(**{**asdict(self.cfg.umap),
                                   "seed": self._seed("umap", entity, "diversity")})
            layout = reduce_mod.umap_reduce(features, params)
        else:
            layout = reduce_mod.reduce_pca(features, 2)
        reduce_mod.save_layout(self.working.ids(), layout,
                               self._stage_path(f"layout-{entity}"))
        clustering = cluster_mod.kmeans(
            layout.coordinates, self.cfg.k,
            self._seed("kmeans", entity, "diversity"),
        )
        reps = cluster_mod.select_representatives(
            clustering, layout.coordinates, self.working.notes)
        cluster_mod.save_representatives(reps, path)
        self._record_stage(f"reps-diversity-{entity}", path)
        return reps

    def random_representatives(self, entity: str) -> cluster_mod.RepresentativeSet:
        path = self._stage_path(f"reps-random-{entity}")
        if path.exists():
            return cluster_mod.load_representatives(path)
        reps = cluster_mod.random_sample_control(
            self.working.notes, self.cfg.baseline_n,
            self._seed("random-reps", entity, "random"),
        )
        cluster_mod.save_representatives(reps, path)
        self._record_stage(f"reps-random-{entity}", path)
        return reps

    def _sample_notes(self, corpus: Corpus, n: int, seed: int,
                      exclude: set[str] = frozenset()) -> list[Note]:
        ids = [i for i in corpus.ids() if i not in exclude]
        if n > len(ids):
            raise DataError(f"cannot sample {n} notes from {len(ids)}")
        gen = np.random.default_rng(seed & (2**64 - 1))
        take = gen.choice(len(ids), size=n, replace=False)
        chosen = {ids[i] for i in take}
        return [note for note in corpus if note.id in chosen]

    def run_condition(self, method: str, entity: str) -> dict:
        """End-to-end condition: build the augmentation pool for the
        method, then the learning curve and reports."""
        if method not in METHODS:
            raise DataError(f"unknown method {method!r}")
        window = self.window()

        if method in ("diversity", "random"):
            reps = (self.diversity_representatives(entity) if method == "diversity"
                    else self.random_representatives(entity))
            rep_notes = [self.working[i] for i in reps.ids()]
            labeled_reps = self._apply_labels(rep_notes, entity)
            baseline = labeled_reps
            batch = promptgen.build_fewshot_prompts(
                labeled_reps, entity, per_class=self.cfg.per_class,
                shots=self.cfg.shots, window=window,
                seed=self._seed("prompts", entity, method),
                template_id=self.cfg.fewshot_template, method=method,
            )
        elif method == "zeroshot":
            batch = promptgen.build_zeroshot_prompts(
                entity, per_class=self.cfg.per_class, window=window,
                template_id=self.cfg.zeroshot_template,
            )
            baseline = self._apply_labels(
                self._sample_notes(self.working, self.cfg.baseline_n,
                                   self._seed("baseline", entity, method)),
                entity,
            )
        else:  # realworld
            batch = None
            baseline = self._apply_labels(
                self._sample_notes(self.working, self.cfg.baseline_n,
                                   self._seed("baseline", entity, method)),
                entity,
            )

        prompts_path = None
        if batch is not None:
            prompts_path = self._stage_path(f"prompts-{method}-{entity}")
            if not prompts_path.exists():
                promptgen.save_prompt_batch(batch, prompts_path)
            self._record_stage(f"prompts-{method}-{entity}", prompts_path)

        pool_path = self._stage_path(f"pool-{method}-{entity}")
        if pool_path.exists():
            pool_corpus = load_corpus(pool_path)
            pool = pool_corpus.notes
        elif method == "realworld":
            pool = self._apply_labels(
                self._sample_notes(
                    self.working, 2 * self.cfg.per_class,
                    self._seed("realworld-pool", entity, method),
                    exclude={n.id for n in baseline},
                ),
                entity,
            )
            pool = [_with_method(n, "realworld") for n in pool]
            generate_mod.save_notes(pool, pool_path)
        else:
            if self.cfg.chat_endpoint is not None:
                pool = generate_mod.generate_batch(
                    batch, self.working, cfg=self.cfg.chat_endpoint,
                    checkpoint_path=self.out_dir / f"gen-{method}-{entity}.ckpt.jsonl",
                )
            else:
                pool = generate_mod.generate_batch(
                    batch, self.working,
                    mock_seed=self._seed("generate", entity, method),
                )
            generate_mod.save_notes(pool, pool_path)
        self._record_stage(f"pool-{method}-{entity}", pool_path)

        curve = metrics.run_learning_curve(
            baseline, pool, self.test.notes, self.embedder,
            increment=self.cfg.increment, iterations=self.cfg.iterations,
            repeats=self.cfg.repeats,
            seed=self._seed("curve", entity, method), method=method,
            l2=self.cfg.curve_l2, epochs=self.cfg.curve_epochs,
            learning_rate=self.cfg.curve_learning_rate,
        )
        curve_path = self.out_dir / f"curve-{method}-{entity}.csv"
        metrics.curve_to_csv(curve, entity, curve_path)
        report = metrics.threshold_report(curve, self.cfg.threshold)
        report_path = self.out_dir / f"report-{method}-{entity}.json"
        _write_json(report_path, {
            "method": method,
            "entity": entity,
            "threshold": report.threshold,
            "steps_to_auroc": report.steps_to_auroc,
            "steps_to_auprc": report.steps_to_auprc,
            "data_to_auroc": report.data_to_auroc,
            "final_auroc": curve.points[-1].auroc_mean,
            "final_auprc": curve.points[-1].auprc_mean,
        })
        manifest_path = self.out_dir / f"manifest-{method}-{entity}.json"
        _write_json(manifest_path, self.manifest)
        return {
            "method": method,
            "entity": entity,
            "baseline": baseline,
            "pool": pool,
            "curve": curve,
            "report": report,
            "paths": {
                "pool": pool_path,
                "prompts": prompts_path,
                "curve": curve_path,
                "report": report_path,
                "manifest": manifest_path,
            },
        }


def _with_method(note: Note, method: str) -> Note:
    copy = Note(id=note.id, text=note.text, entity=note.entity, label=note.label,
                source=note.source, method=method, extra=dict(note.extra))
    copy.token_count = note.token_count
    return copy


def _write_json(path, payload) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def compare_methods(cfg: PipelineConfig, working_path, test_path, out_dir,
                    entity: str, methods=METHODS) -> dict:
    """Run all conditions for one entity and assemble the combined
    threshold/gap/ratio summary against the realworld reference."""
    runner = ConditionRunner(cfg, working_path, test_path, out_dir)
    results = {m: runner.run_condition(m, entity) for m in methods}
    summary: dict = {"entity": entity, "threshold": cfg.threshold, "methods": {}}
    real = results.get("realworld")
    real_data = (metrics.data_to_threshold(real["curve"], "auroc", cfg.threshold)
                 if real else None)
    for m, res in results.items():
        report = metrics.threshold_report(res["curve"], cfg.threshold,
                                          real_data_to_threshold=real_data)
        entry = {
            "steps_to_auroc": report.steps_to_auroc,
            "steps_to_auprc": report.steps_to_auprc,
            "data_to_auroc": report.data_to_auroc,
            "ratio_vs_real": report.ratio_vs_real,
        }
        if real is not None and m != "realworld":
            gap = metrics.gap_report(real["curve"], res["curve"])
            entry["auroc_gap_pct"] = gap.auroc_gap_pct
            entry["auprc_gap_pct"] = gap.auprc_gap_pct
        summary["methods"][m] = entry
    _write_json(Path(out_dir) / f"summary-{entity}.json", summary)
    return {"results": results, "summary": summary}


def derive_seed(master: int, stage_name: str, entity: str = "",
                method: str = "") -> int:
    """Stable 64-bit stage seed; distinct tuples give distinct seeds."""
    return _derive(master, stage_name, entity, method)
