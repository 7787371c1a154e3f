"""Command-line interface for the pipeline stages.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import cluster as cluster_mod
from . import generate as generate_mod
from . import label as label_mod
from . import metrics, orchestrate, promptgen
from . import reduce as reduce_mod
from .corpus import (SplitSpec, TokenWindow, load_corpus, sample_working_set,
                     save_corpus, split_test_set, token_window)
from .embed import EmbeddingCache, embed_batch
from .errors import DataError, EndpointError
from .reduce import UmapParams


@click.group()
def cli():
    """Diversity-sampled synthetic note generation and evaluation."""


@cli.group("corpus")
def corpus_group():
    """Corpus preparation."""


@corpus_group.command("split")
@click.option("--entity", required=True)
@click.option("--n-pos", default=100, show_default=True)
@click.option("--n-neg", default=100, show_default=True)
@click.option("--working", "working_n", default=5000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out-test", required=True, type=click.Path())
@click.option("--out-working", required=True, type=click.Path())
def corpus_split(entity, n_pos, n_neg, working_n, seed, in_path, out_test,
                 out_working):
    """Hold out a labeled test set and sample the working set."""
    corpus = load_corpus(in_path)
    spec = SplitSpec(entity=entity, n_pos=n_pos, n_neg=n_neg,
                     working_n=working_n, seed=seed)
    test, remainder = split_test_set(corpus, spec)
    working = sample_working_set(remainder, min(working_n, len(remainder)), seed)
    save_corpus(test, out_test)
    save_corpus(working, out_working)
    click.echo(f"test={len(test)} working={len(working)}")


@cli.command("embed")
@click.option("--base-url", required=True)
@click.option("--model", required=True)
@click.option("--api-key-env", default="DIVSYNTH_API_KEY", show_default=True)
@click.option("--max-batch", default=256, show_default=True)
@click.option("--concurrency", default=4, show_default=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--cache", "cache_path", required=True, type=click.Path())
def embed_cmd(base_url, model, api_key_env, max_batch, concurrency, in_path,
              cache_path):
    """Embed corpus notes through an OpenAI-compatible endpoint."""
    from .httpapi import EndpointConfig

    corpus = load_corpus(in_path)
    cfg = EndpointConfig(base_url=base_url, model=model,
                         api_key_env=api_key_env, max_batch=max_batch,
                         concurrency=concurrency)
    cache = EmbeddingCache(cache_path)
    vectors = embed_batch([(n.id, n.text) for n in corpus], cfg, cache)
    click.echo(f"embedded {len(vectors)} notes -> {cache_path}")


@cli.command("reduce")
@click.option("--method", type=click.Choice(["umap", "pca"]), default="umap",
              show_default=True)
@click.option("--n-neighbors", default=15, show_default=True)
@click.option("--min-dist", default=0.1, show_default=True)
@click.option("--epochs", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="Embedding cache JSONL.")
@click.option("--out", "out_path", required=True, type=click.Path())
def reduce_cmd(method, n_neighbors, min_dist, epochs, seed, in_path, out_path):
    """Reduce cached embeddings to a 2D layout."""
    ids, vectors = _load_cache_vectors(in_path)
    if method == "umap":
        params = UmapParams(n_neighbors=n_neighbors, min_dist=min_dist,
                            n_epochs=epochs, seed=seed)
        layout = reduce_mod.umap_reduce(vectors, params)
    else:
        layout = reduce_mod.reduce_pca(vectors, 2)
    reduce_mod.save_layout(ids, layout, out_path)
    click.echo(f"layout for {len(ids)} points -> {out_path}")


def _load_cache_vectors(path):
    from . import jsonio

    ids, rows = [], []
    for _, rec in jsonio.read_jsonl(path):
        ids.append(str(rec["id"]))
        rows.append(rec["vector"])
    if not ids:
        raise DataError(f"no vectors in {path}")
    return ids, np.asarray(rows, dtype=np.float64)


@cli.group("cluster", invoke_without_command=True)
@click.option("--k", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--layout", "layout_path", type=click.Path(exists=True))
@click.option("--notes", "notes_path", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
@click.pass_context
def cluster_group(ctx, k, seed, layout_path, notes_path, out_path):
    """Cluster the layout and pick medoid representatives."""
    if ctx.invoked_subcommand is not None:
        return
    if not (layout_path and notes_path and out_path):
        raise click.UsageError("--layout, --notes and --out are required")
    ids, layout = reduce_mod.load_layout(layout_path)
    corpus = load_corpus(notes_path)
    clustering = cluster_mod.kmeans(layout.coordinates, k, seed)
    reps = cluster_mod.select_representatives(
        clustering, layout.coordinates, [corpus[i] for i in ids])
    cluster_mod.save_representatives(reps, out_path)
    click.echo(f"{k} representatives -> {out_path}")


@cluster_group.command("random")
@click.option("--n", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--notes", "notes_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def cluster_random(n, seed, notes_path, out_path):
    """Random-sampling control set."""
    corpus = load_corpus(notes_path)
    reps = cluster_mod.random_sample_control(corpus.notes, n, seed)
    cluster_mod.save_representatives(reps, out_path)
    click.echo(f"{n} random notes -> {out_path}")


@cli.command("label")
@click.option("--entity", required=True)
@click.option("--base-url", required=True)
@click.option("--model", required=True)
@click.option("--api-key-env", default="DIVSYNTH_API_KEY", show_default=True)
@click.option("--notes", "notes_path", required=True, type=click.Path(exists=True))
@click.option("--reps", "reps_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def label_cmd(entity, base_url, model, api_key_env, notes_path, reps_path,
              out_path):
    """LLM-label the representative notes."""
    from .httpapi import EndpointConfig

    corpus = load_corpus(notes_path)
    reps = cluster_mod.load_representatives(reps_path)
    cfg = EndpointConfig(base_url=base_url, model=model, api_key_env=api_key_env)
    results = label_mod.label_notes([corpus[i] for i in reps.ids()], entity, cfg)
    label_mod.save_labels(results, out_path)
    click.echo(f"{len(results)} labels -> {out_path}")


@cli.command("promptgen")
@click.option("--method", type=click.Choice(["diversity", "random", "zeroshot"]),
              required=True)
@click.option("--entity", required=True)
@click.option("--per-class", default=325, show_default=True)
@click.option("--shots", default=5, show_default=True)
@click.option("--window", default="auto", show_default=True,
              help="auto or LOW:HIGH")
@click.option("--seed", default=0, show_default=True)
@click.option("--notes", "notes_path", required=True, type=click.Path(exists=True))
@click.option("--reps", "reps_path", type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def promptgen_cmd(method, entity, per_class, shots, window, seed, notes_path,
                  reps_path, labels_path, out_path):
    """Build a prompt batch."""
    corpus = load_corpus(notes_path)
    if window == "auto":
        win = token_window(corpus)
    else:
        low, _, high = window.partition(":")
        win = TokenWindow(int(low), int(high))
    if method == "zeroshot":
        batch = promptgen.build_zeroshot_prompts(entity, per_class, win)
    else:
        if not reps_path:
            raise click.UsageError("--reps is required for few-shot methods")
        reps = cluster_mod.load_representatives(reps_path)
        rep_notes = [corpus[i] for i in reps.ids()]
        if labels_path:
            effective = label_mod.effective_labels(label_mod.load_labels(labels_path))
            for note in rep_notes:
                res = effective.get((note.id, entity))
                if res is not None:
                    note.label = res.label
        rep_notes = [n for n in rep_notes if n.label is not None]
        batch = promptgen.build_fewshot_prompts(
            rep_notes, entity, per_class=per_class, shots=shots, window=win,
            seed=seed, method=method)
    promptgen.save_prompt_batch(batch, out_path)
    click.echo(f"{len(batch.prompts)} prompts -> {out_path}")


@cli.command("generate")
@click.option("--base-url")
@click.option("--model")
@click.option("--api-key-env", default="DIVSYNTH_API_KEY", show_default=True)
@click.option("--mock-seed", type=int, help="Use the deterministic mock generator.")
@click.option("--prompts", "prompts_path", required=True, type=click.Path(exists=True))
@click.option("--notes", "notes_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", type=click.Path())
def generate_cmd(base_url, model, api_key_env, mock_seed, prompts_path,
                 notes_path, out_path, checkpoint_path):
    """Generate synthetic notes for a prompt batch."""
    from .httpapi import EndpointConfig

    batch = promptgen.load_prompt_batch(prompts_path)
    corpus = load_corpus(notes_path)
    if mock_seed is not None:
        notes = generate_mod.generate_batch(batch, corpus, mock_seed=mock_seed,
                                            checkpoint_path=checkpoint_path)
    else:
        if not (base_url and model):
            raise click.UsageError("--base-url/--model or --mock-seed required")
        cfg = EndpointConfig(base_url=base_url, model=model,
                             api_key_env=api_key_env)
        notes = generate_mod.generate_batch(batch, corpus, cfg=cfg,
                                            checkpoint_path=checkpoint_path)
    generate_mod.save_notes(notes, out_path)
    click.echo(f"{len(notes)} synthetic notes -> {out_path}")


@cli.group("evaluate")
def evaluate_group():
    """Learning-curve evaluation."""


@evaluate_group.command("curve")
@click.option("--baseline", "baseline_path", required=True, type=click.Path(exists=True))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--increment", default=25, show_default=True)
@click.option("--iterations", default=15, show_default=True)
@click.option("--repeats", default=5, show_default=True)
@click.option("--threshold", default=0.85, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--mock-embed-dim", default=512, show_default=True)
@click.option("--entity", default="", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def evaluate_curve(baseline_path, pool_path, test_path, increment, iterations,
                   repeats, threshold, seed, mock_embed_dim, entity, out_dir):
    """Learning curve + threshold report with the mock embedder."""
    from .embed import mock_embed_many

    baseline = load_corpus(baseline_path).notes
    pool = load_corpus(pool_path).notes
    test = load_corpus(test_path).notes

    def embedder(notes):
        vecs = mock_embed_many([(n.id, n.text) for n in notes], mock_embed_dim, seed=0)
        return np.vstack([v.values for v in vecs])

    curve = metrics.run_learning_curve(
        baseline, pool, test, embedder, increment=increment,
        iterations=iterations, repeats=repeats, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.curve_to_csv(curve, entity, out / "curve.csv")
    report = metrics.threshold_report(curve, threshold)
    orchestrate._write_json(out / "report.json", {
        "steps_to_auroc": report.steps_to_auroc,
        "steps_to_auprc": report.steps_to_auprc,
        "data_to_auroc": report.data_to_auroc,
        "threshold": report.threshold,
    })
    click.echo(f"curve + report -> {out_dir}")


@cli.group("turing")
def turing_group():
    """Turing-test session utilities."""


@turing_group.command("export")
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--session", "session_id", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def turing_export(data_dir, session_id, out_path):
    """Export a session report (turing JSON or labeling JSONL)."""
    from .annotator import SessionStore

    store = SessionStore(data_dir)
    report = store.session_report(session_id)
    if report["kind"] == "labeling":
        from . import jsonio

        jsonio.write_jsonl(out_path, report["labels"])
    else:
        orchestrate._write_json(out_path, report)
    click.echo(f"report -> {out_path}")


@cli.command("serve")
@click.option("--data-dir", default="data", show_default=True, type=click.Path())
@click.option("--synthetic", "synthetic_path", type=click.Path(exists=True))
@click.option("--real", "real_path", type=click.Path(exists=True))
@click.option("--webui", "webui_dir", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve_cmd(data_dir, synthetic_path, real_path, webui_dir, host, port):
    """Run the annotator HTTP service."""
    import uvicorn

    from .annotator import SessionStore, create_app

    store = SessionStore(data_dir)
    synthetic = load_corpus(synthetic_path).notes if synthetic_path else []
    real = load_corpus(real_path).notes if real_path else []
    app = create_app(store, synthetic, real, webui_dir=webui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@cli.command("run")
@click.option("--method",
              type=click.Choice(["diversity", "random", "zeroshot", "realworld", "all"]),
              required=True)
@click.option("--entity", required=True)
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--working", "working_path", required=True, type=click.Path(exists=True))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int, help="Master seed override.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def run_cmd(method, entity, config_path, working_path, test_path, seed, out_dir):
    """Run one experiment condition (or all four) end to end."""
    cfg = (orchestrate.load_config(config_path) if config_path
           else orchestrate.PipelineConfig())
    if seed is not None:
        cfg.master_seed = seed
    if method == "all":
        orchestrate.compare_methods(cfg, working_path, test_path, out_dir, entity)
    else:
        runner = orchestrate.ConditionRunner(cfg, working_path, test_path, out_dir)
        runner.run_condition(method, entity)
    click.echo(f"artifacts -> {out_dir}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.Abort:
        return 1
    except EndpointError as exc:
        click.echo(f"endpoint error: {exc}", err=True)
        return 3
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
