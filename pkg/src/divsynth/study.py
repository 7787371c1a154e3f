"""Four-condition directional study on constructed style corpora.

Each master seed gets a fresh working corpus and a balanced test corpus;
the four augmentation conditions run against the same test set and
report style coverage, data-to-threshold, final AUROC, and set
similarity.
"""

from __future__ import annotations

import numpy as np

from . import metrics
from .cluster import kmeans, random_sample_control, select_representatives
from .corpus import token_window
from .embed import mock_embed_many, set_similarity
from .generate import generate_batch
from .mockdata import StyleCorpusSpec, make_style_corpus, style_coverage
from .promptgen import build_fewshot_prompts, build_zeroshot_prompts
from .reduce import UmapParams, reduce_pca, umap_reduce
from .seeding import derive_seed, rng

METHODS = ("realworld", "diversity", "random", "zeroshot")

# data_to_threshold substitute when a curve never reaches the threshold:
# one increment beyond the largest augmentation budget
PENALTY_NEVER_REACHED = 400.0


def embed_matrix(notes, dim: int, seed: int) -> np.ndarray:
    vectors = mock_embed_many([(n.id, n.text) for n in notes], dim, seed)
    return np.vstack([v.values for v in vectors])


def run_seed(master: int, spec: StyleCorpusSpec, reducer: str = "umap",
             dim: int = 512, repeats: int = 2, curve_epochs: int = 300,
             curve_learning_rate: float = 0.3, threshold: float = 0.85,
             test_n: int = 400) -> dict:
    """One master seed: build corpora, run all four conditions."""
    working = make_style_corpus(spec, derive_seed(master, "working"), "w")
    test = make_style_corpus(spec.balanced(test_n),
                             derive_seed(master, "test"), "t")
    embed_seed = derive_seed(master, "embed")

    def embedder(notes):
        return embed_matrix(notes, dim, embed_seed)

    window = token_window(working)

    features = embedder(working.notes)
    if reducer == "umap":
        layout = umap_reduce(features,
                             UmapParams(seed=derive_seed(master, "umap")))
    else:
        layout = reduce_pca(features, 2)
    clustering = kmeans(layout.coordinates, 50, derive_seed(master, "kmeans"))
    div_reps = select_representatives(clustering, layout.coordinates,
                                      working.notes)
    rand_reps = random_sample_control(working.notes, 50,
                                      derive_seed(master, "rand-reps"))
    div_notes = [working[i] for i in div_reps.ids()]
    rand_notes = [working[i] for i in rand_reps.ids()]
    coverage = {
        "diversity": style_coverage(div_notes),
        "random": style_coverage(rand_notes),
    }

    gen = rng(master, "baseline")
    baseline_other = [working.notes[i] for i in
                      gen.choice(len(working.notes), size=50, replace=False)]

    pools, baselines = {}, {}
    for method, reps_notes in (("diversity", div_notes), ("random", rand_notes)):
        batch = build_fewshot_prompts(
            reps_notes, spec.entity, per_class=325, shots=5, window=window,
            seed=derive_seed(master, "prompts", method), method=method)
        pools[method] = generate_batch(
            batch, working, mock_seed=derive_seed(master, "gen", method))
        baselines[method] = reps_notes
    zs_batch = build_zeroshot_prompts(spec.entity, per_class=325, window=window)
    pools["zeroshot"] = generate_batch(
        zs_batch, working, mock_seed=derive_seed(master, "gen", "zeroshot"))
    baselines["zeroshot"] = baseline_other

    exclude = {n.id for n in baseline_other}
    candidates = [n for n in working.notes if n.id not in exclude]
    pick = rng(master, "real-pool").choice(len(candidates), size=650,
                                           replace=False)
    pools["realworld"] = [candidates[i] for i in pick]
    baselines["realworld"] = baseline_other

    data_needed, finals = {}, {}
    for method in METHODS:
        curve = metrics.run_learning_curve(
            baselines[method], pools[method], test.notes, embedder,
            increment=25, iterations=15, repeats=repeats,
            seed=derive_seed(master, "curve", method), method=method,
            epochs=curve_epochs, learning_rate=curve_learning_rate)
        value = metrics.data_to_threshold(curve, "auroc", threshold)
        data_needed[method] = PENALTY_NEVER_REACHED if value is None else value
        finals[method] = curve.points[-1].auroc_mean

    real_matrix = embedder(working.notes)
    sims = {m: set_similarity(embedder(pools[m]), real_matrix)
            for m in ("diversity", "zeroshot")}
    return {"coverage": coverage, "data": data_needed, "finals": finals,
            "sims": sims}


def aggregate(results: list[dict]) -> dict:
    """Seed-averaged means of every reported quantity."""
    def mean(key, name):
        return float(np.mean([r[key][name] for r in results]))

    return {
        "coverage": {m: mean("coverage", m) for m in ("diversity", "random")},
        "data": {m: mean("data", m) for m in METHODS},
        "finals": {m: mean("finals", m) for m in METHODS},
        "sims": {m: mean("sims", m) for m in ("diversity", "zeroshot")},
    }
