"""End-to-end demo: mock corpus, all four conditions, combined summary.

Everything runs offline (mock embedder and generator). Artifacts land in
the given output directory; the combined summary echoes the threshold,
gap, and ratio reports.

Usage: python scripts/run_demo.py --out demo-out [--seed 7]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from divsynth.corpus import save_corpus
from divsynth.mockdata import StyleCorpusSpec, make_style_corpus
from divsynth.orchestrate import PipelineConfig, compare_methods


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    spec = StyleCorpusSpec(label_noise=0.08)
    args.out.mkdir(parents=True, exist_ok=True)
    working_path = args.out / "working.jsonl"
    test_path = args.out / "test.jsonl"
    save_corpus(make_style_corpus(spec, args.seed, "w"), working_path)
    save_corpus(make_style_corpus(spec.balanced(400), args.seed + 1, "t"),
                test_path)

    cfg = PipelineConfig(
        master_seed=args.seed,
        reducer="umap",
        curve_epochs=300,
        curve_learning_rate=0.3,
        repeats=2,
    )
    out = compare_methods(cfg, working_path, test_path, args.out / "runs",
                          spec.entity)
    print(json.dumps(out["summary"], indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
