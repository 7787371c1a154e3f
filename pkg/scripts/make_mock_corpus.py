"""Write a style-template mock corpus pair (working + test) to disk for
CLI experimentation.

Usage: python scripts/make_mock_corpus.py --out data/ [--n 2000] [--seed 1]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from divsynth.corpus import save_corpus
from divsynth.mockdata import StyleCorpusSpec, make_style_corpus


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--n", type=int, default=2000)
    parser.add_argument("--test-n", type=int, default=400)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--label-noise", type=float, default=0.08)
    args = parser.parse_args()

    spec = StyleCorpusSpec(n_notes=args.n, label_noise=args.label_noise)
    working = make_style_corpus(spec, args.seed, id_prefix="w")
    test = make_style_corpus(spec.balanced(args.test_n), args.seed + 1,
                             id_prefix="t")
    args.out.mkdir(parents=True, exist_ok=True)
    save_corpus(working, args.out / "working.jsonl")
    save_corpus(test, args.out / "test.jsonl")
    print(f"wrote {len(working)} working notes and {len(test)} test notes "
          f"to {args.out}")


if __name__ == "__main__":
    main()
