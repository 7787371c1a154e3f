"""Constructed style-template corpora for offline experiments and tests.

Notes are built from a fixed number of syntactic "styles": each style has
its own invented vocabulary, and each (style, label) pair has its own
small bank of marker tokens that carry the label signal.  Style
frequencies are skewed, so uniform sampling under-covers the rare styles
while diversity sampling should not.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus, Note
from .seeding import rng

_SYLLABLES = ["ba", "cer", "dil", "fo", "gra", "hun", "ki", "lom", "mer",
              "nu", "pra", "qua", "rin", "sol", "tu", "ver", "wi", "xan",
              "yel", "zo"]

DEFAULT_WEIGHTS = (0.35, 0.22, 0.14, 0.09, 0.06, 0.05, 0.04, 0.025, 0.015, 0.01)


@dataclass
class StyleCorpusSpec:
    entity: str = "pleural effusion"
    n_notes: int = 2000
    n_styles: int = 10
    style_weights: tuple = DEFAULT_WEIGHTS
    # small per-style vocabulary keeps bigrams repeatable, so hashed
    # features transfer between notes instead of acting as noise
    vocab_per_style: int = 15
    marker_variants: int = 2
    marker_repeat: int = 3       # marker token repeated within its sentence
    marker_sent_prob: float = 0.6  # chance a sentence carries a marker
    sentences_lo: int = 6
    sentences_hi: int = 10
    words_per_sentence: int = 6
    # fraction of recorded labels flipped relative to the text's actual
    # content, imitating an imperfect automatic labeler on the pool
    label_noise: float = 0.0

    def balanced(self, n_notes: int) -> "StyleCorpusSpec":
        """Same styles, uniform style weights and clean labels (for test
        sets that weigh every style equally and are hand-annotated)."""
        from dataclasses import replace
        uniform = tuple(1.0 / self.n_styles for _ in range(self.n_styles))
        return replace(self, n_notes=n_notes, style_weights=uniform,
                       label_noise=0.0)


def style_vocabulary(style: int, size: int = 40) -> list[str]:
    """Deterministic invented vocabulary, disjoint across styles."""
    gen = rng(0x5713E, "vocab", style)
    words = []
    while len(words) < size:
        n = int(gen.integers(2, 4))
        word = "".join(_SYLLABLES[int(gen.integers(len(_SYLLABLES)))]
                       for _ in range(n))
        words.append(f"{word}{style}")  # suffix keeps styles disjoint
    return words


def marker_tokens(style: int, label: str, variants: int = 8) -> list[str]:
    """Label-carrying tokens, unique per (style, label)."""
    tag = "pos" if label == "present" else "neg"
    return [f"sign{tag}{style}v{v}" for v in range(variants)]


def make_style_corpus(spec: StyleCorpusSpec, seed: int,
                      id_prefix: str = "w") -> Corpus:
    """Skew-weighted corpus of labeled notes; each note records its style
    under extra["style"]."""
    if len(spec.style_weights) != spec.n_styles:
        raise ValueError("style_weights length must match n_styles")
    gen = rng(seed, "style-corpus", id_prefix)
    vocab = [style_vocabulary(s, spec.vocab_per_style)
             for s in range(spec.n_styles)]
    markers = {
        (s, label): marker_tokens(s, label, spec.marker_variants)
        for s in range(spec.n_styles) for label in ("present", "absent")
    }
    labels = ["present", "absent"] * (spec.n_notes // 2)
    labels += ["present"] * (spec.n_notes - len(labels))
    notes = []
    weights = list(spec.style_weights)
    for i in range(spec.n_notes):
        label = labels[i]
        style = int(gen.choice(spec.n_styles, p=weights))
        words = vocab[style]
        n_sentences = int(gen.integers(spec.sentences_lo, spec.sentences_hi + 1))
        sentences = []
        for j in range(n_sentences):
            picks = [words[int(gen.integers(len(words)))]
                     for _ in range(spec.words_per_sentence)]
            if gen.random() < spec.marker_sent_prob or j == 0:
                bank = markers[(style, label)]
                token = bank[int(gen.integers(len(bank)))]
                pos = int(gen.integers(1, len(picks)))
                picks[pos:pos] = [token] * spec.marker_repeat
            sentences.append(" ".join(picks) + ".")
        recorded = label
        if spec.label_noise > 0 and gen.random() < spec.label_noise:
            recorded = "absent" if label == "present" else "present"
        notes.append(Note(
            id=f"{id_prefix}{i:05d}",
            text=" ".join(sentences),
            entity=spec.entity,
            label=recorded,
            extra={"style": style, "true_label": label},
        ))
    return Corpus(notes)


def styles_of(notes) -> list[int]:
    return [int(n.extra["style"]) for n in notes]


def style_coverage(notes) -> int:
    """Distinct styles present among the notes."""
    return len(set(styles_of(notes)))
