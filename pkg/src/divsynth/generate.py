"""Synthetic note generation: chat-endpoint execution of prompt batches
and a deterministic mock generator for offline runs and tests."""

from __future__ import annotations

import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import jsonio
from .corpus import Note, count_tokens
from .errors import DataError, EndpointError
from .httpapi import EndpointConfig, chat_request
from .promptgen import PromptBatch, PromptSpec, render
from .seeding import rng

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")

# Small synonym table for the mock perturbation; keys and values are
# interchangeable clinical boilerplate.
_SYNONYMS = {
    "normal": "unremarkable",
    "unremarkable": "normal",
    "no": "without",
    "mild": "slight",
    "stable": "unchanged",
    "noted": "seen",
    "seen": "noted",
    "is": "appears",
}


@dataclass
class SamplingParams:
    temperature: float = 0.8
    max_tokens: int | None = None  # defaults to 2 * window.high


@dataclass
class SyntheticNote(Note):
    prompt_id: str = ""
    model: str = ""
    finish_reason: str = ""
    retries: int = 0

    def to_record(self) -> dict:
        rec = super().to_record()
        rec["prompt_id"] = self.prompt_id
        rec["model"] = self.model
        rec["finish_reason"] = self.finish_reason
        return rec


def generate(spec: PromptSpec, notes, cfg: EndpointConfig,
             sampling: SamplingParams | None = None, method: str = "diversity",
             tokenizer_mode: str = "whitespace") -> SyntheticNote:
    """One completion for one prompt, with empty-completion retries and
    soft token-window validation."""
    sampling = sampling or SamplingParams()
    messages = render(spec, notes)
    max_tokens = sampling.max_tokens or 2 * spec.token_window.high
    text, finish_reason, attempts = "", "", 0
    for attempts in range(cfg.retries + 1):
        content, finish_reason = chat_request(
            cfg, messages, sampling.temperature, max_tokens
        )
        text = content.strip()
        if text:
            break
    if not text:
        raise EndpointError(
            f"prompt {spec.prompt_id!r}: empty completion after "
            f"{cfg.retries + 1} attempts"
        )
    return _make_note(spec, text, method, tokenizer_mode,
                      model=cfg.model, finish_reason=finish_reason,
                      retries=attempts)


def _make_note(spec: PromptSpec, text: str, method: str, tokenizer_mode: str,
               model: str, finish_reason: str, retries: int = 0) -> SyntheticNote:
    tokens = count_tokens(text, tokenizer_mode)
    window = spec.token_window
    if not (window.low / 2 <= tokens <= 2 * window.high):
        warnings.warn(
            f"prompt {spec.prompt_id!r}: completion of {tokens} tokens is "
            f"outside the soft window [{window.low / 2:.0f}, {2 * window.high}]",
            stacklevel=3,
        )
    note = SyntheticNote(
        id=f"synth-{spec.prompt_id}",
        text=text,
        entity=spec.entity,
        label=spec.target_label,
        source="synthetic",
        method=method,
        prompt_id=spec.prompt_id,
        model=model,
        finish_reason=finish_reason,
        retries=retries,
    )
    note.token_count = tokens
    return note


def mock_generate(spec: PromptSpec, notes, seed: int,
                  method: str = "diversity") -> SyntheticNote:
    """Deterministic stand-in generator.

    Few-shot prompts are answered by resampling and perturbing sentences
    of the shot notes, constrained to the token window.  Zero-shot
    prompts emit text from an invented-vocabulary bank that shares no
    tokens with any real corpus.
    """
    gen = rng(seed, "mockgen", spec.prompt_id, spec.seed)
    low, high = spec.token_window.low, spec.token_window.high
    target = int(gen.integers(low, high + 1))
    if spec.shot_ids:
        shot_texts = [notes[sid].text for sid in spec.shot_ids]
        pool = []
        for text in shot_texts:
            pool.extend(s for s in _SENTENCE_SPLIT.split(text) if s.strip())
        # reorder, then sample with a head-heavy bias: generators latch on
        # to a few patterns from the examples rather than reusing all of
        # them evenly, so synthetic notes are more repetitive than real ones
        order = gen.permutation(len(pool))
        tokens: list[str] = []
        while len(tokens) < target:
            pick = int(len(pool) * gen.random() ** 2)
            sentence = pool[int(order[min(pick, len(pool) - 1)])]
            tokens.extend(sentence.split())
        tokens = tokens[:target]
        for i, tok in enumerate(tokens):
            if tok.lower() in _SYNONYMS and gen.random() < 0.15:
                tokens[i] = _SYNONYMS[tok.lower()]
        text = " ".join(tokens)
        if text in shot_texts:  # never reproduce a shot verbatim
            tokens[-1] = "reviewed" if tokens[-1] != "reviewed" else "noted"
            text = " ".join(tokens)
    else:
        word_bank = _invented_words(spec.entity, spec.target_label)
        tokens = [word_bank[int(gen.integers(len(word_bank)))]
                  for _ in range(target)]
        text = " ".join(tokens)
    return _make_note(spec, text, method, "whitespace",
                      model="mock", finish_reason="stop")


def _invented_words(entity: str, label: str, shared: int = 30,
                    distinct: int = 6) -> list[str]:
    """Gibberish bank for (entity, label), disjoint from natural text.

    Most of the bank is shared between the two labels of an entity, the
    way real zero-shot generations share phrasing and differ only in a
    few label-bearing words.
    """
    syllables = ["zor", "vax", "qui", "lmer", "dru", "pex", "fya", "wub",
                 "gly", "tch", "ost", "ukk"]

    def draw(gen, count):
        words = []
        for _ in range(count):
            n = int(gen.integers(2, 4))
            words.append("q" + "".join(
                syllables[int(gen.integers(len(syllables)))] for _ in range(n)))
        return words

    bank = draw(rng(0xD15C0, "bank", entity), shared)
    bank += draw(rng(0xD15C0, "bank", entity, label), distinct)
    return bank


def generate_batch(batch: PromptBatch, notes, cfg: EndpointConfig | None = None,
                   sampling: SamplingParams | None = None,
                   mock_seed: int | None = None,
                   checkpoint_path: str | Path | None = None,
                   checkpoint_every: int = 25) -> list[SyntheticNote]:
    """Run a whole batch, one note per prompt, in batch order.

    With `cfg` set, requests run with up to cfg.concurrency workers and
    completed notes are checkpointed to disk every `checkpoint_every`
    completions; a rerun with the same checkpoint file skips prompts that
    already finished.  With `mock_seed` set, generation is local and
    deterministic.
    """
    if (cfg is None) == (mock_seed is None):
        raise DataError("exactly one of cfg or mock_seed must be given")
    done: dict[str, SyntheticNote] = {}
    if checkpoint_path is not None and Path(checkpoint_path).exists():
        for _, rec in jsonio.read_jsonl(checkpoint_path):
            note = _synthetic_from_record(rec, batch.method)
            done[note.prompt_id] = note

    todo = [p for p in batch.prompts if p.prompt_id not in done]
    fresh: list[SyntheticNote] = []
    if mock_seed is not None:
        for spec in todo:
            fresh.append(mock_generate(spec, notes, mock_seed, batch.method))
    elif todo:
        def run(spec):
            return generate(spec, notes, cfg, sampling, batch.method)

        if cfg.concurrency > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
                fresh = list(pool.map(run, todo))
        else:
            fresh = [run(spec) for spec in todo]

    if checkpoint_path is not None and fresh:
        for start in range(0, len(fresh), checkpoint_every):
            chunk = fresh[start:start + checkpoint_every]
            jsonio.append_jsonl(checkpoint_path, (n.to_record() for n in chunk))

    for note in fresh:
        done[note.prompt_id] = note
    return [done[p.prompt_id] for p in batch.prompts]


def _synthetic_from_record(rec: dict, method: str) -> SyntheticNote:
    note = SyntheticNote(
        id=rec["id"],
        text=rec["text"],
        entity=rec["entity"],
        label=rec.get("label"),
        source="synthetic",
        method=method,
        prompt_id=rec["prompt_id"],
        model=rec.get("model", ""),
        finish_reason=rec.get("finish_reason", ""),
    )
    note.token_count = count_tokens(note.text)
    return note


def save_notes(notes, path) -> None:
    jsonio.write_jsonl(path, (n.to_record() for n in notes))
