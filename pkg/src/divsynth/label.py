"""Present/absent labeling of representative notes: LLM classification,
label files, and precedence resolution (human > file > llm)."""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

from . import jsonio
from .corpus import LABELS, Note
from .errors import DataError
from .httpapi import EndpointConfig, chat_request
from .promptgen import load_template

_ORIGIN_RANK = {"human": 3, "file": 2, "llm": 1}
_ANSWER = re.compile(r"^[\s\.,:;!\"'()\[\]-]*(present|absent)[\s\.,:;!\"'()\[\]-]*$",
                     re.IGNORECASE)


class LabelParseError(DataError):
    """The labeler's output never matched the closed vocabulary."""


@dataclass
class LabelResult:
    note_id: str
    entity: str
    label: str
    origin: str
    raw_response: str | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise DataError(f"unknown label {self.label!r} for note {self.note_id!r}")
        if self.origin not in _ORIGIN_RANK:
            raise DataError(f"unknown label origin {self.origin!r}")


def parse_label(response: str) -> str | None:
    """Map a raw model response onto {present, absent}; None if unparseable."""
    match = _ANSWER.match(response.strip())
    return match.group(1).lower() if match else None


def label_llm(note: Note, entity: str, cfg: EndpointConfig,
              template_id: str = "label_default",
              temperature: float = 0.0, max_tokens: int = 8) -> LabelResult:
    """Single-note LLM classification with a one-word constrained answer.

    Re-asks up to cfg.retries times when the output does not parse;
    raises LabelParseError naming the note afterwards.
    """
    system, user = load_template(template_id)
    substitutions = {"{{entity}}": entity, "{{text}}": note.text}
    for placeholder, value in substitutions.items():
        system = system.replace(placeholder, value)
        user = user.replace(placeholder, value)
    messages = [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]
    last_response = ""
    for _ in range(cfg.retries + 1):
        content, _finish = chat_request(cfg, messages, temperature, max_tokens)
        last_response = content
        label = parse_label(content)
        if label is not None:
            return LabelResult(note_id=note.id, entity=entity, label=label,
                               origin="llm", raw_response=content)
    raise LabelParseError(
        f"note {note.id!r}: unparseable label response {last_response!r} "
        f"after {cfg.retries + 1} attempts"
    )


def label_notes(notes, entity: str, cfg: EndpointConfig,
                template_id: str = "label_default") -> list[LabelResult]:
    """Label a collection, skipping (with a warning) unparseable notes."""
    results = []
    for note in notes:
        try:
            results.append(label_llm(note, entity, cfg, template_id))
        except LabelParseError as exc:
            warnings.warn(str(exc), stacklevel=2)
    return results


def load_labels(path) -> list[LabelResult]:
    """Read a labels JSONL file; duplicate (note_id, entity) keep the last."""
    seen: dict[tuple[str, str], int] = {}
    results: list[LabelResult] = []
    for lineno, rec in jsonio.read_jsonl(path):
        missing = [k for k in ("note_id", "entity", "label") if k not in rec]
        if missing:
            raise DataError(f"{path}:{lineno}: missing field(s) {missing}")
        label = rec["label"]
        if label not in LABELS:
            raise DataError(f"{path}:{lineno}: unknown label token {label!r}")
        result = LabelResult(note_id=str(rec["note_id"]), entity=str(rec["entity"]),
                             label=label, origin="file")
        key = (result.note_id, result.entity)
        if key in seen:
            warnings.warn(
                f"{path}:{lineno}: duplicate label for {key}; last wins",
                stacklevel=2,
            )
            results[seen[key]] = result
        else:
            seen[key] = len(results)
            results.append(result)
    return results


def effective_labels(results) -> dict[tuple[str, str], LabelResult]:
    """One effective label per (note_id, entity): human > file > llm.

    Within one origin, later results override earlier ones.
    """
    chosen: dict[tuple[str, str], LabelResult] = {}
    for result in results:
        key = (result.note_id, result.entity)
        if key not in chosen or _ORIGIN_RANK[result.origin] >= _ORIGIN_RANK[chosen[key].origin]:
            chosen[key] = result
    return chosen


def save_labels(results, path) -> None:
    jsonio.write_jsonl(
        path,
        ({"note_id": r.note_id, "entity": r.entity, "label": r.label}
         for r in results),
    )
