"""Note data model, ingestion, tokenization, and dataset splits."""

from __future__ import annotations

import math
import shlex
import subprocess
from dataclasses import dataclass, field

from . import jsonio
from .errors import DataError
from .seeding import rng

LABELS = ("present", "absent")
SOURCES = ("real", "synthetic")
METHODS = ("diversity", "random", "zeroshot", "realworld")
TOKENIZER_MODES = ("whitespace", "custom")

# Keys written explicitly by save_corpus; anything else round-trips via extra.
_NOTE_KEYS = ("id", "text", "entity", "label", "source", "method")


@dataclass
class Note:
    """A single clinical-text record."""

    id: str
    text: str
    entity: str
    label: str | None = None
    source: str = "real"
    method: str | None = None
    token_count: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise DataError("note id must be nonempty")
        if not self.text:
            raise DataError(f"note {self.id!r}: text must be nonempty")
        if self.label is not None and self.label not in LABELS:
            raise DataError(f"note {self.id!r}: unknown label {self.label!r}")
        if self.source not in SOURCES:
            raise DataError(f"note {self.id!r}: unknown source {self.source!r}")
        if self.method is not None and self.method not in METHODS:
            raise DataError(f"note {self.id!r}: unknown method {self.method!r}")
        if self.source == "synthetic" and self.method is None:
            raise DataError(f"note {self.id!r}: synthetic notes must carry a method")
        if self.source == "real" and self.method not in (None, "realworld"):
            raise DataError(
                f"note {self.id!r}: real notes may only carry method 'realworld'"
            )

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "text": self.text,
            "entity": self.entity,
            "label": self.label,
            "source": self.source,
            "method": self.method,
        }
        rec.update(self.extra)
        return rec


@dataclass
class TokenWindow:
    low: int
    high: int

    def __post_init__(self):
        if self.low <= 0 or self.high <= 0 or self.low > self.high:
            raise DataError(f"invalid token window [{self.low}, {self.high}]")


@dataclass
class SplitSpec:
    entity: str
    n_pos: int = 100
    n_neg: int = 100
    working_n: int = 5000
    seed: int = 0


class Corpus:
    """Ordered, id-unique collection of notes with a fixed tokenizer."""

    def __init__(self, notes=(), tokenizer_mode: str = "whitespace",
                 tokenizer_command: str | None = None):
        if tokenizer_mode not in TOKENIZER_MODES:
            raise DataError(f"unknown tokenizer mode {tokenizer_mode!r}")
        self.tokenizer_mode = tokenizer_mode
        self.tokenizer_command = tokenizer_command
        self._notes: list[Note] = []
        self._by_id: dict[str, Note] = {}
        for note in notes:
            self.add(note)

    def add(self, note: Note) -> None:
        if note.id in self._by_id:
            raise DataError(f"duplicate note id {note.id!r}")
        note.token_count = count_tokens(
            note.text, self.tokenizer_mode, self.tokenizer_command
        )
        self._notes.append(note)
        self._by_id[note.id] = note

    def __len__(self) -> int:
        return len(self._notes)

    def __iter__(self):
        return iter(self._notes)

    def __contains__(self, note_id: str) -> bool:
        return note_id in self._by_id

    def __getitem__(self, note_id: str) -> Note:
        try:
            return self._by_id[note_id]
        except KeyError:
            raise DataError(f"unknown note id {note_id!r}") from None

    @property
    def notes(self) -> list[Note]:
        return list(self._notes)

    def ids(self) -> list[str]:
        return [n.id for n in self._notes]

    def token_counts(self) -> list[int]:
        return [n.token_count for n in self._notes]

    def subset(self, ids) -> "Corpus":
        """New corpus holding the given ids, in the order given."""
        return Corpus(
            [self._by_id[i] for i in ids],
            tokenizer_mode=self.tokenizer_mode,
            tokenizer_command=self.tokenizer_command,
        )


def count_tokens(text: str, tokenizer_mode: str = "whitespace",
                 tokenizer_command: str | None = None) -> int:
    """Token count of `text`: whitespace runs, or an external command.

    Custom mode runs `tokenizer_command`, feeding the text on stdin and
    reading a single integer from stdout.
    """
    if tokenizer_mode == "whitespace":
        return len(text.split())
    if tokenizer_mode == "custom":
        if not tokenizer_command:
            raise DataError("custom tokenizer mode requires a command")
        try:
            proc = subprocess.run(
                shlex.split(tokenizer_command),
                input=text.encode("utf-8"),
                capture_output=True,
                check=True,
            )
            return int(proc.stdout.decode("utf-8").strip())
        except (subprocess.SubprocessError, OSError, ValueError) as exc:
            raise DataError(f"custom tokenizer failed: {exc}") from exc
    raise DataError(f"unknown tokenizer mode {tokenizer_mode!r}")


def _percentile(sorted_counts: list[int], p: float) -> int:
    """Linear interpolation at rank (n-1)*p/100, rounded half-up."""
    n = len(sorted_counts)
    rank = (n - 1) * p / 100.0
    lo = math.floor(rank)
    hi = min(lo + 1, n - 1)
    frac = rank - lo
    value = sorted_counts[lo] + frac * (sorted_counts[hi] - sorted_counts[lo])
    return math.floor(value + 0.5)


def token_window(corpus: Corpus, p_low: float = 25, p_high: float = 75) -> TokenWindow:
    """Percentile window of the corpus's token counts."""
    if len(corpus) == 0:
        raise DataError("token_window of an empty corpus")
    if not (0 <= p_low <= p_high <= 100):
        raise DataError(f"invalid percentile range [{p_low}, {p_high}]")
    counts = sorted(corpus.token_counts())
    return TokenWindow(_percentile(counts, p_low), _percentile(counts, p_high))


def load_corpus(path, tokenizer_mode: str = "whitespace",
                tokenizer_command: str | None = None) -> Corpus:
    """Read a note JSONL file into a Corpus; rejects duplicate ids."""
    corpus = Corpus(tokenizer_mode=tokenizer_mode, tokenizer_command=tokenizer_command)
    for lineno, rec in jsonio.read_jsonl(path):
        try:
            note = note_from_record(rec)
            corpus.add(note)
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return corpus


def note_from_record(rec: dict) -> Note:
    missing = [k for k in ("id", "text", "entity") if k not in rec]
    if missing:
        raise DataError(f"missing field(s) {missing}")
    extra = {k: v for k, v in rec.items() if k not in _NOTE_KEYS}
    return Note(
        id=str(rec["id"]),
        text=rec["text"],
        entity=rec["entity"],
        label=rec.get("label"),
        source=rec.get("source", "real"),
        method=rec.get("method"),
        extra=extra,
    )


def save_corpus(corpus: Corpus, path) -> None:
    jsonio.write_jsonl(path, (n.to_record() for n in corpus))


def split_test_set(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Held-out test split: n_pos present + n_neg absent notes for the entity.

    The sample is uniform without replacement, split deterministically by
    label from the spec seed.  Test and remainder partition the corpus.
    """
    pos_ids = [n.id for n in corpus
               if n.entity == spec.entity and n.label == "present"]
    neg_ids = [n.id for n in corpus
               if n.entity == spec.entity and n.label == "absent"]
    if len(pos_ids) < spec.n_pos:
        raise DataError(
            f"need {spec.n_pos} 'present' notes for {spec.entity!r}, "
            f"have {len(pos_ids)}"
        )
    if len(neg_ids) < spec.n_neg:
        raise DataError(
            f"need {spec.n_neg} 'absent' notes for {spec.entity!r}, "
            f"have {len(neg_ids)}"
        )
    take_pos = _sample_ids(pos_ids, spec.n_pos, rng(spec.seed, "test", "present"))
    take_neg = _sample_ids(neg_ids, spec.n_neg, rng(spec.seed, "test", "absent"))
    test_ids = set(take_pos) | set(take_neg)
    test = corpus.subset([i for i in corpus.ids() if i in test_ids])
    remainder = corpus.subset([i for i in corpus.ids() if i not in test_ids])
    return test, remainder


def sample_working_set(remainder: Corpus, n: int, seed: int) -> Corpus:
    """Uniform sample without replacement from the remainder."""
    if n > len(remainder):
        raise DataError(f"cannot sample {n} notes from {len(remainder)}")
    take = set(_sample_ids(remainder.ids(), n, rng(seed, "working")))
    return remainder.subset([i for i in remainder.ids() if i in take])


def _sample_ids(ids: list[str], n: int, generator) -> list[str]:
    if n == 0:
        return []
    idx = generator.choice(len(ids), size=n, replace=False)
    return [ids[i] for i in idx]
