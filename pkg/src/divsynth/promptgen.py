"""Few-shot and zero-shot prompt batches with token-window calibration."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import jsonio
from .corpus import TokenWindow
from .errors import DataError
from .seeding import derive_seed, rng


@dataclass
class PromptSpec:
    prompt_id: str
    entity: str
    target_label: str
    shot_ids: list[str] = field(default_factory=list)
    token_window: TokenWindow = field(default_factory=lambda: TokenWindow(1, 1))
    template_id: str = "fewshot_default"
    seed: int = 0

    def __post_init__(self):
        if self.target_label not in ("present", "absent"):
            raise DataError(f"unknown target label {self.target_label!r}")


@dataclass
class PromptBatch:
    prompts: list[PromptSpec]
    method: str

    def __post_init__(self):
        n_pos = sum(1 for p in self.prompts if p.target_label == "present")
        n_neg = len(self.prompts) - n_pos
        if n_pos != n_neg:
            raise DataError(f"unbalanced batch: {n_pos} present vs {n_neg} absent")


def build_fewshot_prompts(labeled_reps, entity: str, per_class: int = 325,
                          shots: int = 5, window: TokenWindow = None,
                          seed: int = 0, template_id: str = "fewshot_default",
                          method: str = "diversity") -> PromptBatch:
    """Per class, `per_class` prompts of `shots` same-class exemplars
    sampled independently per prompt from the labeled representatives.

    Falls back to sampling with replacement (with a warning) when a class
    has fewer than `shots` members.
    """
    if window is None:
        raise DataError("a token window is required")
    by_label = {"present": [], "absent": []}
    for note in labeled_reps:
        label = note.label if hasattr(note, "label") else note[1]
        note_id = note.id if hasattr(note, "id") else note[0]
        if label not in by_label:
            raise DataError(f"representative {note_id!r} lacks a usable label")
        by_label[label].append(note_id)
    prompts = []
    for label in ("present", "absent"):
        ids = by_label[label]
        if not ids:
            raise DataError(f"no representatives labeled {label!r}")
        replace = len(ids) < shots
        if replace:
            warnings.warn(
                f"only {len(ids)} {label!r} representatives for {shots}-shot "
                "prompts; sampling with replacement",
                stacklevel=2,
            )
        gen = rng(seed, "fewshot", entity, label)
        for idx in range(per_class):
            pick = gen.choice(len(ids), size=shots, replace=replace)
            prompt_id = f"{method}-{entity}-{label}-{idx:04d}"
            prompts.append(PromptSpec(
                prompt_id=prompt_id,
                entity=entity,
                target_label=label,
                shot_ids=[ids[i] for i in pick],
                token_window=window,
                template_id=template_id,
                seed=derive_seed(seed, prompt_id),
            ))
    return PromptBatch(prompts=prompts, method=method)


def build_zeroshot_prompts(entity: str, per_class: int = 325,
                           window: TokenWindow = None,
                           template_id: str = "zeroshot_default") -> PromptBatch:
    """Exemplar-free control batch; class balance matches the few-shot batches."""
    if window is None:
        raise DataError("a token window is required")
    prompts = []
    for label in ("present", "absent"):
        for idx in range(per_class):
            prompt_id = f"zeroshot-{entity}-{label}-{idx:04d}"
            prompts.append(PromptSpec(
                prompt_id=prompt_id,
                entity=entity,
                target_label=label,
                shot_ids=[],
                token_window=window,
                template_id=template_id,
                seed=derive_seed(0, prompt_id),
            ))
    return PromptBatch(prompts=prompts, method="zeroshot")


def load_template(template_id: str, template_dir: str | Path | None = None) -> tuple[str, str]:
    """(system, user) template pair for the id; `---` separates the parts."""
    if template_dir is not None:
        path = Path(template_dir) / f"{template_id}.txt"
        if not path.exists():
            raise DataError(f"unknown template id {template_id!r} in {template_dir}")
        text = path.read_text(encoding="utf-8")
    else:
        ref = resources.files("divsynth.templates").joinpath(f"{template_id}.txt")
        try:
            text = ref.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise DataError(f"unknown template id {template_id!r}") from None
    if "\n---\n" not in text:
        raise DataError(f"template {template_id!r} lacks a `---` separator line")
    system, user = text.split("\n---\n", 1)
    return system.strip(), user.strip()


def render(spec: PromptSpec, notes, template_dir=None) -> list[dict]:
    """Chat messages for the prompt: shot texts embedded verbatim, window
    bounds substituted into the instruction."""
    system, user = load_template(spec.template_id, template_dir)
    example_texts = []
    for i, shot_id in enumerate(spec.shot_ids, start=1):
        if shot_id not in notes:
            raise DataError(f"missing shot note {shot_id!r}")
        example_texts.append(f"Example {i}:\n{notes[shot_id].text}")
    substitutions = {
        "{{examples}}": "\n\n".join(example_texts),
        "{{low}}": str(spec.token_window.low),
        "{{high}}": str(spec.token_window.high),
        "{{entity}}": spec.entity,
        "{{label}}": spec.target_label,
    }
    for placeholder, value in substitutions.items():
        system = system.replace(placeholder, value)
        user = user.replace(placeholder, value)
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]


def save_prompt_batch(batch: PromptBatch, path) -> None:
    jsonio.write_jsonl(
        path,
        (
            {
                "prompt_id": p.prompt_id,
                "entity": p.entity,
                "target_label": p.target_label,
                "shot_ids": p.shot_ids,
                "window_low": p.token_window.low,
                "window_high": p.token_window.high,
                "template_id": p.template_id,
                "seed": p.seed,
                "method": batch.method,
            }
            for p in batch.prompts
        ),
    )


def load_prompt_batch(path) -> PromptBatch:
    prompts, methods = [], set()
    for _, rec in jsonio.read_jsonl(path):
        methods.add(rec["method"])
        prompts.append(PromptSpec(
            prompt_id=rec["prompt_id"],
            entity=rec["entity"],
            target_label=rec["target_label"],
            shot_ids=list(rec["shot_ids"]),
            token_window=TokenWindow(int(rec["window_low"]), int(rec["window_high"])),
            template_id=rec["template_id"],
            seed=int(rec["seed"]),
        ))
    if len(methods) != 1:
        raise DataError(f"prompt batch mixes methods: {sorted(methods)}")
    return PromptBatch(prompts=prompts, method=methods.pop())
