import pytest

from divsynth.corpus import Corpus, Note, TokenWindow
from divsynth.errors import DataError
from divsynth.promptgen import (build_fewshot_prompts, build_zeroshot_prompts,
                                load_prompt_batch, load_template, render,
                                save_prompt_batch)


def reps(n_pos, n_neg):
    notes = []
    for i in range(n_pos):
        notes.append(Note(id=f"r{i}", text=f"finding number {i} is present .",
                          entity="effusion", label="present"))
    for i in range(n_neg):
        notes.append(Note(id=f"r{n_pos + i}", text=f"study {i} shows no finding .",
                          entity="effusion", label="absent"))
    return notes


WINDOW = TokenWindow(114, 192)


class TestFewshot:
    def test_650_prompt_contract(self):
        batch = build_fewshot_prompts(reps(25, 25), "effusion", window=WINDOW,
                                      seed=1)
        assert len(batch.prompts) == 650
        by_label = {"present": 0, "absent": 0}
        for p in batch.prompts:
            by_label[p.target_label] += 1
            assert len(p.shot_ids) == 5
            assert len(set(p.shot_ids)) == 5
            labels = {"present" if int(s[1:]) < 25 else "absent"
                      for s in p.shot_ids}
            assert labels == {p.target_label}
        assert by_label == {"present": 325, "absent": 325}

    def test_small_class_samples_with_replacement(self):
        with pytest.warns(UserWarning, match="replacement"):
            batch = build_fewshot_prompts(reps(3, 25), "effusion",
                                          window=WINDOW, seed=2)
        assert len(batch.prompts) == 650
        present = [p for p in batch.prompts if p.target_label == "present"]
        assert any(len(set(p.shot_ids)) < 5 for p in present)

    def test_deterministic(self):
        a = build_fewshot_prompts(reps(10, 10), "effusion", window=WINDOW, seed=3)
        b = build_fewshot_prompts(reps(10, 10), "effusion", window=WINDOW, seed=3)
        assert [p.shot_ids for p in a.prompts] == [p.shot_ids for p in b.prompts]

    def test_seed_changes_sampling(self):
        a = build_fewshot_prompts(reps(10, 10), "effusion", window=WINDOW, seed=3)
        b = build_fewshot_prompts(reps(10, 10), "effusion", window=WINDOW, seed=4)
        assert [p.shot_ids for p in a.prompts] != [p.shot_ids for p in b.prompts]

    def test_empty_class_rejected(self):
        with pytest.raises(DataError, match="absent"):
            build_fewshot_prompts(reps(10, 0), "effusion", window=WINDOW, seed=0)

    def test_shots_only_from_representatives(self):
        rep_notes = reps(8, 8)
        rep_ids = {n.id for n in rep_notes}
        batch = build_fewshot_prompts(rep_notes, "effusion", window=WINDOW, seed=5)
        assert all(set(p.shot_ids) <= rep_ids for p in batch.prompts)


class TestZeroshot:
    def test_default_contract(self):
        batch = build_zeroshot_prompts("effusion", window=WINDOW)
        assert len(batch.prompts) == 650
        assert all(p.shot_ids == [] for p in batch.prompts)
        assert batch.method == "zeroshot"

    def test_empty_batch(self):
        batch = build_zeroshot_prompts("effusion", per_class=0, window=WINDOW)
        assert batch.prompts == []

    def test_disjoint_id_namespaces(self):
        a = build_zeroshot_prompts("effusion", window=WINDOW)
        b = build_zeroshot_prompts("edema", window=WINDOW)
        assert {p.prompt_id for p in a.prompts}.isdisjoint(
            p.prompt_id for p in b.prompts)


class TestRender:
    def make_batch(self, **kw):
        rep_notes = reps(6, 6)
        corpus = Corpus(rep_notes)
        batch = build_fewshot_prompts(rep_notes, "effusion", window=WINDOW,
                                      seed=7, **kw)
        return batch, corpus

    def test_window_values_rendered(self):
        batch, corpus = self.make_batch()
        messages = render(batch.prompts[0], corpus)
        user = messages[1]["content"]
        assert "114" in user and "192" in user

    def test_shot_texts_verbatim_in_order(self):
        batch, corpus = self.make_batch()
        spec = batch.prompts[0]
        user = render(spec, corpus)[1]["content"]
        cursor = 0
        for shot_id in spec.shot_ids:
            pos = user.find(corpus[shot_id].text, cursor)
            assert pos >= 0
            cursor = pos

    def test_zeroshot_has_no_example_section(self):
        batch = build_zeroshot_prompts("effusion", window=WINDOW)
        corpus = Corpus([])
        messages = render(batch.prompts[0], corpus)
        assert "Example" not in messages[0]["content"]
        assert "Example" not in messages[1]["content"]

    def test_byte_identical_rendering(self):
        batch, corpus = self.make_batch()
        assert render(batch.prompts[0], corpus) == render(batch.prompts[0], corpus)

    def test_missing_shot_note(self):
        batch, _ = self.make_batch()
        with pytest.raises(DataError, match="missing shot"):
            render(batch.prompts[0], Corpus([]))

    def test_unknown_template(self):
        with pytest.raises(DataError, match="template"):
            load_template("nope_no_such_template")

    def test_template_label_and_entity_substituted(self):
        batch, corpus = self.make_batch()
        spec = batch.prompts[0]
        text = "\n".join(m["content"] for m in render(spec, corpus))
        assert spec.entity in text
        assert spec.target_label in text
        assert "{{" not in text

    def test_template_dir_override(self, tmp_path):
        (tmp_path / "custom.txt").write_text(
            "sys {{entity}}\n---\nuser {{low}}-{{high}}", encoding="utf-8")
        batch, corpus = self.make_batch()
        spec = batch.prompts[0]
        spec.template_id = "custom"
        messages = render(spec, corpus, template_dir=tmp_path)
        assert messages[0]["content"] == "sys effusion"
        assert messages[1]["content"] == "user 114-192"


class TestBatchIo:
    def test_round_trip(self, tmp_path):
        batch = build_fewshot_prompts(reps(5, 5), "effusion", window=WINDOW,
                                      seed=9, method="random")
        path = tmp_path / "batch.jsonl"
        save_prompt_batch(batch, path)
        loaded = load_prompt_batch(path)
        assert loaded.method == "random"
        assert len(loaded.prompts) == len(batch.prompts)
        for a, b in zip(batch.prompts, loaded.prompts):
            assert (a.prompt_id, a.shot_ids, a.token_window) == \
                (b.prompt_id, b.shot_ids, b.token_window)
