import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from tubetopo.datakit import (
    DEFAULT_TEMPLATE,
    PredictionLine,
    RecordStore,
    dumps_line,
    emit_prompt,
    load_masks,
    mask_from_png,
    mask_to_png,
    read_mask,
    read_predictions,
    read_records,
    write_jsonl,
    write_mask,
)
from tubetopo.errors import DataError, MaskFormatError, TemplateError
from tubetopo.reward import parse_answer, render_answer
from tubetopo.types import ANOMALY_TYPES


class TestMasks:
    @settings(max_examples=40, deadline=None)
    @given(arrays(np.bool_, st.tuples(st.integers(1, 40), st.integers(1, 40))))
    def test_png_round_trip(self, m):
        assert np.array_equal(mask_from_png(mask_to_png(m)), m)

    def test_file_round_trip_and_threshold(self, tmp_path):
        m = np.random.default_rng(0).random((30, 20)) < 0.4
        write_mask(m, tmp_path / "m.png")
        assert np.array_equal(read_mask(tmp_path / "m.png"), m)
        raw = np.array([[0, 127, 128, 255]], dtype=np.uint8)
        Image.fromarray(raw, mode="L").save(tmp_path / "t.png")
        assert read_mask(tmp_path / "t.png").tolist() == [[False, False, True, True]]
        Image.fromarray(np.full((4, 4), 255, np.uint8), mode="L").save(tmp_path / "w.pgm")
        assert read_mask(tmp_path / "w.pgm").all()

    def test_written_values(self, tmp_path):
        m = np.array([[1, 0]], dtype=bool)
        write_mask(m, tmp_path / "m.png")
        assert np.asarray(Image.open(tmp_path / "m.png")).tolist() == [[255, 0]]

    def test_rejects_colour_and_garbage(self, tmp_path):
        Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
        with pytest.raises(MaskFormatError):
            read_mask(tmp_path / "c.png")
        (tmp_path / "g.png").write_bytes(b"not an image")
        with pytest.raises(MaskFormatError):
            read_mask(tmp_path / "g.png")
        with pytest.raises(FileNotFoundError):
            read_mask(tmp_path / "missing.png")


class TestRecords:
    def test_empty_file(self, tmp_path):
        (tmp_path / "e.jsonl").write_text("")
        assert read_records(tmp_path / "e.jsonl") == []

    def test_round_trip_is_byte_stable(self, small_dataset, tmp_path):
        records = read_records(small_dataset)
        write_jsonl(records, tmp_path / "copy.jsonl")
        assert (tmp_path / "copy.jsonl").read_bytes() == small_dataset.read_bytes()

    def test_unknown_fields_preserved(self, small_dataset, tmp_path):
        lines = small_dataset.read_text().splitlines()
        d = json.loads(lines[0])
        d["zz_note"] = {"k": [1, 2]}
        d["aa_tag"] = "x"
        (tmp_path / "x.jsonl").write_text(json.dumps(d) + "\n")
        rec = read_records(tmp_path / "x.jsonl")[0]
        assert rec.extra == {"zz_note": {"k": [1, 2]}, "aa_tag": "x"}
        out = rec.to_json()
        assert list(out)[-2:] == ["aa_tag", "zz_note"]

    def test_malformed_line_number(self, small_dataset, tmp_path):
        lines = small_dataset.read_text().splitlines()[:8]
        lines[6] = lines[6][:-5]
        (tmp_path / "bad.jsonl").write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError) as err:
            read_records(tmp_path / "bad.jsonl")
        assert err.value.line == 7 and ":7:" in str(err.value)

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("width"),
            lambda d: d.update(width="256"),
            lambda d: d.update(betti_before=[1]),
            lambda d: d.update(annotations=[{"Position": [0, 0, 2000, 10], "ErrorType": "extra_branch"}]),
            lambda d: d.update(annotations=[{"Position": [0, 0, 20, 10], "ErrorType": "hole"}]),
            lambda d: d.update(
                annotations=[
                    {"Position": [0, 0, 20, 10], "ErrorType": "extra_branch"},
                    {"Position": [0, 0, 20, 10], "ErrorType": "broken_connection"},
                ]
            ),
        ],
    )
    def test_schema_violations(self, small_dataset, tmp_path, mutate):
        d = json.loads(small_dataset.read_text().splitlines()[0])
        mutate(d)
        (tmp_path / "v.jsonl").write_text(json.dumps(d) + "\n")
        with pytest.raises(DataError):
            read_records(tmp_path / "v.jsonl")

    def test_duplicate_ids(self, small_dataset, tmp_path):
        line = small_dataset.read_text().splitlines()[0]
        (tmp_path / "d.jsonl").write_text(line + "\n" + line + "\n")
        with pytest.raises(DataError, match="duplicate"):
            read_records(tmp_path / "d.jsonl")

    def test_coordinates_are_normalized_ints(self, small_dataset):
        for line in small_dataset.read_text().splitlines():
            for a in json.loads(line)["annotations"]:
                assert all(type(v) is int and 0 <= v <= 1000 for v in a["Position"])

    def test_load_masks_checks_size(self, small_dataset):
        rec = read_records(small_dataset)[0]
        clean, corrupt = load_masks(rec, small_dataset.parent)
        assert clean.shape == (rec.height, rec.width) == corrupt.shape
        rec.width = 100
        with pytest.raises(DataError):
            load_masks(rec, small_dataset.parent)


class TestPredictions:
    def test_both_kinds(self, tmp_path):
        p = tmp_path / "p.jsonl"
        p.write_text(
            dumps_line({"id": "a", "response": "<answer>[]</answer>"})
            + "\n\n"
            + dumps_line({"id": "b", "prediction": [{"Position": [1, 2, 30, 40], "ErrorType": "missing_branch"}]})
            + "\n"
        )
        a, b = read_predictions(p)
        assert a.response and a.prediction is None
        assert b.prediction[0].box == (1, 2, 30, 40)
        assert PredictionLine.from_json(b.to_json()) == b

    def test_needs_exactly_one(self):
        with pytest.raises(DataError):
            PredictionLine.from_json({"id": "a"})
        with pytest.raises(DataError):
            PredictionLine.from_json({"id": "a", "response": "", "prediction": []})


class TestPrompts:
    def test_default_lists_labels(self, small_dataset):
        rec = read_records(small_dataset)[0]
        text = emit_prompt(rec)
        assert all(t.value in text for t in ANOMALY_TYPES)
        assert "<answer>" in text and str(rec.width) in text
        assert emit_prompt(rec) == text

    def test_verbatim_and_unknown(self, small_dataset):
        rec = read_records(small_dataset)[0]
        assert emit_prompt(rec, "Find the errors.") == "Find the errors."
        with pytest.raises(TemplateError):
            emit_prompt(rec, "size $size")
        assert "$labels" in DEFAULT_TEMPLATE

    def test_answer_round_trip(self, small_dataset):
        for rec in read_records(small_dataset):
            assert parse_answer(render_answer(rec.annotations)) == rec.annotations


class TestStore:
    def test_lookup(self, small_dataset):
        store = RecordStore.open(small_dataset, cache_size=2)
        ids = store.ids()
        assert len(store) == 24 and ids[0] in store and "nope" not in store
        for sid in ids[:5]:
            rec = store.get(sid)
            assert rec.annotations == tuple(store.line(sid).annotations)
            assert not rec.clean.flags.writeable
        with pytest.raises(KeyError):
            store.get("nope")
