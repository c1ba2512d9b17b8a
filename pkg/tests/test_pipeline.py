import numpy as np

from signquad.geometry import Quad
from signquad.evaluate import aggregate, evaluate_dataset, match_image
from signquad.labels import BoardKind, DetectRecord, OcrRecord, write_label_file
from signquad.pipeline import (ComposeOptions, PipelineInput, compose, compose_image,
                               load_inputs, write_predictions)

from synth import make_corpus, rect, write_corpus

BOARD = rect(0, 0, 300, 100)


def test_compose_examples():
    one = PipelineInput([BOARD], [OcrRecord(rect(20, 20, 140, 50), "老王面馆")])
    recs, diags = compose_image(one)
    assert [(r.quad, r.store_name) for r in recs] == [(BOARD, "老王面馆")] and not diags
    two = PipelineInput([BOARD], [OcrRecord(rect(160, 20, 220, 50), "面馆"),
                                  OcrRecord(rect(20, 20, 80, 50), "老王")])
    assert compose_image(two)[0][0].store_name == "老王面馆"
    empty = PipelineInput([BOARD], [OcrRecord(rect(500, 500, 560, 530), "远处")])
    assert compose_image(empty) == ([], [])


def test_mixed_direction_board_dropped_with_diagnostic():
    mixed = PipelineInput([BOARD], [OcrRecord(rect(20, 20, 80, 50), "老王"),
                                    OcrRecord(rect(200, 5, 230, 95), "面馆")])
    recs, diags = compose_image(mixed, image_id="x")
    assert recs == [] and len(diags) == 1 and "mixed" in diags[0]


def test_name_rules_enforced_only_on_request():
    inp = PipelineInput([BOARD], [OcrRecord(rect(20, 20, 140, 50), "KFC炸鸡")])
    assert len(compose_image(inp)[0]) == 1
    recs, diags = compose_image(inp, ComposeOptions(enforce_name_rules=True))
    assert recs == [] and "English" in diags[0]


def test_refit_is_noop_for_quads():
    skewed = Quad(((8, 0), (300, 3), (296, 100), (0, 97)))
    inp = PipelineInput([skewed], [OcrRecord(rect(20, 20, 140, 50), "老王面馆")])
    assert compose_image(inp, ComposeOptions(refit_quads=True))[0][0].quad.area == skewed.area


def test_corpus_round_trip_and_invariants():
    corpus = make_corpus(20, seed=3)
    inputs = {k: PipelineInput([d.quad for d in img.detects if d.kind is BoardKind.STORE], img.ocr)
              for k, img in corpus.items()}
    preds, diags = compose(inputs, ComposeOptions(enforce_name_rules=True))
    assert not diags
    for k, img in corpus.items():
        assert len(preds.get(k, [])) <= len(inputs[k].boards)
    report = aggregate(match_image(preds.get(k, []), img.signs, image_id=k)
                       for k, img in corpus.items())
    assert report.f_score == 1.0
    rng = np.random.default_rng(0)
    shuffled = {}
    for k in reversed(list(inputs)):
        b, o = inputs[k].boards, inputs[k].ocr
        shuffled[k] = PipelineInput([b[i] for i in rng.permutation(len(b))],
                                    [o[i] for i in rng.permutation(len(o))])
    assert compose(shuffled, ComposeOptions(enforce_name_rules=True)) == (preds, diags)


def test_directory_round_trip(tmp_path):
    gt, det, ocr = write_corpus(make_corpus(20, seed=4), tmp_path)
    inputs, diags = load_inputs(det, ocr, strict=True)
    assert not diags and len(inputs) == 20
    preds, _ = compose(inputs)
    write_predictions(tmp_path / "pred", preds)
    assert evaluate_dataset(tmp_path / "pred", gt).f_score == 1.0


def test_load_inputs_ignores_non_store_and_orphan_ocr(tmp_path):
    det, ocr = tmp_path / "det", tmp_path / "ocr"
    det.mkdir()
    ocr.mkdir()
    write_label_file(det / "a.txt", [DetectRecord(BOARD, BoardKind.NON_STORE),
                                     DetectRecord(rect(400, 0, 600, 80), BoardKind.STORE)])
    write_label_file(ocr / "a.txt", [OcrRecord(rect(20, 20, 80, 50), "老王")])
    write_label_file(ocr / "b.txt", [OcrRecord(rect(20, 20, 80, 50), "老王")])
    inputs, _ = load_inputs(det, ocr)
    assert list(inputs) == ["a"] and inputs["a"].boards == [rect(400, 0, 600, 80)]
    assert compose(inputs) == ({}, [])
