import random

import pytest

from tubetopo.errors import DataError
from tubetopo.evaluation import COCO_THRESHOLDS, EvalCounts, evaluate, match_eval
from tubetopo.types import ANOMALY_TYPES, Anomaly, AnomalyType as T

from oracles import naive_evaluate


def A(x1, y1, x2, y2, kind=T.BROKEN):
    return Anomaly((x1, y1, x2, y2), kind)


def random_dataset(r: random.Random, n=30):
    gt, pred = {}, {}
    for i in range(n):
        sid = f"s{i:03d}"
        g = []
        for _ in range(r.choice([0, 0, 1, 2, 3, 5])):
            x, y = r.randrange(0, 800), r.randrange(0, 800)
            g.append(Anomaly((x, y, x + r.randrange(10, 150), y + r.randrange(10, 150)), r.choice(ANOMALY_TYPES)))
        p = []
        for a in g:
            roll = r.random()
            if roll < 0.6:
                x1, y1, x2, y2 = a.box
                d = r.randrange(-30, 31)
                nx1 = max(0, x1 + d)
                p.append(Anomaly((nx1, y1, max(nx1 + 1, min(1000, x2 + d + 1)), y2), a.type))
            elif roll < 0.7:
                p.append(Anomaly(a.box, r.choice(ANOMALY_TYPES)))
        for _ in range(r.choice([0, 0, 0, 1, 2])):
            x, y = r.randrange(0, 800), r.randrange(0, 800)
            p.append(Anomaly((x, y, x + 60, y + 60), r.choice(ANOMALY_TYPES)))
        gt[sid] = g
        if r.random() < 0.9:
            pred[sid] = p
    return gt, pred


def test_naive_oracle_agreement():
    r = random.Random(0)
    for _ in range(50):
        gt, pred = random_dataset(r)
        assert evaluate(gt.items(), pred.items()) == naive_evaluate(gt, pred)


def test_ground_truth_as_prediction():
    gt, _ = random_dataset(random.Random(1))
    rep = evaluate(gt.items(), gt.items())
    for tau in ("0.30", "0.50", "0.75"):
        assert rep[f"f1@{tau}"] == 1.0
    assert rep["aF1"] == 1.0 and rep["count_mae"] == 0.0 and rep["count_accuracy"] == 1.0
    assert rep["mps_f1@0.50"] == 1.0 and rep["negative_accuracy"] == 1.0


def test_iou_06_fixture():
    gt = {"a": [A(0, 0, 100, 100)]}
    pred = {"a": [A(0, 0, 100, 60)]}  # IoU 0.6
    rep = evaluate(gt.items(), pred.items())
    assert abs(rep["aF1"] - 0.3) < 1e-15
    assert rep["f1@0.50"] == 1.0 and rep["f1@0.75"] == 0.0
    assert rep["mean_iou@0.50"] == pytest.approx(0.6)


def test_match_eval_cases():
    c = match_eval([A(0, 0, 100, 100)], [A(0, 0, 100, 100, T.EXTRA)])
    tp, fp, fn = c.at(0.5).sum(axis=0)
    assert (tp, fp, fn) == (0, 1, 1)
    c = match_eval([A(0, 0, 100, 100)], [A(0, 0, 100, 60)])
    assert tuple(c.at(0.5).sum(axis=0)) == (1, 0, 0)
    assert tuple(c.at(0.75).sum(axis=0)) == (0, 1, 1)


def test_counts_and_negatives():
    gt = {"a": [A(0, 0, 10, 10), A(20, 20, 30, 30)], "b": []}
    pred = {"a": [A(0, 0, 10, 10), A(20, 20, 30, 30), A(50, 50, 60, 60)], "b": []}
    rep = evaluate(gt.items(), pred.items())
    assert rep["count_accuracy"] == 0.5 and rep["count_mae"] == 0.5
    assert rep["n_negative"] == 1 and rep["negative_accuracy"] == 1.0
    assert rep["mps_f1@0.50"] == pytest.approx((0.8 + 1.0) / 2)


def test_mps_exceeds_micro_with_negatives():
    gt = {"a": [A(0, 0, 10, 10), A(20, 20, 30, 30)], "b": [], "c": []}
    pred = {"a": [A(0, 0, 10, 10)], "b": [], "c": []}
    rep = evaluate(gt.items(), pred.items())
    assert rep["mps_f1@0.50"] >= rep["f1@0.50"]


def test_monotone_in_threshold():
    r = random.Random(2)
    for _ in range(20):
        gt, pred = random_dataset(r)
        rep = evaluate(gt.items(), pred.items())
        assert rep["f1@0.30"] >= rep["f1@0.50"] >= rep["f1@0.75"]
        assert rep["aF1"] <= rep["f1@0.50"] + 1e-15
        for k, v in rep.items():
            if isinstance(v, float) and not k.startswith("count_mae"):
                assert 0.0 <= v <= 1.0


def test_removing_correct_or_adding_spurious():
    r = random.Random(3)
    for _ in range(20):
        gt, _ = random_dataset(r)
        sid = next((s for s, g in gt.items() if g), None)
        base = evaluate(gt.items(), gt.items())
        fewer = dict(gt)
        fewer[sid] = gt[sid][1:]
        rep = evaluate(gt.items(), fewer.items())
        for tau in ("0.30", "0.50", "0.75"):
            assert rep[f"f1@{tau}"] <= base[f"f1@{tau}"]
        more = dict(gt)
        more[sid] = gt[sid] + [A(990, 990, 1000, 1000, T.EXTRA)]
        rep = evaluate(gt.items(), more.items())
        assert rep["precision@0.50"] <= base["precision@0.50"]


def test_empty_dataset_flag():
    rep = evaluate([], [])
    assert rep["micro_empty"] and rep["f1@0.50"] == 0.0 and rep["negative_accuracy"] is None
    rep = evaluate([("a", [])], [("a", [])])
    assert rep["micro_empty"] and rep["mps_f1@0.50"] == 1.0


def test_input_errors():
    with pytest.raises(DataError):
        evaluate([("a", []), ("a", [])], [])
    with pytest.raises(DataError):
        evaluate([("a", [])], [("b", [])])


def test_counts_merge():
    a = match_eval([A(0, 0, 10, 10)], [A(0, 0, 10, 10)])
    b = match_eval([A(0, 0, 10, 10)], [])
    m = a.merge(b)
    assert tuple(m.at(0.5).sum(axis=0)) == (1, 0, 1)
    assert len(COCO_THRESHOLDS) == 10 and COCO_THRESHOLDS[-1] == pytest.approx(0.95)
    with pytest.raises(ValueError):
        m.merge(EvalCounts.zero((0.5,)))


def test_report_key_order_is_stable():
    gt, pred = random_dataset(random.Random(4))
    assert list(evaluate(gt.items(), pred.items())) == list(evaluate([], []))
