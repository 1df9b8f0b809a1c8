"""Acceptance suite: one test per criterion, each reporting PASS/FAIL with its wall time.

The 10k-sample generation is shared by criteria 3, 12 and 13 and is timed once.
"""

import functools
import json
import math
import random
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient

from tubetopo.datakit import (
    PredictionLine,
    RecordStore,
    mask_from_png,
    mask_to_png,
    read_mask,
    read_records,
    write_jsonl,
    write_mask,
)
from tubetopo.evaluation import evaluate
from tubetopo.forge import ForgeConfig, SyntheticSource, generate, plan_dataset, plan_window
from tubetopo.forge.dataset import build_sample, plan_seed
from tubetopo.forge.raster import stroke
from tubetopo.reward import (
    PHI_PRESETS,
    GrpoConfig,
    RewardConfig,
    accuracy_reward,
    assign,
    cl_dice,
    clipped_surrogate,
    grpo_advantages,
    match_typed,
    render_answer,
    score_prediction,
    size_penalty,
    total_reward,
)
from tubetopo.runs import score_lines
from tubetopo.service import create_app
from tubetopo.topology import betti, thin
from tubetopo.types import ANOMALY_TYPES, Anomaly, AnomalyType as T

from conftest import ACCEPTANCE_LINES, random_mask
from oracles import betti_oracle, cldice_counts, naive_evaluate, replay_signature, typed_optimum
from test_evaluation import random_dataset
from test_reward import random_instance

BIG_COUNT = 10_000


def criterion(number: int, title: str, budget: float | None = None):
    """Time the wrapped test and log one PASS/FAIL line; an exceeded budget is a failure."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            note, ok = "", False
            try:
                note = fn(*args, **kwargs) or ""
                ok = True
            except AssertionError as exc:
                note = str(exc).splitlines()[0] if str(exc) else "assertion failed"
                raise
            finally:
                dt = time.perf_counter() - t0
                over = budget is not None and dt > budget
                status = "PASS" if ok and not over else "FAIL"
                limit = f" (limit {budget:.0f} s)" if budget is not None else ""
                line = f"criterion {number}: {status} {title} [{dt:.2f} s{limit}]"
                if over:
                    note = f"over time budget; {note}"
                ACCEPTANCE_LINES.append(line + (f" {note}" if note else ""))
                print(ACCEPTANCE_LINES[-1])
            assert not over, f"took {dt:.1f} s, budget {budget} s"

        return run

    return wrap


@pytest.fixture(scope="module")
def big_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("big") / "big.jsonl"
    t0 = time.perf_counter()
    meta = generate(SyntheticSource(), out, BIG_COUNT, seed=2024)
    return {"path": out, "meta": meta, "seconds": time.perf_counter() - t0}


def _fixtures():
    bar = np.zeros((16, 32), bool)
    bar[6:10, 4:28] = True
    ring = np.zeros((32, 32), bool)
    ring[6:26, 6:26] = True
    ring[11:21, 11:21] = False
    blobs = np.zeros((32, 32), bool)
    blobs[4:10, 4:10] = True
    blobs[20:28, 18:30] = True
    return [(bar, (1, 0)), (ring, (1, 1)), (blobs, (2, 0))]


@criterion(1, "betti matches flood-fill/Euler oracle", budget=10)
def test_c01_betti_oracle():
    for m, expected in _fixtures():
        assert betti(m) == expected == betti_oracle(m)
    rng = np.random.default_rng(1)
    for _ in range(500):
        m = random_mask(rng)
        assert betti(m) == betti_oracle(m)
    return "500 random masks + 3 fixtures"


@criterion(2, "injection soundness on replay", budget=300)
def test_c02_injection_soundness():
    src, cfg, seed, n = SyntheticSource(), ForgeConfig(), 11, 2000
    emitted = Counter()
    n_ann = 0
    for start in range(0, n, cfg.balance_window):
        idx = range(start, min(start + cfg.balance_window, n))
        plans = plan_window([np.random.default_rng(plan_seed(seed, i)) for i in idx],
                            [emitted[t.value] for t in ANOMALY_TYPES], cfg)
        for plan, i in zip(plans, idx):
            rec = build_sample(src, plan, seed, i, cfg)
            mask = rec.clean
            for step in rec.steps:
                after = mask ^ step.diff
                assert replay_signature(mask, after, step.kind.value), f"{rec.id} {step.kind.value}"
                x1, y1, x2, y2 = step.anomaly.box
                assert 10 <= x2 - x1 <= 900 and 10 <= y2 - y1 <= 900, f"{rec.id} box {step.anomaly.box}"
                mask = after
            assert np.array_equal(mask, rec.corrupted)
            assert len(rec.steps) == len(rec.annotations)
            emitted.update(a.type.value for a in rec.annotations)
            n_ann += len(rec.annotations)
    return f"{n} samples, {n_ann} annotations verified"


@criterion(3, "curriculum bins and emission balance", budget=60)
def test_c03_curriculum(big_run):
    plans = plan_dataset(np.random.default_rng(3), 100_000)
    freq = np.bincount([p.bin for p in plans], minlength=4) / len(plans)
    dev = np.abs(freq - [0.2, 0.2, 0.4, 0.2]).max()
    assert dev <= 0.01, f"bin frequencies {freq.round(4).tolist()}"
    emitted = np.array(list(big_run["meta"]["tallies"]["emitted"].values()), float)
    rel = emitted.max() / emitted.min() - 1
    assert rel <= 0.05, f"emitted {emitted.tolist()} spread {rel:.3f}"
    return f"max bin dev {dev:.4f}; emitted {emitted.astype(int).tolist()} spread {rel:.3f}"


@criterion(4, "matching optimality and order invariance", budget=60)
def test_c04_matching():
    r = random.Random(4)
    for _ in range(1000):
        gt, pred = random_instance(r)
        total = math.fsum(v for _, _, v in assign(gt, pred))
        assert abs(total - typed_optimum(gt, pred)) <= 1e-9
        base = match_typed(gt, pred)
        perm = list(range(len(pred)))
        r.shuffle(perm)
        m = match_typed(gt, [pred[i] for i in perm])
        assert tuple((g, perm[p], v) for g, p, v in m.pairs) == base.pairs
        assert sorted(perm[p] for p in m.false_positives) == list(base.false_positives)
        assert m.false_negatives == base.false_negatives
    return "1000 instances"


@criterion(5, "phi anchors and shape for all presets", budget=10)
def test_c05_phi():
    tiered = PHI_PRESETS["tiered"]
    assert [tiered(x) for x in (0.3, 0.5, 0.7, 0.9)] == [0.25, 0.55, 0.80, 1.0]
    xs = np.linspace(0.0, 1.0, 100_001)
    for name, m in PHI_PRESETS.items():
        assert all(m(t) == v for t, v in zip(m.thresholds, m.rewards)), name
        ys = np.array([m(x) for x in xs])
        steps = np.diff(ys)
        assert steps.min() >= 0, f"{name} not monotone"
        assert steps.max() < 1e-2, f"{name} jumps by {steps.max()}"
    return f"presets {sorted(PHI_PRESETS)}"


def _bar_record(annotations):
    clean = np.zeros((256, 256), bool)
    clean[120:124, 16:240] = True
    corr = clean.copy()
    if annotations:
        corr[120:124, 120:128] = False
    return _Rec(clean, corr, annotations)


class _Rec:
    def __init__(self, clean, corrupted, annotations):
        self.clean, self.corrupted, self.annotations = clean, corrupted, annotations


@criterion(6, "reward corner cases")
def test_c06_reward_corners():
    box = Anomaly((440, 450, 520, 510), T.BROKEN)
    far = Anomaly((10, 10, 60, 60), T.BROKEN)
    assert accuracy_reward([], []).r_acc == 1.0
    assert accuracy_reward([box], []).r_acc == 0.0
    assert accuracy_reward([], [box]).r_acc == 0.0
    b = score_prediction(_bar_record([box]), [far])
    assert b.match.pairs == ()
    assert b.r_loc == 0.0 and b.r_topo == 0.0
    for text in ("", "no anomalies", "<answer>[{]</answer>", '<answer>[{"Position": [1, 2]}]</answer>'):
        assert total_reward(_bar_record([box]), text).r_total == 0.0
    return "exact"


@criterion(7, "clDice limits and severed-bar oracle")
def test_c07_cldice():
    m = np.zeros((32, 32), bool)
    m[8, 4:28] = True
    m[20, 4:28] = True
    assert cl_dice(m, m) == 1.0
    other = np.zeros_like(m)
    other[14, 2:30] = True
    assert cl_dice(m, other) == 0.0
    cut = m.copy()
    cut[20, 12:18] = False
    got = cl_dice(m, cut)
    assert abs(got - cldice_counts(m, cut, m, cut)) <= 1e-12
    thick = np.zeros((32, 32), bool)
    thick |= stroke(thick.shape, np.linspace([16.0, 3.0], [16.0, 28.0], 30), 2.5)
    cut = thick.copy()
    cut[:, 14:18] = False
    assert abs(cl_dice(thick, cut) - cldice_counts(thick, cut, thin(thick), thin(cut))) <= 1e-12
    return f"severed bar clDice {got:.12f}"


@criterion(8, "LocPen anchors")
def test_c08_locpen():
    cfg = RewardConfig()
    assert (cfg.tau_size, cfg.loc_lambda) == (0.30, 0.80)
    assert size_penalty(0.3, cfg) == 1.0
    assert size_penalty(1.0, cfg) == 0.2
    assert size_penalty(0.65, cfg) == 0.6
    return "exact"


@criterion(9, "GRPO advantage and surrogate math")
def test_c09_grpo():
    assert np.array_equal(grpo_advantages([0.7] * 8), np.zeros(8))
    r = np.random.default_rng(9)
    for _ in range(500):
        rewards = r.uniform(-3, 3, int(r.integers(2, 17)))
        a = grpo_advantages(rewards, 0.0)
        assert abs(a.mean()) <= 1e-12
        assert np.allclose(grpo_advantages(rewards + r.uniform(-5, 5), 0.0), a, rtol=0, atol=1e-9)
        assert np.allclose(grpo_advantages(rewards * r.uniform(0.1, 10), 0.0), a, rtol=0, atol=1e-9)
        ratios = r.uniform(0.8, 1.2, rewards.size)
        assert np.array_equal(clipped_surrogate(ratios, a, 0.2), ratios * a)
    return "500 random groups"


@criterion(10, "evaluation matches naive re-implementation", budget=120)
def test_c10_evaluation():
    r = random.Random(10)
    for _ in range(200):
        gt, pred = random_dataset(r)
        assert evaluate(gt.items(), pred.items()) == naive_evaluate(gt, pred)
    rep = evaluate(gt.items(), gt.items())
    assert all(rep[f"f1@{t}"] == 1.0 for t in ("0.30", "0.50", "0.75"))
    assert rep["aF1"] == 1.0 and rep["count_mae"] == 0.0
    a = Anomaly((0, 0, 100, 100), T.BROKEN)
    b = Anomaly((0, 0, 100, 60), T.BROKEN)
    af1 = evaluate([("x", [a])], [("x", [b])])["aF1"]
    assert abs(af1 - 0.3) <= 1e-15
    return f"200 sets; IoU-0.6 aF1 {af1!r}"


@criterion(11, "default config values")
def test_c11_defaults():
    assert RewardConfig().to_dict() == {
        "w_fmt": 0.10,
        "w_acc": 0.85,
        "w_topo": 0.05,
        "tau_m": 0.10,
        "tau_size": 0.30,
        "loc_lambda": 0.80,
        "phi": {"name": "tiered", "thresholds": [0.3, 0.5, 0.7, 0.9], "rewards": [0.25, 0.55, 0.80, 1.0], "gamma": 1.5},
        "normalize_acc": False,
    }
    assert GrpoConfig().kl_beta == 0.05
    return "exact"


def _tree_bytes(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def _sorted_jsonl(path):
    return sorted(path.read_text().splitlines(), key=lambda s: json.loads(s)["id"])


def _responses(store, ids, seed):
    """Perfect, shifted, empty and garbage answers in a fixed mix."""
    r = random.Random(seed)
    out = []
    for sid in ids:
        ann = store.line(sid).annotations
        roll = r.random()
        if roll < 0.4:
            text = render_answer(ann)
        elif roll < 0.8:
            text = render_answer([
                Anomaly((a.box[0], a.box[1], min(1000, a.box[2] + r.randrange(0, 40)), a.box[3]),
                        r.choice(ANOMALY_TYPES) if r.random() < 0.2 else a.type)
                for a in ann
            ])
        elif roll < 0.9:
            text = "<answer>[]</answer>"
        else:
            text = "I could not find anything."
        out.append(PredictionLine.from_json({"id": sid, "response": text}))
    return out


@criterion(12, "determinism, IO round trips, concurrent HTTP", budget=300)
def test_c12_determinism(tmp_path, big_run):
    runs = {}
    for name, workers in (("w1a", 1), ("w1b", 1), ("w2", 2)):
        generate(SyntheticSource(), tmp_path / name / "d.jsonl", 150, seed=12, workers=workers)
        runs[name] = tmp_path / name
    ref = _tree_bytes(runs["w1a"])
    assert _sorted_jsonl(runs["w1a"] / "d.jsonl") == _sorted_jsonl(runs["w2"] / "d.jsonl")
    assert _tree_bytes(runs["w1b"]) == ref and _tree_bytes(runs["w2"]) == ref

    rng = np.random.default_rng(12)
    for i in range(200):
        m = random_mask(rng, int(rng.integers(1, 80)), int(rng.integers(1, 80)))
        assert np.array_equal(mask_from_png(mask_to_png(m)), m)
        if i < 20:
            write_mask(m, tmp_path / "m.png")
            assert np.array_equal(read_mask(tmp_path / "m.png"), m)
    write_jsonl(read_records(big_run["path"]), tmp_path / "copy.jsonl")
    assert (tmp_path / "copy.jsonl").read_bytes() == big_run["path"].read_bytes()

    store = RecordStore.open(big_run["path"])
    preds = _responses(store, store.ids()[:64], 12)
    expected = [json.dumps(d, separators=(",", ":")).encode() for d in score_lines_plain(store, preds)]
    with TestClient(create_app(str(big_run["path"]))) as client:
        def call(p):
            return client.post("/v1/reward", json={"id": p.id, "response": p.response}).content

        with ThreadPoolExecutor(max_workers=64) as pool:
            got = list(pool.map(call, preds))
    assert got == expected
    return "3 generate runs identical; 64 concurrent requests bit-exact"


def score_lines_plain(store, preds):
    for row in score_lines(store, preds):
        row.pop("id")
        yield row


@criterion(13, "throughput: 10k generate under 600 s, 10k scores under 60 s")
def test_c13_throughput(big_run):
    assert big_run["seconds"] < 600, f"generate took {big_run['seconds']:.1f} s"
    store = RecordStore.open(big_run["path"], cache_size=64)
    preds = _responses(store, store.ids(), 13)
    t0 = time.perf_counter()
    n = sum(1 for _ in score_lines(store, preds))
    dt = time.perf_counter() - t0
    assert n == BIG_COUNT
    assert dt < 60, f"scoring took {dt:.1f} s"
    return f"generate {big_run['seconds']:.1f} s; score {dt:.1f} s"
