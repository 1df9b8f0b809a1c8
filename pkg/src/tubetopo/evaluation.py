"""Dataset-level detection metrics under strict type-aware matching."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from tubetopo.errors import DataError
from tubetopo.reward.matching import assign
from tubetopo.types import ANOMALY_TYPES, Anomaly

REPORT_THRESHOLDS = (0.3, 0.5, 0.75)
COCO_THRESHOLDS = tuple(0.50 + 0.05 * k for k in range(10))
THRESHOLD_SLACK = 1e-12
PRIMARY = 0.5


def _all_thresholds() -> tuple[float, ...]:
    return tuple(sorted(set(REPORT_THRESHOLDS) | set(COCO_THRESHOLDS)))


@dataclass
class EvalCounts:
    """TP/FP/FN per threshold and type (columns: tp, fp, fn), plus matched IoUs at 0.5."""

    thresholds: tuple[float, ...]
    tally: np.ndarray  # (n_thresholds, n_types, 3) int64
    ious: list[float] = field(default_factory=list)

    @classmethod
    def zero(cls, thresholds: Sequence[float]) -> "EvalCounts":
        return cls(tuple(thresholds), np.zeros((len(thresholds), len(ANOMALY_TYPES), 3), dtype=np.int64))

    def merge(self, other: "EvalCounts") -> "EvalCounts":
        if self.thresholds != other.thresholds:
            raise ValueError("cannot merge counts over different thresholds")
        return EvalCounts(self.thresholds, self.tally + other.tally, self.ious + other.ious)

    def at(self, tau: float) -> np.ndarray:
        return self.tally[self.thresholds.index(tau)]


def match_eval(
    gt: Sequence[Anomaly], pred: Sequence[Anomaly], thresholds: Sequence[float] = _all_thresholds()
) -> EvalCounts:
    """Counts for one sample; the assignment is computed once and thresholded per tau."""
    counts = EvalCounts.zero(thresholds)
    n_gt = np.bincount([a.type.rank for a in gt], minlength=len(ANOMALY_TYPES))
    n_pred = np.bincount([a.type.rank for a in pred], minlength=len(ANOMALY_TYPES))
    pairs = assign(gt, pred)
    for k, tau in enumerate(counts.thresholds):
        kept = [(g, v) for g, _, v in pairs if v >= tau - THRESHOLD_SLACK]
        tp = np.bincount([gt[g].type.rank for g, _ in kept], minlength=len(ANOMALY_TYPES))
        counts.tally[k] = np.stack([tp, n_pred - tp, n_gt - tp], axis=1)
        if tau == PRIMARY:
            counts.ious = [v for _, v in kept]
    return counts


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    tp, fp, fn = int(tp), int(fp), int(fn)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def _tkey(tau: float) -> str:
    return f"{tau:.2f}"


def _index(pairs: Iterable[tuple[str, list[Anomaly]]], what: str) -> dict[str, list[Anomaly]]:
    out: dict[str, list[Anomaly]] = {}
    for sid, anomalies in pairs:
        if sid in out:
            raise DataError(f"duplicate {what} id {sid!r}")
        out[sid] = list(anomalies)
    return out


def evaluate(
    ground_truth: Iterable[tuple[str, Sequence[Anomaly]]],
    predictions: Iterable[tuple[str, Sequence[Anomaly]]],
) -> dict:
    """Metrics report as a flat dict with a fixed key order.

    Samples without a prediction count as empty predictions; predictions
    for unknown ids are rejected.
    """
    gt = _index(ground_truth, "sample")
    pred = _index(predictions, "prediction")
    unknown = sorted(set(pred) - set(gt))
    if unknown:
        raise DataError(f"predictions for unknown sample ids: {unknown[:5]}")
    thresholds = _all_thresholds()
    total = EvalCounts.zero(thresholds)
    exact = abs_err = negatives = neg_ok = 0
    ps_f1 = []
    for sid in sorted(gt):
        g, p = gt[sid], pred.get(sid, [])
        counts = match_eval(g, p, thresholds)
        total = total.merge(counts)
        exact += len(g) == len(p)
        abs_err += abs(len(g) - len(p))
        if not g:
            negatives += 1
            neg_ok += not p
        if not g and not p:
            ps_f1.append(1.0)
        else:
            ps_f1.append(prf(*counts.at(PRIMARY).sum(axis=0))[2])
    n = len(gt)
    report: dict = {"n_samples": n, "n_gt": sum(map(len, gt.values())), "n_pred": sum(len(pred.get(s, [])) for s in gt)}
    micro = {tau: prf(*total.at(tau).sum(axis=0)) for tau in thresholds}
    for tau in REPORT_THRESHOLDS:
        p, r, f = micro[tau]
        report[f"precision@{_tkey(tau)}"] = p
        report[f"recall@{_tkey(tau)}"] = r
        report[f"f1@{_tkey(tau)}"] = f
    report["aF1"] = math.fsum(micro[tau][2] for tau in COCO_THRESHOLDS) / len(COCO_THRESHOLDS)
    at = total.at(PRIMARY)
    present = []
    for t in ANOMALY_TYPES:
        f = prf(*at[t.rank])[2]
        report[f"f1@0.50/{t.value}"] = f
        if at[t.rank, 0] + at[t.rank, 2] > 0:
            present.append(f)
    report["macro_f1@0.50"] = math.fsum(present) / len(present) if present else 0.0
    report["count_accuracy"] = exact / n if n else 0.0
    report["count_mae"] = abs_err / n if n else 0.0
    report["mps_f1@0.50"] = math.fsum(ps_f1) / n if n else 0.0
    report["n_negative"] = negatives
    report["negative_accuracy"] = neg_ok / negatives if negatives else None
    report["n_matched@0.50"] = len(total.ious)
    report["mean_iou@0.50"] = math.fsum(total.ious) / len(total.ious) if total.ious else None
    # micro F1 is 0 by definition when nothing was there to find or predict
    report["micro_empty"] = not int(total.at(PRIMARY).sum())
    return report
