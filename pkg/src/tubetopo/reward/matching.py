"""Type-aware optimal one-to-one matching of predicted and ground-truth boxes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from tubetopo.topology import iou
from tubetopo.types import ANOMALY_TYPES, Anomaly


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (gt index, pred index, IoU)
    false_positives: tuple[int, ...]
    false_negatives: tuple[int, ...]

    @property
    def n_matched(self) -> int:
        return len(self.pairs)

    @property
    def total_iou(self) -> float:
        return sum(p[2] for p in self.pairs)

    def to_dict(self) -> dict:
        return {
            "pairs": [{"gt": g, "pred": p, "iou": v} for g, p, v in self.pairs],
            "false_positives": list(self.false_positives),
            "false_negatives": list(self.false_negatives),
        }


def assign(gt: Sequence[Anomaly], pred: Sequence[Anomaly]) -> list[tuple[int, int, float]]:
    """Per-type assignment maximizing total IoU, before any threshold.

    Predictions of each type are put in canonical box order first, so the
    result does not depend on the order of the prediction list. Pairs are
    returned sorted by ground-truth index.
    """
    out = []
    for kind in ANOMALY_TYPES:
        gi = [i for i, a in enumerate(gt) if a.type is kind]
        pi = sorted((j for j, a in enumerate(pred) if a.type is kind), key=lambda j: (pred[j].box, j))
        if not gi or not pi:
            continue
        m = np.array([[iou(gt[i].box, pred[j].box) for j in pi] for i in gi])
        rows, cols = linear_sum_assignment(m, maximize=True)
        out.extend((gi[r], pi[c], float(m[r, c])) for r, c in zip(rows, cols))
    out.sort()
    return out


def threshold(
    pairs, n_gt: int, n_pred: int, tau: float, slack: float = 0.0
) -> MatchResult:
    """Keep assigned pairs with IoU >= tau - slack; the rest become FP/FN."""
    kept = tuple(p for p in pairs if p[2] >= tau - slack)
    used_g = {g for g, _, _ in kept}
    used_p = {p for _, p, _ in kept}
    return MatchResult(
        pairs=kept,
        false_positives=tuple(j for j in range(n_pred) if j not in used_p),
        false_negatives=tuple(i for i in range(n_gt) if i not in used_g),
    )


def match_typed(gt: Sequence[Anomaly], pred: Sequence[Anomaly], tau: float = 0.1) -> MatchResult:
    """Optimal per-type matching; assigned pairs below ``tau`` are discarded afterwards."""
    return threshold(assign(gt, pred), len(gt), len(pred), tau)
