"""Composite reward: format gate, soft-F1 accuracy terms and the clDice topology term."""

from __future__ import annotations

import bisect
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Protocol, Sequence

import numpy as np

from tubetopo.reward.answer import FormatError, parse_answer
from tubetopo.reward.matching import MatchResult, match_typed
from tubetopo.topology import crop, denormalize_box, resize_nearest, thin
from tubetopo.types import Anomaly


@dataclass(frozen=True)
class PhiMapping:
    """Piecewise power map from IoU to score, pinned to ``rewards[k]`` at ``thresholds[k]``."""

    name: str
    thresholds: tuple[float, ...] = ()
    rewards: tuple[float, ...] = ()
    gamma: float = 1.0

    def __post_init__(self):
        if self.name == "raw":
            return
        t, r = self.thresholds, self.rewards
        if not t or len(t) != len(r):
            raise ValueError("tiered mapping needs matching, non-empty thresholds and rewards")
        if any(b <= a for a, b in zip(t, t[1:])) or not (0 < t[0] and t[-1] <= 1):
            raise ValueError("thresholds must ascend within (0, 1]")
        if any(b < a for a, b in zip(r, r[1:])) or not (0 < r[0] and r[-1] <= 1):
            raise ValueError("rewards must ascend within (0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @classmethod
    def preset(cls, name: str) -> "PhiMapping":
        try:
            return PHI_PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown phi preset {name!r}; choose from {sorted(PHI_PRESETS)}") from None

    def __call__(self, x: float) -> float:
        if self.name == "raw":
            return float(x)
        t, r, g = self.thresholds, self.rewards, self.gamma
        if x <= 0:
            return 0.0
        if x >= t[-1]:
            return r[-1]
        k = bisect.bisect_right(t, x)  # t[k-1] <= x < t[k]
        if k == 0:
            return r[0] * (x / t[0]) ** g
        return r[k - 1] + (r[k] - r[k - 1]) * ((x - t[k - 1]) / (t[k] - t[k - 1])) ** g

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "thresholds": list(self.thresholds),
            "rewards": list(self.rewards),
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d) -> "PhiMapping":
        if isinstance(d, str):
            return cls.preset(d)
        d = dict(d)
        if set(d) == {"name"}:
            return cls.preset(d["name"])
        return cls(
            d["name"], tuple(d.get("thresholds", ())), tuple(d.get("rewards", ())), d.get("gamma", 1.0)
        )


_TIERS = (0.3, 0.5, 0.7, 0.9)
_CEILINGS = (0.25, 0.55, 0.80, 1.0)
PHI_PRESETS = {
    "tiered": PhiMapping("tiered", _TIERS, _CEILINGS, 1.5),
    "linear": PhiMapping("linear", _TIERS, _CEILINGS, 1.0),
    "coco": PhiMapping("coco", (0.5, 0.75, 0.9), (0.55, 0.80, 1.0), 1.5),
    "raw": PhiMapping("raw"),
}


def phi(x: float, mapping: PhiMapping = PHI_PRESETS["tiered"]) -> float:
    return mapping(x)


@dataclass(frozen=True)
class RewardConfig:
    w_fmt: float = 0.10
    w_acc: float = 0.85
    w_topo: float = 0.05
    tau_m: float = 0.10
    tau_size: float = 0.30
    loc_lambda: float = 0.80
    phi: PhiMapping = field(default_factory=lambda: PHI_PRESETS["tiered"])
    # divide R_acc by 3 so it lies in [0, 1]
    normalize_acc: bool = False

    def __post_init__(self):
        if abs(self.w_fmt + self.w_acc + self.w_topo - 1.0) > 1e-9:
            raise ValueError("reward weights must sum to 1")
        if min(self.w_fmt, self.w_acc, self.w_topo) < 0:
            raise ValueError("reward weights must be non-negative")
        if not 0 < self.tau_m < 1:
            raise ValueError("tau_m must lie in (0, 1)")
        if not 0 < self.tau_size < 1:
            raise ValueError("tau_size must lie in (0, 1)")
        if not 0 <= self.loc_lambda <= 1:
            raise ValueError("loc_lambda must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phi"] = self.phi.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown reward options: {sorted(unknown)}")
        if "phi" in d:
            d["phi"] = PhiMapping.from_dict(d["phi"])
        return cls(**d)


@dataclass(frozen=True)
class AccuracyTerms:
    r_det: float
    r_loc: float
    r_type: float
    r_acc: float
    match: MatchResult
    negative: bool  # both sides empty


def accuracy_reward(
    gt: Sequence[Anomaly], pred: Sequence[Anomaly], config: RewardConfig = RewardConfig()
) -> AccuracyTerms:
    if not gt or not pred:
        match = MatchResult((), tuple(range(len(pred))), tuple(range(len(gt))))
        both = not gt and not pred
        return AccuracyTerms(0.0, 0.0, 0.0, 1.0 if both else 0.0, match, both)
    match = match_typed(gt, pred, config.tau_m)
    scores = [config.phi(v) for _, _, v in match.pairs]
    soft_tp = sum(scores)
    denom = 2 * soft_tp + len(match.false_positives) + len(match.false_negatives)
    r_det = 2 * soft_tp / denom if denom else 0.0
    r_loc = soft_tp / len(scores) if scores else 0.0
    r_type = len(match.pairs) / max(len(gt), len(pred))
    r_acc = r_det + r_loc + r_type
    if config.normalize_acc:
        r_acc /= 3
    return AccuracyTerms(r_det, r_loc, r_type, r_acc, match, False)


def cl_dice(gt: np.ndarray, corr: np.ndarray) -> float:
    """Harmonic mean of topology precision and sensitivity of two aligned masks."""
    gt = np.asarray(gt, dtype=bool)
    corr = np.asarray(corr, dtype=bool)
    if gt.shape != corr.shape:
        raise ValueError(f"shape mismatch {gt.shape} vs {corr.shape}")
    if not gt.any() and not corr.any():
        return 1.0
    s_gt, s_corr = thin(gt), thin(corr)
    n_gt, n_corr = np.count_nonzero(s_gt), np.count_nonzero(s_corr)
    if not n_gt or not n_corr:
        return 0.0
    t_prec = np.count_nonzero(s_corr & gt) / n_corr
    t_sens = np.count_nonzero(s_gt & corr) / n_gt
    if t_prec + t_sens == 0:
        return 0.0
    return 2 * t_prec * t_sens / (t_prec + t_sens)


def _exact(x) -> Fraction:
    # decimal reading of floats, so 0.3 means 3/10
    return x if isinstance(x, Fraction) else Fraction(repr(x)) if isinstance(x, float) else Fraction(x)


def size_penalty(ratio, config: RewardConfig = RewardConfig()) -> float:
    """LocPen for a box covering ``ratio`` of the image, in exact rational arithmetic."""
    rho, tau, lam = _exact(ratio), _exact(config.tau_size), _exact(config.loc_lambda)
    if rho <= tau:
        return 1.0
    return float(max(Fraction(0), 1 - lam * (rho - tau) / (1 - tau)))


def loc_pen(box, config: RewardConfig = RewardConfig()) -> float:
    x1, y1, x2, y2 = box
    return size_penalty(Fraction((x2 - x1) * (y2 - y1), 1000 * 1000), config)


class MaskPair(Protocol):
    clean: np.ndarray
    corrupted: np.ndarray


def pair_topo_reward(clean: np.ndarray, corrupted: np.ndarray, gt_box, pred_box, config) -> float:
    h, w = clean.shape
    gx1, gy1, gx2, gy2 = denormalize_box(gt_box, w, h)
    ch, cw = corrupted.shape
    px1, py1, px2, py2 = denormalize_box(pred_box, cw, ch)
    if gx2 <= gx1 or gy2 <= gy1 or px2 <= px1 or py2 <= py1:
        return 0.0
    corr = crop(corrupted, (px1, py1, px2, py2))
    ref = resize_nearest(crop(clean, (gx1, gy1, gx2, gy2)), *corr.shape)
    return (1.0 - cl_dice(ref, corr)) * loc_pen(pred_box, config)


def topo_reward(
    match: MatchResult,
    record: MaskPair,
    gt: Sequence[Anomaly],
    pred: Sequence[Anomaly],
    config: RewardConfig = RewardConfig(),
) -> float:
    """Mean over matched pairs of (1 - clDice of the two crops) times LocPen; 0 if none."""
    if not match.pairs:
        return 0.0
    total = sum(
        pair_topo_reward(record.clean, record.corrupted, gt[g].box, pred[p].box, config)
        for g, p, _ in match.pairs
    )
    return total / len(match.pairs)


@dataclass(frozen=True)
class RewardBreakdown:
    r_fmt: int
    r_det: float
    r_loc: float
    r_type: float
    r_acc: float
    r_topo: float
    r_total: float
    match: MatchResult
    negative: bool
    n_gt: int
    n_pred: int
    parse_error: str | None = None

    def to_dict(self) -> dict:
        return {
            "r_fmt": self.r_fmt,
            "r_det": self.r_det,
            "r_loc": self.r_loc,
            "r_type": self.r_type,
            "r_acc": self.r_acc,
            "r_topo": self.r_topo,
            "r_total": self.r_total,
            "negative": self.negative,
            "n_gt": self.n_gt,
            "n_pred": self.n_pred,
            "parse_error": self.parse_error,
            "match": self.match.to_dict(),
        }


class ScoredRecord(MaskPair, Protocol):
    annotations: Sequence[Anomaly]


def score_prediction(
    record: ScoredRecord,
    pred: Sequence[Anomaly],
    config: RewardConfig = RewardConfig(),
    *,
    r_fmt: int = 1,
    parse_error: str | None = None,
) -> RewardBreakdown:
    gt = list(record.annotations)
    acc = accuracy_reward(gt, pred, config)
    r_topo = topo_reward(acc.match, record, gt, pred, config)
    total = config.w_fmt * r_fmt + config.w_acc * acc.r_acc + config.w_topo * r_topo
    return RewardBreakdown(
        r_fmt=r_fmt,
        r_det=acc.r_det,
        r_loc=acc.r_loc,
        r_type=acc.r_type,
        r_acc=acc.r_acc,
        r_topo=r_topo,
        r_total=total,
        match=acc.match,
        negative=acc.negative,
        n_gt=len(gt),
        n_pred=len(pred),
        parse_error=parse_error,
    )


def total_reward(record: ScoredRecord, text: str, config: RewardConfig = RewardConfig()) -> RewardBreakdown:
    """Score one response against a record.

    A response that fails to parse gets R_fmt = 0 and is scored as an empty
    prediction for the remaining terms.
    """
    try:
        pred = parse_answer(text)
    except FormatError as exc:
        return score_prediction(record, [], config, r_fmt=0, parse_error=str(exc))
    return score_prediction(record, pred, config)
