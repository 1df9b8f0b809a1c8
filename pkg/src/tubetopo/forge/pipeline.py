from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from tubetopo.forge.config import ForgeConfig
from tubetopo.forge.injectors import MaskState, SiteNotFound, inject
from tubetopo.forge.planning import InjectionPlan
from tubetopo.topology import BettiPair, Box, bounding_box, normalize_box
from tubetopo.types import Anomaly, AnomalyType, canonical_order


class Patch(NamedTuple):
    mask: np.ndarray
    image: np.ndarray | None
    origin: tuple[int, int]  # (row, col) of the top-left corner


@dataclass(frozen=True)
class InjectionStep:
    kind: AnomalyType
    diff: np.ndarray
    pixel_box: Box
    anomaly: Anomaly


@dataclass
class SampleRecord:
    id: str
    source: str
    clean: np.ndarray
    corrupted: np.ndarray
    annotations: list[Anomaly]
    betti_before: BettiPair
    betti_after: BettiPair
    seed: int = 0
    image: np.ndarray | None = None
    plan: InjectionPlan | None = None
    # application order; kept in memory for replay, never serialized
    steps: list[InjectionStep] = field(default_factory=list, repr=False)

    @property
    def height(self) -> int:
        return self.clean.shape[0]

    @property
    def width(self) -> int:
        return self.clean.shape[1]


def sample_patch(
    mask: np.ndarray,
    rng: np.random.Generator,
    config: ForgeConfig = ForgeConfig(),
    image: np.ndarray | None = None,
) -> Patch | None:
    """Random square patch whose foreground fraction meets the configured minimum.

    Returns None after ``config.patch_attempts`` rejected draws.
    """
    size = config.patch_size
    h, w = mask.shape
    if h < size or w < size:
        raise ValueError(f"source {w}x{h} smaller than patch size {size}")
    need = config.min_foreground * size * size
    for _ in range(config.patch_attempts):
        r = int(rng.integers(0, h - size + 1))
        c = int(rng.integers(0, w - size + 1))
        sub = mask[r : r + size, c : c + size]
        if np.count_nonzero(sub) >= need:
            img = None if image is None else image[r : r + size, c : c + size].copy()
            return Patch(np.array(sub, dtype=bool), img, (r, c))
    return None


def signature_holds(kind: AnomalyType, d_b0: int, d_b1: int, d_ends: int) -> bool:
    """Whether Betti and endpoint deltas are consistent with ``kind``.

    Branch edits leave Betti numbers alone, so they are told apart by the
    change in skeleton endpoint count.
    """
    if kind is AnomalyType.BROKEN:
        return d_b0 >= 1 or d_b1 <= -1
    if kind is AnomalyType.SPURIOUS:
        return d_b0 <= -1 or d_b1 >= 1
    if kind is AnomalyType.MISSING:
        return d_b0 == 0 and d_b1 == 0 and d_ends < 0
    if kind is AnomalyType.EXTRA:
        return d_b0 == 0 and d_b1 == 0 and d_ends > 0
    raise ValueError(kind)


def _verify_states(before: MaskState, after: MaskState, kind: AnomalyType) -> bool:
    d_b0 = after.betti.b0 - before.betti.b0
    d_b1 = after.betti.b1 - before.betti.b1
    d_ends = 0
    if kind in (AnomalyType.MISSING, AnomalyType.EXTRA) and d_b0 == 0 and d_b1 == 0:
        d_ends = after.n_endpoints - before.n_endpoints
    return signature_holds(kind, d_b0, d_b1, d_ends)


def verify(before: np.ndarray, after: np.ndarray, kind: AnomalyType) -> bool:
    if before.shape != after.shape:
        raise ValueError("masks differ in shape")
    if np.array_equal(before, after):
        return False
    return _verify_states(MaskState(before), MaskState(after), AnomalyType(kind))


def padded_box(diff: np.ndarray, padding: int) -> Box:
    tight = bounding_box(diff)
    if tight is None:
        raise ValueError("empty difference mask")
    h, w = diff.shape
    x1, y1, x2, y2 = tight
    return max(x1 - padding, 0), max(y1 - padding, 0), min(x2 + padding, w), min(y2 + padding, h)


def derive_box(diff: np.ndarray, config: ForgeConfig = ForgeConfig()) -> Box | None:
    """Padded bounding box of ``diff`` in [0, 1000] coordinates, or None if filtered out."""
    h, w = diff.shape
    box = normalize_box(padded_box(diff, config.box_padding), w, h)
    lo, hi = config.box_size
    if not (lo <= box[2] - box[0] <= hi and lo <= box[3] - box[1] <= hi):
        return None
    return box


def _hits(diff: np.ndarray, boxes: list[Box]) -> bool:
    return any(diff[y1:y2, x1:x2].any() for x1, y1, x2, y2 in boxes)


def corrupt(
    clean: np.ndarray,
    plan: InjectionPlan,
    rng: np.random.Generator,
    config: ForgeConfig = ForgeConfig(),
    *,
    sample_id: str = "",
    source: str = "",
    seed: int = 0,
    image: np.ndarray | None = None,
) -> SampleRecord:
    """Apply a plan's injections one after another on the evolving mask.

    Every injection gets up to ``config.max_retries`` attempts, each at a
    fresh random site; an attempt succeeds only if verification passes,
    the box survives the size filter and the edit stays clear of earlier
    padded boxes. Injections that never succeed are dropped.
    """
    clean = np.asarray(clean, dtype=bool)
    h, w = clean.shape
    state = initial = MaskState(clean)
    steps: list[InjectionStep] = []
    taken: list[Box] = []
    for kind in plan.types:
        for _ in range(config.max_retries):
            try:
                inj = inject(state, kind, rng, config)
            except SiteNotFound:
                continue
            if _hits(inj.diff, taken):
                continue
            after = MaskState(inj.corrupted)
            if not _verify_states(state, after, kind):
                continue
            box = derive_box(inj.diff, config)
            if box is None:
                continue
            pix = padded_box(inj.diff, config.box_padding)
            steps.append(InjectionStep(kind, inj.diff, pix, Anomaly(box, kind)))
            taken.append(pix)
            blocked = state.blocked.copy()
            blocked[pix[1] : pix[3], pix[0] : pix[2]] = True
            after.blocked = blocked
            state = after
            break
    return SampleRecord(
        id=sample_id,
        source=source,
        clean=clean,
        corrupted=state.mask,
        annotations=canonical_order(s.anomaly for s in steps),
        betti_before=initial.betti,
        betti_after=state.betti,
        seed=seed,
        image=image,
        plan=plan,
        steps=steps,
    )
