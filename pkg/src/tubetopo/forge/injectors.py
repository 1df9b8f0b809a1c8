"""Skeleton-guided injection of the four anomaly types.

Each injector picks a random site on the skeleton of the current mask and
returns the edited mask. Injectors do not verify their own result.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from tubetopo.forge.config import ForgeConfig
from tubetopo.forge.raster import quad_bezier, stroke, within_distance
from tubetopo.topology import BettiPair, betti, local_radius, skeletonize
from tubetopo.types import AnomalyType


class SiteNotFound(RuntimeError):
    """No viable injection site exists on this mask."""


@dataclass(frozen=True)
class Injection:
    corrupted: np.ndarray
    diff: np.ndarray


class MaskState:
    """Lazily computed structure of one mask, shared across retries.

    ``blocked`` marks pixels (earlier padded boxes) that new sites must avoid.
    """

    def __init__(self, mask: np.ndarray, blocked: np.ndarray | None = None):
        self.mask = np.asarray(mask, dtype=bool)
        self.blocked = np.zeros(self.mask.shape, dtype=bool) if blocked is None else blocked

    def free(self, pixels) -> bool:
        pix = np.asarray(pixels).reshape(-1, 2)
        return not self.blocked[pix[:, 0], pix[:, 1]].any()

    @cached_property
    def skeleton(self):
        return skeletonize(self.mask)

    @cached_property
    def betti(self) -> BettiPair:
        return betti(self.mask)

    @cached_property
    def n_endpoints(self) -> int:
        return len(self.skeleton.endpoints)

    @cached_property
    def radius(self) -> np.ndarray:
        return local_radius(self.mask)

    @cached_property
    def skel_pixels(self) -> np.ndarray:
        return np.argwhere(self.skeleton.mask & ~self.blocked)

    @cached_property
    def components(self) -> np.ndarray:
        # labels are only compared, so scan order does not matter
        return ndimage.label(self.mask, structure=np.ones((3, 3), dtype=bool))[0]

    @cached_property
    def interior(self) -> list[tuple[int, int]]:
        """(branch index, position) for every unblocked non-node branch pixel."""
        out = []
        blocked = self.blocked
        for i, path in enumerate(self.skeleton.branches):
            for j in range(1, len(path) - 1):
                if not blocked[path[j]]:
                    out.append((i, j))
        return out

    @cached_property
    def nearest_skeleton(self) -> tuple[np.ndarray, np.ndarray]:
        _, idx = ndimage.distance_transform_edt(~self.skeleton.mask, return_indices=True)
        return idx[0], idx[1]


def _interior_path(path):
    closed = len(path) > 2 and path[0] == path[-1]
    return path[:-1] if closed else path[1:-1]


def _reconstruct(shape, sources: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """Union of discs of radius ``r - 0.5`` around each source pixel."""
    out = np.zeros(shape, dtype=bool)
    for r in np.unique(radius):
        out |= within_distance(shape, sources[radius == r], max(0.5, r - 0.5))
    return out


def inject_broken(state: MaskState, rng, cfg: ForgeConfig) -> np.ndarray:
    if not state.interior:
        raise SiteNotFound("skeleton has no branch interior")
    b, _ = state.interior[int(rng.integers(len(state.interior)))]
    inner = _interior_path(state.skeleton.branches[b])
    length = int(rng.integers(cfg.gap_length[0], cfg.gap_length[1] + 1))
    length = min(length, len(inner))
    start = int(rng.integers(0, len(inner) - length + 1))
    sub = np.array(inner[start : start + length])
    r = int(state.radius[sub[:, 0], sub[:, 1]].max())
    erase = within_distance(state.mask.shape, sub, r + cfg.gap_margin)
    return state.mask & ~erase


def inject_spurious(state: MaskState, rng, cfg: ForgeConfig) -> np.ndarray:
    pix = state.skel_pixels
    if len(pix) < 2:
        raise SiteNotFound("too few skeleton pixels for a bridge")
    a = pix[int(rng.integers(len(pix)))]
    dist = np.hypot(*(pix - a).T)
    ok = (dist >= cfg.bridge_distance[0]) & (dist <= cfg.bridge_distance[1])
    if not ok.any():
        raise SiteNotFound("no bridge partner in range")
    comp = state.components[pix[:, 0], pix[:, 1]]
    other = ok & (comp != state.components[a[0], a[1]])
    pool = np.flatnonzero(other if other.any() else ok)
    b = pix[pool[int(rng.integers(len(pool)))]]
    d = (b - a).astype(float)
    normal = np.array([-d[1], d[0]])
    offset = rng.uniform(*cfg.bridge_curvature) * (1 if rng.random() < 0.5 else -1)
    ctrl = (a + b) / 2 + normal * offset
    r = (state.radius[a[0], a[1]] + state.radius[b[0], b[1]]) / 2
    bridge = stroke(state.mask.shape, quad_bezier(a, ctrl, b), max(0.5, r - 0.5))
    return state.mask | bridge


def _terminal_walks(state: MaskState, cfg: ForgeConfig):
    """Candidate (walk, junction) pairs; junction is None when the walk stops short."""
    skel = state.skeleton
    junctions = set(skel.junctions)
    endpoints = set(skel.endpoints)
    terminal, other = [], []
    for path in skel.branches:
        for seq in (path, path[::-1]):
            if seq[0] not in endpoints or seq[0] == seq[-1]:
                continue
            reaches = seq[-1] in junctions and len(seq) - 1 <= cfg.missing_walk
            walk = seq[:-1] if reaches else seq[: cfg.missing_walk]
            if not state.free(walk):
                continue
            if reaches:
                if len(walk) <= state.radius[seq[-1]] + 2:
                    continue  # thinning spur inside a thick junction, not a real branch
                terminal.append((walk, seq[-1]))
            else:
                other.append((walk, None))
    return terminal or other


def inject_missing(state: MaskState, rng, cfg: ForgeConfig) -> np.ndarray:
    if not state.skeleton.endpoints:
        raise SiteNotFound("skeleton has no endpoint")
    pool = _terminal_walks(state, cfg)
    if not pool:
        raise SiteNotFound("no walkable endpoint")
    walk, junction = pool[int(rng.integers(len(pool)))]
    walk = np.array(walk)
    on_walk = np.zeros(state.mask.shape, dtype=bool)
    on_walk[walk[:, 0], walk[:, 1]] = True
    nr, nc = state.nearest_skeleton
    erase = on_walk[nr, nc]
    if junction is not None:
        # Rebuild the junction area from the remaining centreline so no stub is
        # left; the junction blob itself is capped at its neighbours' radius.
        rj = int(state.radius[junction])
        near = within_distance(state.mask.shape, [junction], 2 * rj + 2)
        span = 2 * rj + 2 + int(state.radius.max()) + 1
        jr, jc = junction
        window = np.zeros(state.mask.shape, dtype=bool)
        window[max(jr - span, 0) : jr + span + 1, max(jc - span, 0) : jc + span + 1] = True
        src = np.argwhere(state.skeleton.mask & ~on_walk & window)
        if len(src):
            rad = state.radius[src[:, 0], src[:, 1]]
            cheb = np.abs(src - np.asarray(junction)).max(axis=1)
            ring = (cheb > rj) & (cheb <= 2 * rj + 2)
            if ring.any():
                rad = np.where(cheb <= rj, np.minimum(rad, rad[ring].max()), rad)
            erase |= near & ~_reconstruct(state.mask.shape, src, rad)
    return state.mask & ~erase


def inject_extra(state: MaskState, rng, cfg: ForgeConfig) -> np.ndarray:
    if not state.interior:
        raise SiteNotFound("skeleton has no branch interior")
    b, j = state.interior[int(rng.integers(len(state.interior)))]
    path = state.skeleton.branches[b]
    lo, hi = max(0, j - 3), min(len(path) - 1, j + 3)
    tangent = np.subtract(path[hi], path[lo]).astype(float)
    if not tangent.any():
        raise SiteNotFound("degenerate tangent")
    # headings are atan2(d_row, d_col); pick one of the two normals
    sign = 1.0 if rng.random() < 0.5 else -1.0
    heading = np.arctan2(-sign * tangent[1], sign * tangent[0])
    r = int(state.radius[path[j]])
    length = int(rng.integers(cfg.branch_length[0], cfg.branch_length[1] + 1))
    h, w = state.mask.shape
    pos = np.array(path[j], dtype=float)
    pts = [pos]
    outside = 0
    for _ in range(length + 4 * (r + 2)):
        heading += rng.normal(0.0, cfg.branch_wobble)
        pos = pos + (np.sin(heading), np.cos(heading))
        ri, ci = int(round(pos[0])), int(round(pos[1]))
        if not (0 <= ri < h and 0 <= ci < w):
            break
        pts.append(pos)
        if not state.mask[ri, ci]:
            outside += 1
            if outside >= length:
                break
    if outside < cfg.branch_length[0] // 2:
        raise SiteNotFound("branch left the image")
    return state.mask | stroke(state.mask.shape, np.array(pts), max(0.5, r - 0.5))


_INJECTORS = {
    AnomalyType.BROKEN: inject_broken,
    AnomalyType.SPURIOUS: inject_spurious,
    AnomalyType.MISSING: inject_missing,
    AnomalyType.EXTRA: inject_extra,
}


def inject(
    mask, kind: AnomalyType, rng: np.random.Generator, config: ForgeConfig = ForgeConfig()
) -> Injection:
    """Inject one anomaly of ``kind``; raises SiteNotFound when no site is viable."""
    state = mask if isinstance(mask, MaskState) else MaskState(mask)
    corrupted = _INJECTORS[AnomalyType(kind)](state, rng, config)
    diff = corrupted ^ state.mask
    if not diff.any():
        raise SiteNotFound("injection changed nothing")
    return Injection(corrupted, diff)
