"""Random tubular networks used as a self-contained source of clean masks."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import Delaunay, QhullError
from scipy.spatial.distance import pdist, squareform

from tubetopo.forge.raster import quad_bezier, stroke
from tubetopo.topology import betti


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthParams:
    size: int = 256
    nodes: tuple[int, int] = (8, 14)
    loops: tuple[int, int] = (0, 3)
    width: tuple[float, float] = (3.0, 9.0)
    margin: int = 16
    min_spacing: float = 28.0
    bend: float = 0.15
    # short dangling side branches hung off existing edges
    spurs: tuple[int, int] = (7, 11)
    spur_length: tuple[float, float] = (16.0, 36.0)
    max_tries: int = 200

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthParams":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def _anchors(rng, n, p: SynthParams) -> np.ndarray:
    pts = []
    lo, hi = p.margin, p.size - p.margin
    for _ in range(n * 50):
        q = rng.uniform(lo, hi, size=2)
        if all(np.hypot(*(q - r)) >= p.min_spacing for r in pts):
            pts.append(q)
            if len(pts) == n:
                break
    return np.array(pts)


def _loop_candidates(pts, tree_edges) -> list[tuple[int, int]]:
    if len(pts) < 3:
        return []
    try:
        tri = Delaunay(pts)
    except QhullError:
        return []
    edges = set()
    for simplex in tri.simplices:
        for i in range(3):
            a, b = sorted((int(simplex[i]), int(simplex[(i + 1) % 3])))
            edges.add((a, b))
    return sorted(edges - tree_edges)


def _euler(p: np.ndarray) -> int:
    """Euler characteristic V - E + F of the union of closed pixel squares."""
    pp = np.pad(p, 1)
    h, w = p.shape
    f = int(np.count_nonzero(p))
    e = int(np.count_nonzero(pp[: h + 1, 1 : w + 1] | pp[1:, 1 : w + 1]))
    e += int(np.count_nonzero(pp[1 : h + 1, : w + 1] | pp[1 : h + 1, 1:]))
    v = int(np.count_nonzero(pp[:-1, :-1] | pp[:-1, 1:] | pp[1:, :-1] | pp[1:, 1:]))
    return v - e + f


def _keeps_topology(mask: np.ndarray, added: np.ndarray, window: tuple[slice, slice]) -> bool:
    """Whether ``added``, touching a one-component ``mask``, leaves its Betti numbers alone.

    b0 cannot change, so b1 is fixed iff the Euler characteristic is. Cells
    away from the edit cancel, so only ``window`` (the edit plus a one-pixel
    margin) is compared.
    """
    before = mask[window]
    return _euler(before) == _euler(before | added[window])


def _add_spurs(rng, mask, curves, params: SynthParams) -> np.ndarray:
    """Hang short branches off the middle of existing edges (T-junctions)."""
    want = int(rng.integers(params.spurs[0], params.spurs[1] + 1))
    added = 0
    lo, hi = params.margin / 2, params.size - params.margin / 2
    for _ in range(4 * want):
        if added == want:
            break
        pts, edge_r = curves[int(rng.integers(len(curves)))]
        k = int(rng.uniform(0.3, 0.7) * (len(pts) - 1))
        base = pts[k]
        t = pts[min(k + 2, len(pts) - 1)] - pts[max(k - 2, 0)]
        normal = np.array([-t[1], t[0]]) / (np.hypot(*t) + 1e-12)
        angle = rng.uniform(-0.5, 0.5) + (np.pi if rng.random() < 0.5 else 0.0)
        c, s = np.cos(angle), np.sin(angle)
        direction = np.array([c * normal[0] - s * normal[1], s * normal[0] + c * normal[1]])
        tip = base + (edge_r + rng.uniform(*params.spur_length)) * direction
        if not (lo <= tip[0] <= hi and lo <= tip[1] <= hi):
            continue
        radius = rng.uniform(params.width[0], (params.width[0] + params.width[1]) / 2) / 2
        curve = quad_bezier(base, (base + tip) / 2, tip)
        spur = stroke(mask.shape, curve, radius)
        lo_rc = np.maximum(np.floor(curve.min(axis=0) - radius).astype(int) - 2, 0)
        hi_rc = np.ceil(curve.max(axis=0) + radius).astype(int) + 3
        window = (slice(lo_rc[0], hi_rc[0]), slice(lo_rc[1], hi_rc[1]))
        if _keeps_topology(mask, spur, window):
            mask = mask | spur
            added += 1
    return mask


def synth_network(rng: np.random.Generator, params: SynthParams = SynthParams()) -> np.ndarray:
    """Rasterize a random spanning tree plus extra loop edges.

    Edges come from the Euclidean minimum spanning tree and the Delaunay
    triangulation of random anchors, so straight edges never cross. Each
    edge is a slightly bent stroke of random width. A candidate is redrawn
    until its Betti numbers are (1, number of loop edges); short side
    branches that would change them are skipped.
    """
    for _ in range(params.max_tries):
        n = int(rng.integers(params.nodes[0], params.nodes[1] + 1))
        want_loops = int(rng.integers(params.loops[0], params.loops[1] + 1))
        pts = _anchors(rng, n, params)
        if len(pts) < 2:
            continue
        n = len(pts)
        mst = minimum_spanning_tree(squareform(pdist(pts))).tocoo()
        tree = {tuple(sorted((int(a), int(b)))) for a, b in zip(mst.row, mst.col)}
        extra = _loop_candidates(pts, tree)
        if len(extra) < want_loops:
            continue
        chosen = [extra[i] for i in sorted(rng.choice(len(extra), size=want_loops, replace=False))]
        mask = np.zeros((params.size, params.size), dtype=bool)
        curves = []
        for a, b in sorted(tree) + chosen:
            p0, p2 = pts[a], pts[b]
            d = p2 - p0
            normal = np.array([-d[1], d[0]])
            ctrl = (p0 + p2) / 2 + normal * rng.uniform(-params.bend, params.bend)
            radius = rng.uniform(*params.width) / 2
            curve = quad_bezier(p0, ctrl, p2)
            curves.append((curve, radius))
            mask |= stroke(mask.shape, curve, radius)
        if betti(mask) == (1, want_loops):
            return _add_spurs(rng, mask, curves, params)
    raise SynthesisError(f"no valid network after {params.max_tries} draws")
