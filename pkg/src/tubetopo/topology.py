"""Pixel-grid topology primitives.

Masks are 2-D numpy boolean arrays indexed ``[row, col]``. Foreground uses
8-adjacency and background 4-adjacency throughout. Boxes are half-open
``(x1, y1, x2, y2)`` with x along columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from tubetopo._graph import _DC, _DR, count_components, trace_padded
from tubetopo._thinning import CLEAN_LUT, ZS_LUT, thin_padded

Pixel = tuple[int, int]
Box = tuple[int, int, int, int]

_STRUCT = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}

# clockwise from north, matching the thinning neighbour code
_NEIGHBOURS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


class BoxBoundsError(ValueError):
    pass


class BettiPair(NamedTuple):
    b0: int
    b1: int


def as_mask(arr) -> np.ndarray:
    """Validate and convert a 2-D 0/1 array to a boolean mask."""
    a = np.asarray(arr)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2-D grid, got shape {a.shape}")
    if a.dtype != bool:
        if not np.isin(a, (0, 1)).all():
            raise ValueError("mask cells must be 0 or 1")
        a = a.astype(bool)
    return a


def label_components(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label foreground components.

    Labels run 1..count in row-major order of each component's first pixel;
    background is 0.
    """
    if connectivity not in _STRUCT:
        raise ValueError("connectivity must be 4 or 8")
    labels, count = ndimage.label(mask, structure=_STRUCT[connectivity])
    if count > 1:
        flat = labels.ravel()
        present, first = np.unique(flat, return_index=True)
        order = present[1:][np.argsort(first[1:], kind="stable")]
        remap = np.zeros(count + 1, dtype=labels.dtype)
        remap[order] = np.arange(1, count + 1, dtype=labels.dtype)
        labels = remap[labels]
    return labels, int(count)


def betti(mask: np.ndarray) -> BettiPair:
    m = np.asarray(mask, dtype=bool)
    b0 = count_components(m, True)
    if b0 == 0:
        return BettiPair(0, 0)
    holes = count_components(np.pad(~m, 1, constant_values=True), False)
    return BettiPair(b0, holes - 1)


def neighbour_count(skel: np.ndarray) -> np.ndarray:
    """Number of 8-neighbours that are set, for every pixel."""
    p = np.pad(skel.astype(np.uint8), 1)
    h, w = skel.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for dr, dc in _NEIGHBOURS:
        out += p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    return out


def thin(mask: np.ndarray) -> np.ndarray:
    """Topology-preserving one-pixel-wide thinning (Zhang-Suen)."""
    img = np.pad(np.asarray(mask, dtype=np.uint8), 1)
    thin_padded(img, ZS_LUT, CLEAN_LUT)
    return img[1:-1, 1:-1].astype(bool)


def count_endpoints(mask: np.ndarray) -> int:
    """Endpoint count of the skeleton of ``mask``."""
    skel = thin(mask)
    return int(np.count_nonzero(skel & (neighbour_count(skel) == 1)))


@dataclass(frozen=True)
class Skeleton:
    mask: np.ndarray
    endpoints: list[Pixel] = field(repr=False)
    junctions: list[Pixel] = field(repr=False)

    @cached_property
    def nodes(self) -> set[Pixel]:
        return set(self.endpoints) | set(self.junctions)

    @cached_property
    def branches(self) -> list[list[Pixel]]:
        """Node-to-node paths; every non-node skeleton pixel lies on exactly one.

        A path starts and ends on a node (endpoint or junction). Closed loops
        without any node are returned as a path whose first and last pixel
        coincide. Pixels with no skeleton neighbours are not part of any branch.
        """
        return _trace_branches(self.mask, self.nodes)

    def branch_of(self) -> dict[Pixel, int]:
        index = {}
        for i, path in enumerate(self.branches):
            for p in path[1:-1]:
                index[p] = i
        return index


def skeletonize(mask: np.ndarray) -> Skeleton:
    skel = thin(mask)
    deg = neighbour_count(skel)
    ends = np.argwhere(skel & (deg == 1))
    juncs = np.argwhere(skel & (deg >= 3))
    return Skeleton(
        mask=skel,
        endpoints=[(int(r), int(c)) for r, c in ends],
        junctions=[(int(r), int(c)) for r, c in juncs],
    )


def _trace_branches(skel: np.ndarray, nodes: set[Pixel]) -> list[list[Pixel]]:
    on = np.pad(skel.astype(bool), 1)
    node = np.zeros_like(on)
    for r, c in nodes:
        node[r + 1, c + 1] = True
    pix, starts = trace_padded(on, node, _DR, _DC)
    pix = (pix - 1).tolist()
    return [list(map(tuple, pix[a:b])) for a, b in zip(starts[:-1].tolist(), starts[1:].tolist())]


def local_radius(mask: np.ndarray) -> np.ndarray:
    """Chebyshev distance from each foreground pixel to the nearest background pixel.

    Pixels outside the grid count as background.
    """
    padded = np.pad(np.asarray(mask, dtype=bool), 1)
    dist = ndimage.distance_transform_cdt(padded, metric="chessboard")
    return dist[1:-1, 1:-1].astype(np.int32)


def box_area(b: Sequence[float]) -> float:
    return max(0, b[2] - b[0]) * max(0, b[3] - b[1])


def iou(a: Sequence[float], b: Sequence[float]) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = box_area(a) + box_area(b) - inter
    return inter / union if union > 0 else 0.0


def crop(mask: np.ndarray, box: Box) -> np.ndarray:
    x1, y1, x2, y2 = box
    h, w = mask.shape
    if not (0 <= x1 < x2 <= w and 0 <= y1 < y2 <= h):
        raise BoxBoundsError(f"box {tuple(box)} outside {w}x{h} mask")
    return mask[y1:y2, x1:x2]


def resize_nearest(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    if height < 1 or width < 1:
        raise ValueError("target dimensions must be >= 1")
    h, w = mask.shape
    rows = (np.arange(height) * h) // height
    cols = (np.arange(width) * w) // width
    return mask[np.ix_(rows, cols)]


def bounding_box(mask: np.ndarray) -> Box | None:
    """Tight half-open box of the set pixels, or None for an empty mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1


def normalize_box(box: Box, width: int, height: int) -> Box:
    """Pixel box to integer [0, 1000] coordinates (floor of p*1000/extent)."""
    x1, y1, x2, y2 = box
    return (x1 * 1000 // width, y1 * 1000 // height, x2 * 1000 // width, y2 * 1000 // height)


def denormalize_box(box: Box, width: int, height: int) -> Box:
    """Normalized box back to pixel space (floor of n*extent/1000, clamped)."""
    x1, y1, x2, y2 = box

    def cx(v):
        return min(max(v * width // 1000, 0), width)

    def cy(v):
        return min(max(v * height // 1000, 0), height)

    return cx(x1), cy(y1), cx(x2), cy(y2)
