"""Stroke rasterization shared by the network generator and the injectors."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage


@lru_cache(maxsize=64)
def _disc_offsets(radius: float) -> np.ndarray:
    r = int(np.ceil(radius))
    dr, dc = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dr * dr + dc * dc <= radius * radius + 1e-9
    return np.stack([dr[keep], dc[keep]], axis=1)


def quad_bezier(p0, p1, p2, spacing: float = 0.5) -> np.ndarray:
    """Points along a quadratic Bezier curve, at most ``spacing`` apart."""
    p0, p1, p2 = (np.asarray(p, dtype=float) for p in (p0, p1, p2))
    length = np.linalg.norm(p1 - p0) + np.linalg.norm(p2 - p1)
    n = max(2, int(np.ceil(length / spacing)) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t**2 * p2


def stroke(shape: tuple[int, int], points: np.ndarray, radius: float) -> np.ndarray:
    """Boolean mask of discs of ``radius`` stamped at each (row, col) point."""
    out = np.zeros(shape, dtype=bool)
    centres = np.rint(points).astype(np.int64).reshape(-1, 2)
    # consecutive curve samples often round to the same pixel; restamping is harmless
    centres = centres[np.r_[True, np.any(centres[1:] != centres[:-1], axis=1)]]
    coords = (centres[:, None, :] + _disc_offsets(float(radius))[None, :, :]).reshape(-1, 2)
    ok = (coords[:, 0] >= 0) & (coords[:, 0] < shape[0]) & (coords[:, 1] >= 0) & (coords[:, 1] < shape[1])
    coords = coords[ok]
    out[coords[:, 0], coords[:, 1]] = True
    return out


def within_distance(shape: tuple[int, int], pixels, radius: float) -> np.ndarray:
    """Pixels whose Euclidean distance to any of ``pixels`` is at most ``radius``."""
    pix = np.asarray(pixels, dtype=np.int64).reshape(-1, 2)
    pad = int(np.ceil(radius)) + 1
    r0 = max(int(pix[:, 0].min()) - pad, 0)
    c0 = max(int(pix[:, 1].min()) - pad, 0)
    r1 = min(int(pix[:, 0].max()) + pad + 1, shape[0])
    c1 = min(int(pix[:, 1].max()) + pad + 1, shape[1])
    seed = np.ones((r1 - r0, c1 - c0), dtype=bool)
    seed[pix[:, 0] - r0, pix[:, 1] - c0] = False
    out = np.zeros(shape, dtype=bool)
    out[r0:r1, c0:c1] = ndimage.distance_transform_edt(seed) <= radius
    return out
