"""Compiled skeleton branch tracer."""

import numpy as np
from numba import njit

_DR = np.array([-1, -1, 0, 1, 1, 1, 0, -1], dtype=np.int64)
_DC = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)


@njit(cache=True)
def _ahead(on, r, c, pr, pc, dr, dc):
    # the single neighbour other than (pr, pc), or -1 when there are 0 or several
    found = -1
    for k in range(8):
        qr, qc = r + dr[k], c + dc[k]
        if on[qr, qc] and not (qr == pr and qc == pc):
            if found >= 0:
                return -1
            found = k
    return found


@njit(cache=True)
def _walk(on, node, visited, sr, sc, fr, fc, out, n, dr, dc):
    out[n, 0], out[n, 1] = sr, sc
    out[n + 1, 0], out[n + 1, 1] = fr, fc
    n += 2
    visited[fr, fc] = True
    pr, pc, cr, cc = sr, sc, fr, fc
    while True:
        k = _ahead(on, cr, cc, pr, pc, dr, dc)
        if k < 0:
            break
        qr, qc = cr + dr[k], cc + dc[k]
        out[n, 0], out[n, 1] = qr, qc
        n += 1
        if node[qr, qc] or (qr == sr and qc == sc) or visited[qr, qc]:
            break
        visited[qr, qc] = True
        pr, pc, cr, cc = cr, cc, qr, qc
    return n


@njit(cache=True)
def trace_padded(on, node, dr, dc):
    """Branch paths of a padded skeleton as (pixels, start offsets), padded coordinates."""
    h, w = on.shape
    total = 0
    for r in range(h):
        for c in range(w):
            total += on[r, c] + 16 * node[r, c]
    out = np.empty((total + 16, 2), dtype=np.int64)
    starts = np.empty(total + 17, dtype=np.int64)
    visited = np.zeros((h, w), dtype=np.bool_)
    n = 0
    nb = 0
    for r in range(h):
        for c in range(w):
            if not node[r, c]:
                continue
            for k in range(8):
                qr, qc = r + dr[k], c + dc[k]
                if on[qr, qc] and not node[qr, qc] and not visited[qr, qc]:
                    starts[nb] = n
                    nb += 1
                    n = _walk(on, node, visited, r, c, qr, qc, out, n, dr, dc)
    for r in range(h):
        for c in range(w):
            if not on[r, c] or node[r, c] or visited[r, c]:
                continue
            for k in range(8):
                qr, qc = r + dr[k], c + dc[k]
                if on[qr, qc]:
                    visited[r, c] = True
                    starts[nb] = n
                    nb += 1
                    n = _walk(on, node, visited, r, c, qr, qc, out, n, dr, dc)
                    break
    starts[nb] = n
    return out[:n], starts[: nb + 1]


@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _union(parent, a, b):
    if a == b:
        return 0
    a, b = _find(parent, a), _find(parent, b)
    if a == b:
        return 0
    if a < b:
        parent[b] = a
    else:
        parent[a] = b
    return 1


@njit(cache=True)
def count_components(img, eight):
    """Number of connected True regions; 8-adjacency if ``eight`` else 4-adjacency."""
    h, w = img.shape
    label = np.zeros((h + 1, w + 2), dtype=np.int32)  # one guard row on top, guard columns
    # provisional labels never exceed ceil(h * w / 2)
    parent = np.empty(h * w // 2 + 3, dtype=np.int32)
    n = 0
    merges = 0
    for r in range(h):
        for c in range(w):
            if not img[r, c]:
                continue
            R, C = r + 1, c + 1
            cur = label[R, C - 1]
            up = label[R - 1, C]
            if up:
                if cur:
                    merges += _union(parent, cur, up)
                else:
                    cur = up
            if eight:
                for q in (label[R - 1, C - 1], label[R - 1, C + 1]):
                    if q:
                        if cur:
                            merges += _union(parent, cur, q)
                        else:
                            cur = q
            if not cur:
                n += 1
                parent[n] = n
                cur = n
            label[R, C] = cur
    return n - merges
