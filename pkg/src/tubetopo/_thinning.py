"""Compiled kernels for Zhang-Suen thinning.

Neighbour codes use one bit per 8-neighbour, walking clockwise from north:
bit 0 = N, 1 = NE, 2 = E, 3 = SE, 4 = S, 5 = SW, 6 = W, 7 = NW.
"""

import numpy as np
from numba import njit

_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _bits(code):
    return [(code >> i) & 1 for i in range(8)]


def _crossings(p):
    return sum(1 for i in range(8) if p[i] == 0 and p[(i + 1) % 8] == 1)


def _is_simple(p):
    # Yokoi connectivity number for 8-connected foreground, 4-connected background.
    q = [1 - v for v in p]
    n8 = 0
    for k in (0, 2, 4, 6):
        n8 += q[k] - q[k] * q[(k + 1) % 8] * q[(k + 2) % 8]
    return n8 == 1


def _build_luts():
    zs = np.zeros((2, 256), dtype=np.uint8)
    clean = np.zeros(256, dtype=np.uint8)
    for code in range(256):
        p = _bits(code)
        n, ne, e, se, s, sw, w, nw = p
        b = sum(p)
        simple = _is_simple(p)
        base = 2 <= b <= 6 and _crossings(p) == 1 and simple
        zs[0, code] = base and n * e * s == 0 and e * s * w == 0
        zs[1, code] = base and n * e * w == 0 and n * s * w == 0
        clean[code] = simple and b >= 2
    return zs, clean


ZS_LUT, CLEAN_LUT = _build_luts()


@njit(cache=True)
def _code(img, r, c):
    return (
        img[r - 1, c]
        | (img[r - 1, c + 1] << 1)
        | (img[r, c + 1] << 2)
        | (img[r + 1, c + 1] << 3)
        | (img[r + 1, c] << 4)
        | (img[r + 1, c - 1] << 5)
        | (img[r, c - 1] << 6)
        | (img[r - 1, c - 1] << 7)
    )


@njit(cache=True)
def thin_padded(img, zs_lut, clean_lut):
    """Thin a zero-bordered uint8 image in place.

    Each Zhang-Suen sub-iteration collects candidates against a snapshot,
    then re-checks every candidate against the live image before deleting,
    so only simple points are ever removed.
    """
    h, w = img.shape
    cand_r = np.empty(h * w, dtype=np.int64)
    cand_c = np.empty(h * w, dtype=np.int64)
    changed = True
    while changed:
        changed = False
        for sub in range(2):
            n = 0
            for r in range(1, h - 1):
                for c in range(1, w - 1):
                    if img[r, c] and zs_lut[sub, _code(img, r, c)]:
                        cand_r[n] = r
                        cand_c[n] = c
                        n += 1
            for i in range(n):
                r = cand_r[i]
                c = cand_c[i]
                if zs_lut[sub, _code(img, r, c)]:
                    img[r, c] = 0
                    changed = True
    # staircase cleanup: drop redundant non-end pixels until the curve is 8-minimal
    changed = True
    while changed:
        changed = False
        for r in range(1, h - 1):
            for c in range(1, w - 1):
                if img[r, c] and clean_lut[_code(img, r, c)]:
                    img[r, c] = 0
                    changed = True
    return img
