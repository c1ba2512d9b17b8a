"""Independent reference implementations used only by the tests.

None of these import the code under test's algorithms; they recompute the
same quantities by slower or structurally different means.
"""
from __future__ import annotations

import itertools

import numpy as np


def raster_mask(quad, n: int = 1000, extent: float = 1.0) -> np.ndarray:
    """Pixel-center membership of a convex clockwise polygon on an n x n grid
    covering [0, extent]^2 (half-plane tests, y-down frame)."""
    c = (np.arange(n) + 0.5) * (extent / n)
    xs, ys = np.meshgrid(c, c)
    inside = np.ones((n, n), dtype=bool)
    v = np.asarray(quad, dtype=float)
    for k in range(len(v)):
        (ax, ay), (bx, by) = v[k], v[(k + 1) % len(v)]
        # clockwise in y-down <=> interior on the side where cross >= 0
        inside &= (bx - ax) * (ys - ay) - (by - ay) * (xs - ax) >= 0
    return inside


def raster_iou(a, b, n: int = 1000, extent: float = 1.0) -> float:
    ma, mb = raster_mask(a, n, extent), raster_mask(b, n, extent)
    union = np.count_nonzero(ma | mb)
    return np.count_nonzero(ma & mb) / union if union else 0.0


def dlt_homography(src, dst) -> np.ndarray:
    """Homography by SVD null space of the 8x9 DLT system."""
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
    _, _, vt = np.linalg.svd(np.array(rows, dtype=float))
    h = vt[-1].reshape(3, 3)
    return h / h[2, 2]


def reference_warp(img: np.ndarray, src_quad, w: int, h: int) -> np.ndarray:
    """Per-pixel loop: destination pixel centers mapped back into ``img`` and
    bilinearly sampled, zero outside.  ``img`` is (H, W) or (H, W, C)."""
    img = np.asarray(img, dtype=float)
    if img.ndim == 2:
        img = img[:, :, None]
    H, W, C = img.shape
    dst = [(0, 0), (w, 0), (w, h), (0, h)]
    back = dlt_homography(dst, src_quad)
    out = np.zeros((h, w, C))

    def px(r, c):
        if 0 <= r < H and 0 <= c < W:
            return img[r, c]
        return np.zeros(C)

    for r in range(h):
        for c in range(w):
            p = back @ np.array([c + 0.5, r + 0.5, 1.0])
            sx, sy = p[0] / p[2] - 0.5, p[1] / p[2] - 0.5
            c0, r0 = int(np.floor(sx)), int(np.floor(sy))
            fx, fy = sx - c0, sy - r0
            out[r, c] = ((1 - fy) * ((1 - fx) * px(r0, c0) + fx * px(r0, c0 + 1))
                         + fy * ((1 - fx) * px(r0 + 1, c0) + fx * px(r0 + 1, c0 + 1)))
    return out


def brute_force_max_matching(n_pred: int, n_gt: int, edges: set) -> int:
    """Largest one-to-one subset of ``edges`` (pairs (pred, gt)) by exhaustion."""
    best = 0
    for k in range(min(n_pred, n_gt), 0, -1):
        for preds in itertools.combinations(range(n_pred), k):
            for gts in itertools.permutations(range(n_gt), k):
                if all((p, g) in edges for p, g in zip(preds, gts)):
                    return k
    return best


# Name-rule oracle: explicit code-point tables, no str methods.
_IDEOGRAPH_RANGES = ((0x4E00, 0x9FFF), (0x3400, 0x4DBF))
_LATIN = set(range(0x41, 0x5B)) | set(range(0x61, 0x7B))
_DIGITS = set(range(0x30, 0x3A)) | set(range(0xFF10, 0xFF1A)) | {0x3007}


def name_oracle(name: str) -> bool:
    ideographs = 0
    for cp in map(ord, name):
        if any(lo <= cp <= hi for lo, hi in _IDEOGRAPH_RANGES):
            ideographs += 1
        elif cp in _LATIN or cp not in _DIGITS:
            return False
    return ideographs >= 2


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        hi = f()
        x[i] = old - eps
        lo = f()
        x[i] = old
        g[i] = (hi - lo) / (2 * eps)
    return g
