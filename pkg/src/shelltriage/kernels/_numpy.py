"""NumPy implementations of the hot kernels.

These are the pure-Python fallback for the compiled `shelltriage._native`
extension. The two backends must agree: grid features are computed from
integer pixel sums and are bit-identical across backends; the bilinear
resize uses the same half-pixel sample coordinates and rounding; cosine
scores may differ only by accumulation order (< 1e-12 relative).
"""

from __future__ import annotations

import numpy as np


def resize_bilinear_u8(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear-resize an HxWx3 uint8 image to out_h x out_w.

    Sample coordinates use half-pixel centers clamped to the image, so the
    result matches common library resizers (2-tap linear, no area averaging).
    Values are rounded half-up back to uint8.
    """
    h, w = src.shape[0], src.shape[1]
    if (out_h, out_w) == (h, w):
        return src.copy()

    scale_y = h / out_h
    scale_x = w / out_w
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * scale_y - 0.5
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * scale_x - 0.5
    sy = np.clip(sy, 0.0, float(h - 1))
    sx = np.clip(sx, 0.0, float(w - 1))
    y0 = np.minimum(sy.astype(np.int64), max(h - 2, 0))
    x0 = np.minimum(sx.astype(np.int64), max(w - 2, 0))
    fy = sy - y0
    fx = sx - x0
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)

    srcf = src.astype(np.float64)
    fxg = fx[None, :, None]
    fyg = fy[:, None, None]
    top = (1.0 - fxg) * srcf[y0[:, None], x0[None, :]] + fxg * srcf[y0[:, None], x1[None, :]]
    bot = (1.0 - fxg) * srcf[y1[:, None], x0[None, :]] + fxg * srcf[y1[:, None], x1[None, :]]
    val = (1.0 - fyg) * top + fyg * bot
    out = np.floor(val + 0.5)
    np.clip(out, 0.0, 255.0, out=out)
    return out.astype(np.uint8)


def grid_features_u8(img: np.ndarray, grid: int) -> np.ndarray:
    """Per-cell color means and luminance gradient over a grid x grid partition.

    Each cell contributes 4 features in row-major cell order:
    mean R, mean G, mean B (pixel values scaled to [0,1]) and a gradient term
    equal to mean(|dL/dx|) + mean(|dL/dy|), forward differences taken only
    between pixel pairs fully inside the cell, L = (R+G+B)/3 in [0,1].
    All sums are integer so the result is exact and backend-independent.
    """
    h, w = img.shape[0], img.shape[1]
    s = img.sum(axis=2, dtype=np.int64)
    adx = np.abs(np.diff(s, axis=1))
    ady = np.abs(np.diff(s, axis=0))
    rows = [(i * h) // grid for i in range(grid + 1)]
    cols = [(j * w) // grid for j in range(grid + 1)]

    feats = np.zeros(grid * grid * 4, dtype=np.float64)
    for gy in range(grid):
        y0, y1 = rows[gy], rows[gy + 1]
        ch = y1 - y0
        for gx in range(grid):
            x0, x1 = cols[gx], cols[gx + 1]
            cw = x1 - x0
            base = (gy * grid + gx) * 4
            n_px = ch * cw
            csum = img[y0:y1, x0:x1].sum(axis=(0, 1), dtype=np.int64)
            feats[base + 0] = csum[0] / (255.0 * n_px)
            feats[base + 1] = csum[1] / (255.0 * n_px)
            feats[base + 2] = csum[2] / (255.0 * n_px)
            tx = 0.0
            if cw > 1:
                n_dx = (cw - 1) * ch
                tx = int(adx[y0:y1, x0 : x1 - 1].sum()) / (765.0 * n_dx)
            ty = 0.0
            if ch > 1:
                n_dy = cw * (ch - 1)
                ty = int(ady[y0 : y1 - 1, x0:x1].sum()) / (765.0 * n_dy)
            feats[base + 3] = tx + ty
    return feats


def cosine_scores(
    mat: np.ndarray, norms: np.ndarray, query: np.ndarray, qnorm: float
) -> np.ndarray:
    """Cosine similarity of `query` against every row of `mat` (float64)."""
    sims = mat @ query
    sims /= norms * qnorm
    return sims
