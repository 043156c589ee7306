"""Robust change vector analysis baseline.

Pixelwise spectral change magnitude with a small neighborhood search in
both temporal directions, which absorbs minor misregistration: a pixel
only scores high when neither image offers a nearby match for the
other. Requires both the pre- and post-change images, unlike the
prompt-based detector.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError

OTSU_BINS = 256


def rcva_magnitude(
    pre: np.ndarray, post: np.ndarray, window: int = 3
) -> np.ndarray:
    """Change magnitude per pixel.

    For each pixel p, d1 = min over the window x window neighborhood q
    (clipped at borders) of ||pre(p) - post(q)||_2 across channels, d2
    the same with roles swapped, and the output is min(d1, d2).
    Window 1 reduces to the plain change-vector magnitude.
    """
    a = np.asarray(pre, dtype=np.float64)
    b = np.asarray(post, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[2] != 3:
        raise InputError(f"expected (H, W, 3) images, got shape {a.shape}")
    if window < 1 or window % 2 == 0:
        raise InputError(f"window must be odd and >= 1, got {window}")

    h, w = a.shape[:2]
    radius = window // 2
    d1 = np.full((h, w), np.inf)
    d2 = np.full((h, w), np.inf)
    for dy in range(-radius, radius + 1):
        ys0, ys1 = max(0, -dy), h - max(0, dy)  # rows p with p+dy in bounds
        for dx in range(-radius, radius + 1):
            xs0, xs1 = max(0, -dx), w - max(0, dx)
            center = np.s_[ys0:ys1, xs0:xs1]
            offset = np.s_[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx]
            diff = a[center] - b[offset]
            np.minimum(
                d1[center], np.sqrt(np.sum(diff * diff, axis=2)), out=d1[center]
            )
            diff = b[center] - a[offset]
            np.minimum(
                d2[center], np.sqrt(np.sum(diff * diff, axis=2)), out=d2[center]
            )
    return np.minimum(d1, d2)


def otsu_threshold(values: np.ndarray) -> tuple[float, np.ndarray]:
    """Binarize a magnitude map at the between-class-variance maximum.

    The value range is split into 256 equal bins; the threshold is the
    upper edge of the best split's lower class and the mask marks values
    strictly above it. Splits that end on an empty bin partition the
    data identically to a lower split, so only splits ending on a
    nonempty bin are candidates (ties then resolve toward the lowest
    split). A constant map returns (constant, all-false).
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"expected a nonempty 2-D map, got shape {arr.shape}")
    vmin, vmax = float(arr.min()), float(arr.max())
    if vmin == vmax:
        return vmin, np.zeros_like(arr, dtype=bool)

    hist, edges = np.histogram(arr, bins=OTSU_BINS, range=(vmin, vmax))
    hist = hist.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2.0
    total = hist.sum()
    weight_lo = np.cumsum(hist)
    weight_hi = total - weight_lo
    sum_lo = np.cumsum(hist * centers)
    mean_lo = np.divide(sum_lo, weight_lo, out=np.zeros_like(sum_lo), where=weight_lo > 0)
    mean_hi = np.divide(
        sum_lo[-1] - sum_lo, weight_hi, out=np.zeros_like(sum_lo), where=weight_hi > 0
    )
    variance = weight_lo * weight_hi * (mean_lo - mean_hi) ** 2
    variance[(weight_hi == 0) | (hist == 0)] = -1.0  # empty class or duplicate split
    best = int(np.argmax(variance))  # first maximum = lowest split on ties
    threshold = float(edges[best + 1])
    return threshold, arr > threshold
