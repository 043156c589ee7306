"""Binary-mask labeling, per-object geometry, and interior point sampling.

Masks are 2-D bool arrays (row-major, origin top-left); points use
(x, y) = (column, row). Connected-component labels are assigned in
raster-scan first-encounter order so downstream reports are stable.
All randomness is drawn from PCG64 generators seeded explicitly, so
results are identical across platforms and call orders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import ndimage

from .errors import InputError

_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


class PixelPoint(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class ObjectStats:
    label: int
    area: int
    bbox: tuple[int, int, int, int]  # (min_x, min_y, max_x, max_y), inclusive
    centroid: tuple[float, float]  # (x, y)


@dataclass(frozen=True)
class LabeledMask:
    """Connected-component labeling: 0 = background, 1..num_objects = objects."""

    labels: np.ndarray
    num_objects: int

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


def ensure_mask(mask: np.ndarray) -> np.ndarray:
    """Validate and coerce an array to a nonempty 2-D bool mask."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"mask must be a nonempty 2-D grid, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> LabeledMask:
    """Label connected foreground regions under 4- or 8-connectivity.

    Labels are renumbered to raster-scan first-encounter order; an
    all-background mask yields num_objects = 0.
    """
    arr = ensure_mask(mask)
    if connectivity not in _STRUCTURES:
        raise InputError(f"connectivity must be 4 or 8, got {connectivity}")
    raw, count = ndimage.label(arr, structure=_STRUCTURES[connectivity])
    labels = raw.astype(np.int32, copy=False)
    if count > 0:
        # ndimage.label does not guarantee an ordering; renumber by first
        # occurrence in raster order.
        flat = labels.ravel()
        fg = np.flatnonzero(flat)
        _, first_idx = np.unique(flat[fg], return_index=True)
        order = np.argsort(first_idx, kind="stable")
        lut = np.zeros(count + 1, dtype=np.int32)
        lut[np.arange(1, count + 1)[order]] = np.arange(1, count + 1)
        labels = lut[labels]
    return LabeledMask(labels=labels, num_objects=int(count))


def object_stats(labeled: LabeledMask) -> list[ObjectStats]:
    """Per-label area, inclusive bounding box, and centroid, ascending by label."""
    n = labeled.num_objects
    if n == 0:
        return []
    labels = labeled.labels
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    ys, xs = np.nonzero(labels)
    ids = labels[ys, xs]
    sum_x = np.bincount(ids, weights=xs, minlength=n + 1)
    sum_y = np.bincount(ids, weights=ys, minlength=n + 1)
    boxes = ndimage.find_objects(labels)
    stats = []
    for label in range(1, n + 1):
        sy, sx = boxes[label - 1]
        area = int(areas[label])
        stats.append(
            ObjectStats(
                label=label,
                area=area,
                bbox=(sx.start, sy.start, sx.stop - 1, sy.stop - 1),
                centroid=(sum_x[label] / area, sum_y[label] / area),
            )
        )
    return stats


def _object_window(labeled: LabeledMask, label: int) -> tuple[np.ndarray, int, int]:
    """Bool mask of one object cropped to its bbox, plus the crop origin."""
    sy, sx = ndimage.find_objects(labeled.labels, max_label=label)[label - 1]
    window = labeled.labels[sy, sx] == label
    return window, sx.start, sy.start


def interior_point_sample(
    labeled: LabeledMask, label: int, k: int, seed: int
) -> list[PixelPoint]:
    """Sample min(k, area) distinct points inside one labeled object.

    The first point is the object's chamfer distance-transform maximum
    (4-neighborhood metric, image border and other labels treated as
    background, ties broken by raster order). Remaining points are
    drawn without replacement by a PCG64 generator seeded with `seed`,
    preferring pixels whose 4-neighborhood lies entirely inside the
    object and falling back to the whole object when that pool is too
    small.
    """
    if not 1 <= label <= labeled.num_objects:
        raise InputError(
            f"unknown label {label}; mask has {labeled.num_objects} objects"
        )
    if k < 1:
        raise InputError(f"point count must be >= 1, got {k}")
    window, x0, y0 = _object_window(labeled, label)
    padded = np.pad(window, 1)
    dist = ndimage.distance_transform_cdt(padded, metric="taxicab")
    dist = dist[1:-1, 1:-1]

    flat_peak = int(np.argmax(dist))  # first maximum in raster order
    py, px = divmod(flat_peak, window.shape[1])
    first = PixelPoint(x0 + px, y0 + py)

    area = int(window.sum())
    needed = min(k, area) - 1
    if needed == 0:
        return [first]

    interior = np.argwhere(dist >= 2)  # raster order (row, col)
    pool = [
        PixelPoint(x0 + int(c), y0 + int(r))
        for r, c in interior
        if (x0 + int(c), y0 + int(r)) != first
    ]
    if len(pool) < needed:
        rows, cols = np.nonzero(window)
        pool = [
            PixelPoint(x0 + int(c), y0 + int(r))
            for r, c in zip(rows, cols)
            if (x0 + int(c), y0 + int(r)) != first
        ]
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = rng.choice(len(pool), size=needed, replace=False)
    return [first] + [pool[int(i)] for i in chosen]


def labels_at(labeled: LabeledMask, points: Sequence[PixelPoint]) -> list[int]:
    """Label value under each point (bounds-checked)."""
    out = []
    for p in points:
        if not (0 <= p.x < labeled.width and 0 <= p.y < labeled.height):
            raise InputError(f"point {p} outside {labeled.width}x{labeled.height} grid")
        out.append(int(labeled.labels[p.y, p.x]))
    return out
