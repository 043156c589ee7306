"""PNG raster IO.

Conventions: binary masks are 8-bit single-channel PNGs with 0 =
background and any nonzero value = foreground; masks are written as
0/255. Semantic maps are 8-bit single-channel PNGs whose pixel values
are class ids. Magnitude maps are written as 16-bit grayscale scaled to
the full range.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import InputError


def _open(path: str) -> Image.Image:
    if not os.path.isfile(path):
        raise InputError(f"file not found: {path}")
    try:
        return Image.open(path)
    except Exception as exc:
        raise InputError(f"cannot read image file {path}: {exc}") from exc


def load_mask(path: str) -> np.ndarray:
    """Load a binary mask PNG as a bool array (nonzero = foreground)."""
    img = _open(path).convert("L")
    return np.asarray(img) > 0


def load_rgb(path: str) -> np.ndarray:
    """Load an image as an (H, W, 3) uint8 RGB array."""
    img = _open(path).convert("RGB")
    return np.asarray(img)


def load_semantic(path: str) -> np.ndarray:
    """Load a semantic class-id map as an (H, W) uint8 array."""
    img = _open(path).convert("L")
    return np.asarray(img)


def save_mask(path: str, mask: np.ndarray) -> None:
    """Write a bool mask as an 8-bit PNG, 255 = foreground/changed."""
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def save_rgb(path: str, image: np.ndarray) -> None:
    arr = np.ascontiguousarray(image, dtype=np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def save_semantic(path: str, class_ids: np.ndarray) -> None:
    arr = np.ascontiguousarray(class_ids, dtype=np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def save_magnitude_u16(path: str, values: np.ndarray) -> None:
    """Write a non-negative float map as 16-bit PNG scaled to [0, 65535]."""
    values = np.asarray(values, dtype=np.float64)
    vmax = float(values.max()) if values.size else 0.0
    if vmax > 0:
        scaled = np.round(values / vmax * 65535.0)
    else:
        scaled = np.zeros_like(values)
    arr = scaled.astype(np.uint16)
    Image.fromarray(arr).save(path, format="PNG")  # uint16 -> 16-bit grayscale
