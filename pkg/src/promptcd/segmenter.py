"""Promptable segmentation backends.

A backend embeds a post-change image once and then answers any number
of point-prompt queries against that embedding, returning a mask plus a
confidence score in [0, 1]. Two implementations exist: MockSegmenter
(a deterministic oracle over a ground-truth semantic map, defined here)
and OnnxSegmenter (see onnx_backend). Backends are safe for concurrent
segment() calls on a shared embedding; results depend only on the
image and the prompt set, never on call history.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple, Protocol, Sequence

import numpy as np

from .errors import BackendError, InputError
from .mask_ops import connected_components


class PointPrompt(NamedTuple):
    """Pixel coordinate plus polarity in original image coordinates."""

    x: int
    y: int
    foreground: bool = True


@dataclass(frozen=True)
class ImageEmbedding:
    """Opaque per-image payload, reusable across segment() calls."""

    payload: Any
    source_width: int
    source_height: int
    backend_id: str


@dataclass(frozen=True)
class SegmentationOutcome:
    mask: np.ndarray  # bool, same shape as the source image
    confidence: float  # clamped to [0, 1]


class Segmenter(Protocol):
    backend_id: str

    def embed(self, image: np.ndarray) -> ImageEmbedding: ...

    def segment(
        self, embedding: ImageEmbedding, prompts: Sequence[PointPrompt]
    ) -> SegmentationOutcome: ...


def _check_image(image: np.ndarray) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise BackendError(f"expected a nonempty (H, W, 3) image, got shape {arr.shape}")
    return arr


def _check_prompts(
    prompts: Sequence[PointPrompt], width: int, height: int
) -> list[PointPrompt]:
    prompts = list(prompts)
    if not prompts:
        raise InputError("segment() requires at least one prompt")
    for p in prompts:
        if not (0 <= p.x < width and 0 <= p.y < height):
            raise InputError(f"prompt {p} outside {width}x{height} image")
    return prompts


class MockSegmenter:
    """Deterministic oracle backend over a ground-truth semantic map.

    Confidence is the fraction of foreground prompts that land on
    pixels of `target_class`, plus optional seeded Gaussian noise
    (sigma, default 0), clamped to [0, 1]. The returned mask is the
    union of target-class connected regions containing at least one
    foreground prompt.

    The noise term is the normalized sum of fixed per-prompt Gaussian
    perturbations: each (pixel, polarity) carries one seeded standard
    normal, and a prompt set of size L receives sigma * sum / sqrt(L).
    Marginally that is N(0, sigma^2), but prompt sets sharing most of
    their points receive correlated noise, the way a real confidence
    head drifts smoothly when a few prompts are swapped. The draw is a
    pure function of (noise seed, prompt list), so identical inputs
    always produce identical confidences regardless of call order.
    """

    backend_id = "mock"

    def __init__(
        self,
        semantic_map: np.ndarray,
        target_class: int,
        noise_sigma: float = 0.0,
        noise_seed: int = 0,
    ):
        semantic = np.asarray(semantic_map)
        if semantic.ndim != 2:
            raise BackendError(
                f"semantic map must be 2-D, got shape {semantic.shape}"
            )
        if noise_sigma < 0:
            raise InputError(f"noise sigma must be >= 0, got {noise_sigma}")
        if noise_seed < 0:
            raise InputError(f"noise seed must be >= 0, got {noise_seed}")
        self.semantic = semantic
        self.target_class = int(target_class)
        self.noise_sigma = float(noise_sigma)
        self.noise_seed = int(noise_seed)

    def embed(self, image: np.ndarray) -> ImageEmbedding:
        arr = _check_image(image)
        h, w = arr.shape[:2]
        if (h, w) != self.semantic.shape:
            raise BackendError(
                f"image shape {(h, w)} does not match semantic map "
                f"{self.semantic.shape}"
            )
        regions = connected_components(self.semantic == self.target_class, 8)
        return ImageEmbedding(
            payload=regions, source_width=w, source_height=h, backend_id=self.backend_id
        )

    def _noise(self, prompts: Sequence[PointPrompt]) -> float:
        if self.noise_sigma == 0.0:
            return 0.0
        total = 0.0
        for p in prompts:
            seq = np.random.SeedSequence(
                [self.noise_seed, p.x, p.y, int(p.foreground)]
            )
            total += float(np.random.Generator(np.random.PCG64(seq)).standard_normal())
        return self.noise_sigma * total / float(np.sqrt(len(prompts)))

    def segment(
        self, embedding: ImageEmbedding, prompts: Sequence[PointPrompt]
    ) -> SegmentationOutcome:
        prompts = _check_prompts(
            prompts, embedding.source_width, embedding.source_height
        )
        regions = embedding.payload
        foreground = [p for p in prompts if p.foreground]
        if foreground:
            valid = sum(
                1
                for p in foreground
                if int(self.semantic[p.y, p.x]) == self.target_class
            )
            raw = valid / len(foreground)
        else:
            raw = 1.0  # vacuously valid: no foreground prompt to contradict
        confidence = float(np.clip(raw + self._noise(prompts), 0.0, 1.0))

        hit = np.zeros(regions.num_objects + 1, dtype=bool)
        for p in foreground:
            hit[regions.labels[p.y, p.x]] = True
        hit[0] = False
        mask = hit[regions.labels]
        return SegmentationOutcome(mask=mask, confidence=confidence)
