"""Adapter over serialized encoder/decoder graph files.

Implements the same backend protocol as the mock against an
`encoder.onnx` / `decoder.onnx` pair following the public export
convention of the promptable-segmentation model family: the encoder
maps a preprocessed [1, 3, 1024, 1024] image to [1, 256, 64, 64]
embeddings; the decoder maps embeddings plus point prompts to candidate
mask logits (`masks`, thresholded at 0) and per-candidate scores
(`iou_predictions`). The highest-scoring candidate becomes the outcome
and its score, clamped to [0, 1], the confidence.

onnxruntime is imported lazily; a missing dependency or model file
surfaces as a BackendError.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import BackendError
from .segmenter import (
    ImageEmbedding,
    PointPrompt,
    SegmentationOutcome,
    _check_image,
    _check_prompts,
)

TARGET_SIDE = 1024
EMBEDDING_SHAPE = (1, 256, 64, 64)
MASK_INPUT_SHAPE = (1, 1, 256, 256)
PIXEL_MEAN = np.array([123.675, 116.28, 103.53], dtype=np.float32)
PIXEL_STD = np.array([58.395, 57.12, 57.375], dtype=np.float32)


def resize_scale(height: int, width: int) -> float:
    """Factor that maps the longest image side onto TARGET_SIDE."""
    return TARGET_SIDE / max(height, width)


def preprocess_image(image: np.ndarray) -> tuple[np.ndarray, float]:
    """Resize, normalize, and pad an RGB image to the encoder tensor.

    The longest side is scaled to TARGET_SIDE with bilinear resampling,
    channels are normalized with the fixed per-channel mean/std, and the
    result is zero-padded bottom/right to TARGET_SIDE x TARGET_SIDE.
    Returns the [1, 3, 1024, 1024] float32 tensor and the scale factor
    that must also be applied to prompt coordinates.
    """
    arr = _check_image(image).astype(np.uint8, copy=False)
    h, w = arr.shape[:2]
    scale = resize_scale(h, w)
    new_h = int(h * scale + 0.5)
    new_w = int(w * scale + 0.5)
    resized = np.asarray(
        Image.fromarray(arr, mode="RGB").resize((new_w, new_h), Image.BILINEAR),
        dtype=np.float32,
    )
    normalized = (resized - PIXEL_MEAN) / PIXEL_STD
    padded = np.zeros((TARGET_SIDE, TARGET_SIDE, 3), dtype=np.float32)
    padded[:new_h, :new_w] = normalized
    return padded.transpose(2, 0, 1)[np.newaxis], scale


def prompt_tensors(
    prompts: list[PointPrompt], scale: float
) -> tuple[np.ndarray, np.ndarray]:
    """Decoder `point_coords` / `point_labels` tensors in resized coordinates."""
    coords = np.array(
        [[[p.x * scale, p.y * scale] for p in prompts]], dtype=np.float32
    )
    labels = np.array(
        [[1.0 if p.foreground else 0.0 for p in prompts]], dtype=np.float32
    )
    return coords, labels


def _load_session(path: str):
    """Create an inference session; separated out so tests can fake it."""
    if not os.path.isfile(path):
        raise BackendError(f"model file not found: {path}")
    try:
        import onnxruntime
    except ImportError as exc:
        raise BackendError(
            f"onnxruntime is required for the onnx backend but is not installed: {exc}"
        ) from exc
    try:
        return onnxruntime.InferenceSession(
            path, providers=["CPUExecutionProvider"]
        )
    except Exception as exc:
        raise BackendError(f"failed to load model {path}: {exc}") from exc


class OnnxSegmenter:
    backend_id = "onnx"

    def __init__(self, encoder_path: str, decoder_path: str):
        self._encoder = _load_session(encoder_path)
        self._decoder = _load_session(decoder_path)

    def embed(self, image: np.ndarray) -> ImageEmbedding:
        arr = _check_image(image)
        h, w = arr.shape[:2]
        tensor, scale = preprocess_image(arr)
        try:
            (embeddings,) = self._encoder.run(None, {"image": tensor})
        except Exception as exc:
            raise BackendError(f"encoder inference failed: {exc}") from exc
        embeddings = np.asarray(embeddings, dtype=np.float32)
        if embeddings.shape != EMBEDDING_SHAPE:
            raise BackendError(
                f"encoder produced embeddings of shape {embeddings.shape}, "
                f"expected {EMBEDDING_SHAPE}"
            )
        return ImageEmbedding(
            payload={"embeddings": embeddings, "scale": scale},
            source_width=w,
            source_height=h,
            backend_id=self.backend_id,
        )

    def segment(
        self, embedding: ImageEmbedding, prompts
    ) -> SegmentationOutcome:
        prompts = _check_prompts(
            prompts, embedding.source_width, embedding.source_height
        )
        coords, labels = prompt_tensors(prompts, embedding.payload["scale"])
        feeds = {
            "image_embeddings": embedding.payload["embeddings"],
            "point_coords": coords,
            "point_labels": labels,
            "mask_input": np.zeros(MASK_INPUT_SHAPE, dtype=np.float32),
            "has_mask_input": np.zeros(1, dtype=np.float32),
            "orig_im_size": np.array(
                [embedding.source_height, embedding.source_width], dtype=np.float32
            ),
        }
        try:
            outputs = self._decoder.run(["masks", "iou_predictions"], feeds)
        except Exception as exc:
            raise BackendError(f"decoder inference failed: {exc}") from exc
        mask_logits = np.asarray(outputs[0], dtype=np.float32)
        scores = np.asarray(outputs[1], dtype=np.float32).reshape(-1)
        if scores.size == 0 or mask_logits.ndim != 4:
            raise BackendError(
                f"decoder returned masks {mask_logits.shape} / scores {scores.shape}"
            )
        best = int(np.argmax(scores))  # first maximum: deterministic
        mask = mask_logits[0, best] > 0
        expected = (embedding.source_height, embedding.source_width)
        if mask.shape != expected:
            raise BackendError(
                f"decoder mask shape {mask.shape} does not match image {expected}"
            )
        confidence = float(np.clip(scores[best], 0.0, 1.0))
        return SegmentationOutcome(mask=mask, confidence=confidence)


def open_model_dir(model_dir: str) -> OnnxSegmenter:
    """Open the `encoder.onnx` / `decoder.onnx` pair inside a directory."""
    if not os.path.isdir(model_dir):
        raise BackendError(f"model directory not found: {model_dir}")
    return OnnxSegmenter(
        os.path.join(model_dir, "encoder.onnx"),
        os.path.join(model_dir, "decoder.onnx"),
    )
