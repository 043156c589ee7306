"""Checkpoint to encoder.onnx / decoder.onnx conversion.

The emitted pair follows the tensor contract consumed by promptcd's
graph backend; the manifest records the checkpoint hash, exported
tensor names/shapes, opset, and the preprocessing constants the caller
must apply (which are fixed properties of the model family, not
choices). Nothing is written unless every artifact serializes: files
are staged under temporary names and renamed at the end, so a failed
export leaves no partial outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import warnings
from dataclasses import asdict, dataclass, field

import torch

from .errors import ExportError
from .variants import DEFAULT_VARIANT, IMAGE_SIZE, load_checkpoint
from .wrappers import (
    DECODER_INPUT_NAMES,
    DECODER_OUTPUT_NAMES,
    ENCODER_INPUT_NAMES,
    ENCODER_OUTPUT_NAMES,
    DecoderExport,
    EncoderExport,
)

DEFAULT_OPSET = 17
EMBEDDING_SHAPE = [1, 256, 64, 64]
MASK_INPUT_SHAPE = [1, 1, 256, 256]

# Must match the consumer's preprocessing bit for bit.
PREPROCESSING = {
    "target_side": IMAGE_SIZE,
    "resize": "bilinear, longest side to target",
    "pad": "zeros, bottom and right",
    "pixel_mean": [123.675, 116.28, 103.53],
    "pixel_std": [58.395, 57.12, 57.375],
    "prompt_coords": "multiplied by the resize scale factor",
}

ENCODER_TENSORS = {
    "inputs": [{"name": "image", "dtype": "float32", "shape": [1, 3, IMAGE_SIZE, IMAGE_SIZE]}],
    "outputs": [{"name": "image_embeddings", "dtype": "float32", "shape": EMBEDDING_SHAPE}],
}
DECODER_TENSORS = {
    "inputs": [
        {"name": "image_embeddings", "dtype": "float32", "shape": EMBEDDING_SHAPE},
        {"name": "point_coords", "dtype": "float32", "shape": [1, "num_points", 2]},
        {"name": "point_labels", "dtype": "float32", "shape": [1, "num_points"]},
        {"name": "mask_input", "dtype": "float32", "shape": MASK_INPUT_SHAPE},
        {"name": "has_mask_input", "dtype": "float32", "shape": [1]},
        {"name": "orig_im_size", "dtype": "float32", "shape": [2]},
    ],
    "outputs": [
        {"name": "masks", "dtype": "float32"},
        {"name": "iou_predictions", "dtype": "float32", "shape": [1, 4]},
    ],
}


@dataclass
class ExportManifest:
    checkpoint: str
    checkpoint_sha256: str
    variant: str
    opset: int
    files: dict = field(default_factory=dict)
    tensors: dict = field(default_factory=dict)
    preprocessing: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _export_graph(module, args, path, input_names, output_names, dynamic_axes, opset):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            torch.onnx.export(
                module,
                args,
                path,
                input_names=input_names,
                output_names=output_names,
                dynamic_axes=dynamic_axes,
                opset_version=opset,
                do_constant_folding=True,
                dynamo=False,
            )
    except Exception as exc:
        raise ExportError(f"graph serialization failed for {path}: {exc}") from exc


def export(
    checkpoint_path: str,
    out_dir: str,
    variant: str = DEFAULT_VARIANT,
    opset: int = DEFAULT_OPSET,
) -> ExportManifest:
    """Convert a checkpoint into encoder.onnx, decoder.onnx, manifest.json."""
    if not os.path.isfile(checkpoint_path):
        raise ExportError(f"checkpoint not found: {checkpoint_path}")
    model = load_checkpoint(variant, checkpoint_path)
    os.makedirs(out_dir, exist_ok=True)

    staged = {
        "encoder.onnx": os.path.join(out_dir, "encoder.onnx.partial"),
        "decoder.onnx": os.path.join(out_dir, "decoder.onnx.partial"),
        "manifest.json": os.path.join(out_dir, "manifest.json.partial"),
    }
    try:
        image = torch.zeros(1, 3, IMAGE_SIZE, IMAGE_SIZE, dtype=torch.float32)
        _export_graph(
            EncoderExport(model),
            (image,),
            staged["encoder.onnx"],
            ENCODER_INPUT_NAMES,
            ENCODER_OUTPUT_NAMES,
            dynamic_axes=None,
            opset=opset,
        )

        side = IMAGE_SIZE // model.image_encoder.patch_embed.proj.stride[0]
        decoder_args = (
            torch.zeros(1, 256, side, side, dtype=torch.float32),
            torch.tensor([[[320.0, 240.0], [640.0, 480.0]]], dtype=torch.float32),
            torch.tensor([[1.0, 0.0]], dtype=torch.float32),
            torch.zeros(1, 1, 256, 256, dtype=torch.float32),
            torch.zeros(1, dtype=torch.float32),
            torch.tensor([480.0, 640.0], dtype=torch.float32),
        )
        _export_graph(
            DecoderExport(model),
            decoder_args,
            staged["decoder.onnx"],
            DECODER_INPUT_NAMES,
            DECODER_OUTPUT_NAMES,
            dynamic_axes={
                "point_coords": {1: "num_points"},
                "point_labels": {1: "num_points"},
            },
            opset=opset,
        )

        manifest = ExportManifest(
            checkpoint=os.path.abspath(checkpoint_path),
            checkpoint_sha256=_sha256(checkpoint_path),
            variant=variant,
            opset=opset,
            files={name: os.path.join(os.path.abspath(out_dir), name) for name in
                   ("encoder.onnx", "decoder.onnx")},
            tensors={"encoder": ENCODER_TENSORS, "decoder": DECODER_TENSORS},
            preprocessing=dict(PREPROCESSING),
        )
        with open(staged["manifest.json"], "w", encoding="utf-8") as fh:
            fh.write(manifest.to_json())
    except Exception:
        for path in staged.values():
            if os.path.exists(path):
                os.remove(path)
        raise

    for name, tmp in staged.items():
        os.replace(tmp, os.path.join(out_dir, name))
    return manifest
