"""Model variant registry and checkpoint handling.

The published base/large/huge variants differ only in the image
encoder; the prompt encoder and mask decoder are identical across
variants. `test-tiny` is an unpublished development variant that keeps
the contract-facing geometry (1024 input, 64x64x256 embeddings) while
shrinking the encoder transformer enough for fast tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ExportError
from .model import ImageEncoderViT, MaskDecoder, PromptEncoder, Sam


@dataclass(frozen=True)
class EncoderArch:
    embed_dim: int
    depth: int
    num_heads: int
    global_attn_indexes: tuple[int, ...]
    window_size: int = 14


VARIANTS = {
    "vit_b": EncoderArch(768, 12, 12, (2, 5, 8, 11)),
    "vit_l": EncoderArch(1024, 24, 16, (5, 11, 17, 23)),
    "vit_h": EncoderArch(1280, 32, 16, (7, 15, 23, 31)),
    "test-tiny": EncoderArch(64, 2, 2, (1,), window_size=16),
}

DEFAULT_VARIANT = "vit_b"  # smallest published variant

IMAGE_SIZE = 1024
PATCH_SIZE = 16
EMBED_CHANNELS = 256


def build_model(variant: str) -> Sam:
    if variant not in VARIANTS:
        raise ExportError(
            f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}"
        )
    arch = VARIANTS[variant]
    side = IMAGE_SIZE // PATCH_SIZE
    encoder = ImageEncoderViT(
        img_size=IMAGE_SIZE,
        patch_size=PATCH_SIZE,
        embed_dim=arch.embed_dim,
        depth=arch.depth,
        num_heads=arch.num_heads,
        out_chans=EMBED_CHANNELS,
        window_size=arch.window_size,
        global_attn_indexes=arch.global_attn_indexes,
    )
    prompt_encoder = PromptEncoder(
        embed_dim=EMBED_CHANNELS,
        image_embedding_size=(side, side),
        input_image_size=(IMAGE_SIZE, IMAGE_SIZE),
    )
    model = Sam(encoder, prompt_encoder, MaskDecoder(transformer_dim=EMBED_CHANNELS))
    model.eval()
    return model


def load_checkpoint(variant: str, path: str) -> Sam:
    """Build a variant and load a released-format state dict into it."""
    model = build_model(variant)
    try:
        state_dict = torch.load(path, map_location="cpu")
    except Exception as exc:
        raise ExportError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(state_dict, dict):
        raise ExportError(f"checkpoint {path} does not contain a state dict")
    try:
        model.load_state_dict(state_dict, strict=True)
    except Exception as exc:
        raise ExportError(
            f"checkpoint {path} does not match variant {variant!r}: {exc}"
        ) from exc
    return model


def save_checkpoint(model: Sam, path: str) -> None:
    torch.save(model.state_dict(), path)
