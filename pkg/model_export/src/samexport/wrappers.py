"""Export-facing modules with the exact graph tensor contract.

EncoderExport: `image` [1, 3, 1024, 1024] float32 (already resized,
normalized, and padded by the caller) -> `image_embeddings`
[1, 256, 64, 64].

DecoderExport: `image_embeddings`, `point_coords` [1, L, 2] (x, y in
resized coordinates), `point_labels` [1, L] (1 foreground,
0 background), `mask_input` [1, 1, 256, 256], `has_mask_input` [1],
`orig_im_size` [2] (H, W) -> `masks` logits at original image size and
`iou_predictions` [1, M] candidate scores.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .model import Sam

ENCODER_INPUT_NAMES = ["image"]
ENCODER_OUTPUT_NAMES = ["image_embeddings"]
DECODER_INPUT_NAMES = [
    "image_embeddings",
    "point_coords",
    "point_labels",
    "mask_input",
    "has_mask_input",
    "orig_im_size",
]
DECODER_OUTPUT_NAMES = ["masks", "iou_predictions"]


class EncoderExport(nn.Module):
    def __init__(self, model: Sam):
        super().__init__()
        self.image_encoder = model.image_encoder

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return self.image_encoder(image)


class DecoderExport(nn.Module):
    def __init__(self, model: Sam):
        super().__init__()
        self.prompt_encoder = model.prompt_encoder
        self.mask_decoder = model.mask_decoder
        self.img_size = model.image_encoder.img_size

    def _embed_points(self, point_coords, point_labels):
        point_coords = point_coords + 0.5
        point_coords = point_coords / self.img_size
        point_embedding = self.prompt_encoder.pe_layer._pe_encoding(point_coords)
        point_labels = point_labels.unsqueeze(-1).expand_as(point_embedding)

        point_embedding = point_embedding * (point_labels != -1)
        point_embedding = point_embedding + self.prompt_encoder.not_a_point_embed.weight * (
            point_labels == -1
        )
        for i in range(self.prompt_encoder.num_point_embeddings):
            point_embedding = point_embedding + self.prompt_encoder.point_embeddings[
                i
            ].weight * (point_labels == i)
        return point_embedding

    def _embed_masks(self, input_mask, has_mask_input):
        mask_embedding = has_mask_input * self.prompt_encoder.mask_downscaling(input_mask)
        mask_embedding = mask_embedding + (
            1 - has_mask_input
        ) * self.prompt_encoder.no_mask_embed.weight.reshape(1, -1, 1, 1)
        return mask_embedding

    @staticmethod
    def _resize_longest(orig_im_size: torch.Tensor, longest_side: int) -> torch.Tensor:
        orig_im_size = orig_im_size.to(torch.float32)
        scale = longest_side / torch.max(orig_im_size)
        return torch.floor(scale * orig_im_size + 0.5).to(torch.int64)

    def _postprocess_masks(self, masks, orig_im_size):
        masks = F.interpolate(
            masks, size=(self.img_size, self.img_size), mode="bilinear", align_corners=False
        )
        prepadded = self._resize_longest(orig_im_size, self.img_size)
        masks = masks[..., : prepadded[0], : prepadded[1]]
        orig_im_size = orig_im_size.to(torch.int64)
        return F.interpolate(
            masks,
            size=(orig_im_size[0], orig_im_size[1]),
            mode="bilinear",
            align_corners=False,
        )

    def forward(
        self,
        image_embeddings: torch.Tensor,
        point_coords: torch.Tensor,
        point_labels: torch.Tensor,
        mask_input: torch.Tensor,
        has_mask_input: torch.Tensor,
        orig_im_size: torch.Tensor,
    ):
        sparse = self._embed_points(point_coords, point_labels)
        dense = self._embed_masks(mask_input, has_mask_input)
        masks, scores = self.mask_decoder.predict_masks(
            image_embeddings=image_embeddings,
            image_pe=self.prompt_encoder.get_dense_pe(),
            sparse_prompt_embeddings=sparse,
            dense_prompt_embeddings=dense,
        )
        masks = self._postprocess_masks(masks, orig_im_size)
        return masks, scores
