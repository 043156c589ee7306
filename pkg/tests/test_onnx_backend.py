"""Graph-backend adapter: preprocessing math and session plumbing.

The inference plumbing is exercised against fake sessions so the
adapter's tensor contract is verified without onnxruntime; tests that
need the real runtime are skipped when it is unavailable.
"""

import importlib.util

import numpy as np
import pytest

from promptcd import onnx_backend
from promptcd.errors import BackendError, InputError
from promptcd.onnx_backend import (
    EMBEDDING_SHAPE,
    MASK_INPUT_SHAPE,
    PIXEL_MEAN,
    PIXEL_STD,
    TARGET_SIDE,
    OnnxSegmenter,
    preprocess_image,
    prompt_tensors,
    resize_scale,
)
from promptcd.segmenter import PointPrompt

HAVE_ONNXRUNTIME = importlib.util.find_spec("onnxruntime") is not None


class TestPreprocess:
    def test_square_image_scales_to_target(self):
        image = np.full((512, 512, 3), 128, dtype=np.uint8)
        tensor, scale = preprocess_image(image)
        assert scale == 2.0
        assert tensor.shape == (1, 3, TARGET_SIDE, TARGET_SIDE)
        assert tensor.dtype == np.float32

    def test_constant_image_normalization_is_exact(self):
        image = np.full((1024, 1024, 3), 200, dtype=np.uint8)
        tensor, scale = preprocess_image(image)
        assert scale == 1.0
        expected = (200.0 - PIXEL_MEAN) / PIXEL_STD
        for channel in range(3):
            assert tensor[0, channel] == pytest.approx(expected[channel])

    def test_nonsquare_padded_bottom_right_with_zeros(self):
        image = np.full((100, 50, 3), 255, dtype=np.uint8)
        tensor, scale = preprocess_image(image)
        assert scale == TARGET_SIDE / 100
        new_w = int(50 * scale + 0.5)
        assert np.all(tensor[0, :, :, new_w:] == 0.0)
        assert np.any(tensor[0, :, :, : new_w] != 0.0)

    def test_prompt_coordinates_use_the_same_scale(self):
        coords, labels = prompt_tensors(
            [PointPrompt(10, 20), PointPrompt(5, 5, foreground=False)], scale=2.0
        )
        assert coords.shape == (1, 2, 2)
        assert coords.dtype == np.float32 and labels.dtype == np.float32
        assert coords[0, 0].tolist() == [20.0, 40.0]
        assert labels[0].tolist() == [1.0, 0.0]

    def test_resize_scale_uses_longest_side(self):
        assert resize_scale(2048, 512) == 0.5
        assert resize_scale(512, 2048) == 0.5


class FakeSession:
    """Stands in for an inference session; records the feeds it was given."""

    def __init__(self, outputs):
        self.outputs = outputs
        self.feeds = None

    def run(self, names, feeds):
        self.feeds = feeds
        return self.outputs


def fake_backend(monkeypatch, tmp_path, encoder_out=None, decoder_out=None, h=64, w=96):
    for name in ("encoder.onnx", "decoder.onnx"):
        (tmp_path / name).write_bytes(b"fake")
    if encoder_out is None:
        encoder_out = [np.zeros(EMBEDDING_SHAPE, dtype=np.float32)]
    if decoder_out is None:
        logits = np.full((1, 3, h, w), -1.0, dtype=np.float32)
        logits[0, 1, 10:20, 10:30] = 5.0  # candidate 1 segments a block
        scores = np.array([[0.3, 0.9, 0.5]], dtype=np.float32)
        decoder_out = [logits, scores]
    encoder = FakeSession(encoder_out)
    decoder = FakeSession(decoder_out)
    sessions = iter([encoder, decoder])
    monkeypatch.setattr(onnx_backend, "_load_session", lambda path: next(sessions))
    backend = OnnxSegmenter(str(tmp_path / "encoder.onnx"), str(tmp_path / "decoder.onnx"))
    return backend, encoder, decoder


class TestAdapterPlumbing:
    def test_embed_builds_contract_feeds(self, monkeypatch, tmp_path):
        backend, encoder, _ = fake_backend(monkeypatch, tmp_path)
        image = np.zeros((64, 96, 3), dtype=np.uint8)
        embedding = backend.embed(image)
        assert set(encoder.feeds) == {"image"}
        assert encoder.feeds["image"].shape == (1, 3, TARGET_SIDE, TARGET_SIDE)
        assert embedding.source_width == 96 and embedding.source_height == 64
        assert embedding.backend_id == "onnx"

    def test_segment_builds_contract_feeds(self, monkeypatch, tmp_path):
        backend, _, decoder = fake_backend(monkeypatch, tmp_path)
        embedding = backend.embed(np.zeros((64, 96, 3), dtype=np.uint8))
        outcome = backend.segment(embedding, [PointPrompt(4, 8), PointPrompt(40, 30)])
        feeds = decoder.feeds
        assert set(feeds) == {
            "image_embeddings", "point_coords", "point_labels",
            "mask_input", "has_mask_input", "orig_im_size",
        }
        assert feeds["image_embeddings"].shape == EMBEDDING_SHAPE
        assert feeds["point_coords"].shape == (1, 2, 2)
        assert feeds["point_labels"].shape == (1, 2)
        assert feeds["mask_input"].shape == MASK_INPUT_SHAPE
        assert feeds["has_mask_input"].tolist() == [0.0]
        assert feeds["orig_im_size"].tolist() == [64.0, 96.0]
        scale = TARGET_SIDE / 96
        assert feeds["point_coords"][0, 0].tolist() == pytest.approx(
            [4 * scale, 8 * scale]
        )

    def test_best_candidate_selected_and_thresholded(self, monkeypatch, tmp_path):
        backend, _, _ = fake_backend(monkeypatch, tmp_path)
        embedding = backend.embed(np.zeros((64, 96, 3), dtype=np.uint8))
        outcome = backend.segment(embedding, [PointPrompt(0, 0)])
        assert outcome.confidence == pytest.approx(0.9)  # candidate 1 wins
        assert outcome.mask.shape == (64, 96)
        assert outcome.mask[15, 20] and not outcome.mask[0, 0]

    def test_confidence_clamped_to_unit_interval(self, monkeypatch, tmp_path):
        logits = np.zeros((1, 1, 64, 96), dtype=np.float32)
        scores = np.array([[1.7]], dtype=np.float32)
        backend, _, _ = fake_backend(
            monkeypatch, tmp_path, decoder_out=[logits, scores]
        )
        embedding = backend.embed(np.zeros((64, 96, 3), dtype=np.uint8))
        assert backend.segment(embedding, [PointPrompt(0, 0)]).confidence == 1.0

    def test_bad_embedding_shape_is_backend_error(self, monkeypatch, tmp_path):
        backend, _, _ = fake_backend(
            monkeypatch, tmp_path,
            encoder_out=[np.zeros((1, 128, 64, 64), dtype=np.float32)],
        )
        with pytest.raises(BackendError, match="shape"):
            backend.embed(np.zeros((64, 96, 3), dtype=np.uint8))

    def test_mask_size_mismatch_is_backend_error(self, monkeypatch, tmp_path):
        logits = np.zeros((1, 1, 32, 32), dtype=np.float32)
        scores = np.array([[0.5]], dtype=np.float32)
        backend, _, _ = fake_backend(
            monkeypatch, tmp_path, decoder_out=[logits, scores]
        )
        embedding = backend.embed(np.zeros((64, 96, 3), dtype=np.uint8))
        with pytest.raises(BackendError, match="mask shape"):
            backend.segment(embedding, [PointPrompt(0, 0)])

    def test_prompt_validation_is_input_error(self, monkeypatch, tmp_path):
        backend, _, _ = fake_backend(monkeypatch, tmp_path)
        embedding = backend.embed(np.zeros((64, 96, 3), dtype=np.uint8))
        with pytest.raises(InputError):
            backend.segment(embedding, [])
        with pytest.raises(InputError):
            backend.segment(embedding, [PointPrompt(96, 0)])


class TestLoadErrors:
    def test_missing_model_file(self, tmp_path):
        with pytest.raises(BackendError, match="not found"):
            OnnxSegmenter(str(tmp_path / "encoder.onnx"), str(tmp_path / "decoder.onnx"))

    @pytest.mark.skipif(
        HAVE_ONNXRUNTIME, reason="onnxruntime installed; import failure not reproducible"
    )
    def test_missing_runtime_reported_as_backend_error(self, tmp_path):
        (tmp_path / "encoder.onnx").write_bytes(b"fake")
        (tmp_path / "decoder.onnx").write_bytes(b"fake")
        with pytest.raises(BackendError, match="onnxruntime"):
            OnnxSegmenter(str(tmp_path / "encoder.onnx"), str(tmp_path / "decoder.onnx"))
