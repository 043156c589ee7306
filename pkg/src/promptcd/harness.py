"""Scene ingestion, synthetic scene generation, and evaluation metrics.

A scene directory holds `pre_mask.png`, `post.png`, and `ref_change.png`
(required) plus optional `pre.png`, `post_semantic.png`, and
`meta.json`. A corpus root holds `scenes/<scene_id>/...` and a
`corpus.json` listing scene ids with the generator settings that
produced them.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import raster
from .errors import GenerationError, InputError
from .mask_ops import connected_components
from .serialize import dumps_stable

REQUIRED_FILES = ("pre_mask.png", "post.png", "ref_change.png")
DEFAULT_TARGET_CLASS = 1
DISTRACTOR_CLASS = 2

# Minimum clearance between building rectangles so connectivity of the
# pre-change mask is never ambiguous.
_BUILDING_GAP = 3
_PLACEMENT_TRIES = 200


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    n_objects: int
    n_disappeared: int
    distractors: int = 0
    seed: int = 0
    min_size: int = 12
    max_size: int = 28

    def validate(self) -> None:
        if self.width < 64 or self.height < 64:
            raise InputError(
                f"scene dimensions must be >= 64, got {self.width}x{self.height}"
            )
        if self.n_objects < 0:
            raise InputError("object count must be >= 0")
        if not 0 <= self.n_disappeared <= self.n_objects:
            raise InputError(
                f"disappeared count {self.n_disappeared} must lie in "
                f"[0, {self.n_objects}]"
            )
        if self.distractors < 0:
            raise InputError("distractor count must be >= 0")
        if not 3 <= self.min_size <= self.max_size:
            raise InputError("building size range must satisfy 3 <= min <= max")
        if self.max_size + 2 * _BUILDING_GAP >= min(self.width, self.height):
            raise InputError("building size too large for scene dimensions")


@dataclass
class ScenePair:
    scene_id: str
    pre_mask: np.ndarray
    post_image: np.ndarray
    reference_change: np.ndarray
    pre_image: np.ndarray | None = None
    post_semantic: np.ndarray | None = None
    target_class: int = DEFAULT_TARGET_CLASS
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Metrics:
    pixel_iou: float
    precision: float
    recall: float
    f1: float
    object_accuracy: float | None = None


def score(predicted: np.ndarray, reference: np.ndarray) -> Metrics:
    """Pixel-level IoU / precision / recall / F1 on changed pixels.

    Both-empty maps count as a perfect match (IoU 1.0); an empty
    prediction against a nonempty reference scores zero precision.
    """
    p = np.asarray(predicted, dtype=bool)
    r = np.asarray(reference, dtype=bool)
    if p.shape != r.shape:
        raise InputError(f"map shapes differ: {p.shape} vs {r.shape}")
    tp = int(np.count_nonzero(p & r))
    fp = int(np.count_nonzero(p & ~r))
    fn = int(np.count_nonzero(~p & r))
    union = tp + fp + fn
    iou = 1.0 if union == 0 else tp / union
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if fn == 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Metrics(pixel_iou=iou, precision=precision, recall=recall, f1=f1)


def object_sets_match(predicted_labels, true_labels) -> bool:
    return set(predicted_labels) == set(true_labels)


def _inflate(box: tuple[int, int, int, int], margin: int) -> tuple[int, int, int, int]:
    x0, y0, x1, y1 = box
    return (x0 - margin, y0 - margin, x1 + margin, y1 + margin)


def _intersects(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _place_boxes(
    rng: np.random.Generator,
    count: int,
    width: int,
    height: int,
    min_size: int,
    max_size: int,
    keep_out: list[tuple[int, int, int, int]],
    gap: int,
    what: str,
) -> list[tuple[int, int, int, int]]:
    """Place non-overlapping axis-aligned boxes (half-open coordinates)."""
    boxes: list[tuple[int, int, int, int]] = []
    for index in range(count):
        for _ in range(_PLACEMENT_TRIES):
            w = int(rng.integers(min_size, max_size + 1))
            h = int(rng.integers(min_size, max_size + 1))
            x0 = int(rng.integers(gap, width - w - gap + 1))
            y0 = int(rng.integers(gap, height - h - gap + 1))
            box = (x0, y0, x0 + w, y0 + h)
            inflated = _inflate(box, gap)
            if any(_intersects(inflated, other) for other in keep_out):
                continue
            boxes.append(box)
            keep_out.append(box)
            break
        else:
            raise GenerationError(
                f"could not place {what} {index + 1}/{count} after "
                f"{_PLACEMENT_TRIES} tries"
            )
    return boxes


def generate_scene(spec: SceneSpec, scene_id: str = "scene") -> ScenePair:
    """Render a deterministic bi-temporal scene from a seeded spec.

    Buildings are non-overlapping rectangles at least 3 px apart on a
    textured background; disappeared buildings are replaced by the
    background texture in the post-change image; distractor patches
    shift colors in regions disjoint from every building. The semantic
    map labels surviving buildings with the target class.
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    h, w = spec.height, spec.width

    base = np.array([92, 104, 84], dtype=np.int16)
    background = np.clip(
        base + rng.integers(-14, 15, size=(h, w, 3)), 0, 255
    ).astype(np.uint8)

    keep_out: list[tuple[int, int, int, int]] = []
    buildings = _place_boxes(
        rng, spec.n_objects, w, h, spec.min_size, spec.max_size,
        keep_out, _BUILDING_GAP, "building",
    )

    patches = []
    for x0, y0, x1, y1 in buildings:
        tone = int(rng.integers(150, 221))
        color = np.array([tone, tone - 6, tone - 12], dtype=np.int16)
        patch = np.clip(
            color + rng.integers(-6, 7, size=(y1 - y0, x1 - x0, 3)), 0, 255
        ).astype(np.uint8)
        patches.append(patch)

    removed = set(
        int(i) for i in rng.choice(spec.n_objects, size=spec.n_disappeared, replace=False)
    ) if spec.n_disappeared else set()

    pre_image = background.copy()
    post_image = background.copy()
    pre_mask = np.zeros((h, w), dtype=bool)
    reference = np.zeros((h, w), dtype=bool)
    semantic = np.zeros((h, w), dtype=np.uint8)
    for index, ((x0, y0, x1, y1), patch) in enumerate(zip(buildings, patches)):
        pre_image[y0:y1, x0:x1] = patch
        pre_mask[y0:y1, x0:x1] = True
        if index in removed:
            reference[y0:y1, x0:x1] = True
        else:
            post_image[y0:y1, x0:x1] = patch
            semantic[y0:y1, x0:x1] = DEFAULT_TARGET_CLASS

    distractor_keep_out = [_inflate(b, 1) for b in buildings]
    distractor_boxes = _place_boxes(
        rng, spec.distractors, w, h, 10, 26, distractor_keep_out, 0, "distractor",
    )
    shift_base = np.array([-58, 82, -52], dtype=np.int16)
    for x0, y0, x1, y1 in distractor_boxes:
        shift = shift_base + rng.integers(-8, 9, size=3).astype(np.int16)
        region = post_image[y0:y1, x0:x1].astype(np.int16)
        post_image[y0:y1, x0:x1] = np.clip(region + shift, 0, 255).astype(np.uint8)
        semantic[y0:y1, x0:x1] = DISTRACTOR_CLASS

    labeled = connected_components(pre_mask, 8)
    disappeared_labels = sorted(
        int(labeled.labels[buildings[i][1], buildings[i][0]]) for i in removed
    )
    meta = {
        "scene_id": scene_id,
        "n_objects": spec.n_objects,
        "n_disappeared": spec.n_disappeared,
        "disappeared_labels": disappeared_labels,
        "building_boxes": [list(b) for b in buildings],
        "distractor_boxes": [list(b) for b in distractor_boxes],
        "target_class": DEFAULT_TARGET_CLASS,
        "generator": asdict(spec),
    }
    return ScenePair(
        scene_id=scene_id,
        pre_mask=pre_mask,
        post_image=post_image,
        reference_change=reference,
        pre_image=pre_image,
        post_semantic=semantic,
        target_class=DEFAULT_TARGET_CLASS,
        meta=meta,
    )


def save_scene(pair: ScenePair, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    raster.save_mask(os.path.join(directory, "pre_mask.png"), pair.pre_mask)
    raster.save_rgb(os.path.join(directory, "post.png"), pair.post_image)
    raster.save_mask(os.path.join(directory, "ref_change.png"), pair.reference_change)
    if pair.pre_image is not None:
        raster.save_rgb(os.path.join(directory, "pre.png"), pair.pre_image)
    if pair.post_semantic is not None:
        raster.save_semantic(
            os.path.join(directory, "post_semantic.png"), pair.post_semantic
        )
    meta = dict(pair.meta)
    meta.setdefault("target_class", pair.target_class)
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps_stable(meta) + "\n")


def load_scene(directory: str) -> ScenePair:
    """Load a scene directory; optional files may be absent."""
    if not os.path.isdir(directory):
        raise InputError(f"scene directory not found: {directory}")
    for name in REQUIRED_FILES:
        if not os.path.isfile(os.path.join(directory, name)):
            raise InputError(f"missing required scene file: {os.path.join(directory, name)}")
    post_image = raster.load_rgb(os.path.join(directory, "post.png"))
    shape = post_image.shape[:2]

    def check(name: str, arr: np.ndarray) -> np.ndarray:
        if arr.shape[:2] != shape:
            raise InputError(
                f"{os.path.join(directory, name)}: dimensions {arr.shape[:2]} do not "
                f"match post.png {shape}"
            )
        return arr

    pre_mask = check("pre_mask.png", raster.load_mask(os.path.join(directory, "pre_mask.png")))
    reference = check("ref_change.png", raster.load_mask(os.path.join(directory, "ref_change.png")))
    pre_image = None
    if os.path.isfile(os.path.join(directory, "pre.png")):
        pre_image = check("pre.png", raster.load_rgb(os.path.join(directory, "pre.png")))
    semantic = None
    if os.path.isfile(os.path.join(directory, "post_semantic.png")):
        semantic = check(
            "post_semantic.png",
            raster.load_semantic(os.path.join(directory, "post_semantic.png")),
        )
    meta: dict = {}
    meta_path = os.path.join(directory, "meta.json")
    if os.path.isfile(meta_path):
        try:
            with open(meta_path, encoding="utf-8") as fh:
                meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{meta_path}: invalid JSON ({exc})") from exc
    return ScenePair(
        scene_id=meta.get("scene_id", os.path.basename(os.path.normpath(directory))),
        pre_mask=pre_mask,
        post_image=post_image,
        reference_change=reference,
        pre_image=pre_image,
        post_semantic=semantic,
        target_class=int(meta.get("target_class", DEFAULT_TARGET_CLASS)),
        meta=meta,
    )


def derive_masks(directory: str, class_id: int) -> None:
    """Derive pre_mask.png and ref_change.png from per-date semantic maps.

    Expects `pre_semantic.png` and `post_semantic.png` in the scene
    directory; pixels equal to `class_id` are the objects of interest.
    The reference change marks pixels that left the class between dates.
    Records the class id as the mock backend's target class in meta.json.
    """
    pre_path = os.path.join(directory, "pre_semantic.png")
    post_path = os.path.join(directory, "post_semantic.png")
    pre = raster.load_semantic(pre_path)
    post = raster.load_semantic(post_path)
    if pre.shape != post.shape:
        raise InputError(
            f"{pre_path}: dimensions {pre.shape} do not match post_semantic.png {post.shape}"
        )
    pre_mask = pre == class_id
    raster.save_mask(os.path.join(directory, "pre_mask.png"), pre_mask)
    raster.save_mask(
        os.path.join(directory, "ref_change.png"), pre_mask & (post != class_id)
    )
    meta_path = os.path.join(directory, "meta.json")
    meta: dict = {}
    if os.path.isfile(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    meta["target_class"] = int(class_id)
    meta["derived_from_class_id"] = int(class_id)
    with open(meta_path, "w", encoding="utf-8") as fh:
        fh.write(dumps_stable(meta) + "\n")


def write_corpus(root: str, scenes: list[ScenePair], generator_echo: dict) -> None:
    os.makedirs(os.path.join(root, "scenes"), exist_ok=True)
    for pair in scenes:
        save_scene(pair, os.path.join(root, "scenes", pair.scene_id))
    payload = {
        "scenes": [pair.scene_id for pair in scenes],
        "generator": generator_echo,
    }
    with open(os.path.join(root, "corpus.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps_stable(payload) + "\n")


def read_corpus(root: str) -> list[str]:
    """Scene ids listed in corpus.json, sorted for stable processing order."""
    path = os.path.join(root, "corpus.json")
    if not os.path.isfile(path):
        raise InputError(f"corpus index not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
    scenes = payload.get("scenes", [])
    if not scenes:
        raise InputError(f"{path}: corpus lists no scenes")
    return sorted(str(s) for s in scenes)
