"""Disappearance detection from a pre-change mask via prompt exclusion."""

from .detector import (
    ChangeReport,
    ConfidenceTable,
    DetectorConfig,
    ExclusionTrial,
    build_trials,
    detect_changes,
    identify_changed,
    render_change_map,
    score_trials,
)
from .errors import BackendError, GenerationError, InputError, PromptCDError
from .harness import Metrics, ScenePair, SceneSpec, generate_scene, load_scene, score
from .mask_ops import (
    LabeledMask,
    ObjectStats,
    PixelPoint,
    connected_components,
    interior_point_sample,
    object_stats,
)
from .rcva import otsu_threshold, rcva_magnitude
from .segmenter import (
    ImageEmbedding,
    MockSegmenter,
    PointPrompt,
    SegmentationOutcome,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "ChangeReport",
    "ConfidenceTable",
    "DetectorConfig",
    "ExclusionTrial",
    "GenerationError",
    "ImageEmbedding",
    "InputError",
    "LabeledMask",
    "Metrics",
    "MockSegmenter",
    "ObjectStats",
    "PixelPoint",
    "PointPrompt",
    "PromptCDError",
    "ScenePair",
    "SceneSpec",
    "SegmentationOutcome",
    "build_trials",
    "connected_components",
    "detect_changes",
    "generate_scene",
    "identify_changed",
    "interior_point_sample",
    "load_scene",
    "object_stats",
    "otsu_threshold",
    "rcva_magnitude",
    "render_change_map",
    "score",
    "score_trials",
    "__version__",
]
