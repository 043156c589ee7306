"""Leave-one-out disappearance detection.

Each detection iteration samples points from every active object of the
pre-change mask, forms one reference prompt set (all objects) plus one
prompt set per object with that object's points left out, scores every
set against the post-change image through the segmentation backend, and
flags the object whose exclusion yields the highest confidence. Found
objects are removed from the active set and the process repeats, either
a fixed number of times or until no exclusion beats the reference
confidence by a margin delta (auto mode).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BackendError, InputError
from .mask_ops import LabeledMask, connected_components, interior_point_sample, object_stats
from .segmenter import ImageEmbedding, PointPrompt, Segmenter, SegmentationOutcome
from .serialize import dumps_stable

log = logging.getLogger(__name__)

REFERENCE_LABEL = 0
_ITERATION_SALT = 2654435761  # Knuth multiplicative-hash constant


@dataclass
class ExclusionTrial:
    """One prompt set with `excluded_label` left out (0 = reference)."""

    excluded_label: int
    prompts: list[PointPrompt]
    outcome: SegmentationOutcome | None = None

    @property
    def scorable(self) -> bool:
        return bool(self.prompts)


@dataclass(frozen=True)
class ConfidenceTable:
    """Per-trial confidences, ascending by excluded label (reference first)."""

    rows: tuple[tuple[int, float], ...]

    @property
    def reference_confidence(self) -> float:
        for label, confidence in self.rows:
            if label == REFERENCE_LABEL:
                return confidence
        raise InputError("confidence table has no reference row")

    def exclusion_rows(self) -> list[tuple[int, float]]:
        return [(l, c) for l, c in self.rows if l != REFERENCE_LABEL]


@dataclass(frozen=True)
class DetectorConfig:
    points_per_object: int = 3
    min_area: int = 20
    connectivity: int = 8
    delta: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.points_per_object < 1:
            raise InputError("points per object must be >= 1")
        if self.min_area < 1:
            raise InputError("min area must be >= 1 (1 disables filtering)")
        if self.connectivity not in (4, 8):
            raise InputError("connectivity must be 4 or 8")
        if self.delta < 0:
            raise InputError("delta must be >= 0")
        if self.seed < 0:
            raise InputError("seed must be >= 0")


@dataclass
class ChangeReport:
    changed_labels: list[int]
    margins: list[float]
    tables: list[ConfidenceTable]
    ignored_labels: list[int]
    seed: int
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "changed": list(self.changed_labels),
            "margins": list(self.margins),
            "iterations": [
                [
                    {"excluded": label, "confidence": confidence}
                    for label, confidence in table.rows
                ]
                for table in self.tables
            ],
            "ignored": list(self.ignored_labels),
            "seed": self.seed,
            "config": dict(self.config_echo),
        }

    def to_json(self) -> str:
        return dumps_stable(self.to_dict())


def build_trials(
    labeled: LabeledMask, active: set[int], k: int, seed: int
) -> list[ExclusionTrial]:
    """Reference trial plus one leave-one-out trial per active object.

    Points are sampled once per object with per-object seeds
    (seed XOR label), then shared across trials, so the trial excluding
    label L contains exactly the other objects' points.
    """
    if not active:
        raise InputError("active set must contain at least one label")
    order = sorted(active)
    samples = {
        label: interior_point_sample(labeled, label, k, seed ^ label)
        for label in order
    }

    def prompts_without(skip: int) -> list[PointPrompt]:
        return [
            PointPrompt(p.x, p.y, True)
            for label in order
            if label != skip
            for p in samples[label]
        ]

    trials = [ExclusionTrial(REFERENCE_LABEL, prompts_without(REFERENCE_LABEL))]
    trials.extend(ExclusionTrial(label, prompts_without(label)) for label in order)
    return trials


def score_trials(
    trials: list[ExclusionTrial], embedding: ImageEmbedding, backend: Segmenter
) -> ConfidenceTable:
    """Score every trial; empty-prompt trials get the reference confidence."""
    reference = next(
        (t for t in trials if t.excluded_label == REFERENCE_LABEL), None
    )
    if reference is None:
        raise InputError("trial list has no reference trial")

    def run(trial: ExclusionTrial) -> float:
        try:
            trial.outcome = backend.segment(embedding, trial.prompts)
        except BackendError as exc:
            raise BackendError(
                f"trial excluding label {trial.excluded_label}: {exc}",
                excluded_label=trial.excluded_label,
            ) from exc
        return trial.outcome.confidence

    reference_confidence = run(reference)
    rows = []
    for trial in trials:
        if trial is reference:
            confidence = reference_confidence
        elif trial.scorable:
            confidence = run(trial)
        else:
            confidence = reference_confidence  # neutral: cannot discriminate
        rows.append((trial.excluded_label, confidence))
    rows.sort(key=lambda row: row[0])
    return ConfidenceTable(rows=tuple(rows))


def identify_changed(
    table: ConfidenceTable, min_margin: float | None = None
) -> tuple[int | None, float]:
    """Pick the exclusion with maximal confidence (ties: lowest label).

    With `min_margin` set (auto mode), returns (None, margin) unless the
    best exclusion beats the reference confidence by at least that much.
    The returned margin is best minus second-best exclusion confidence,
    or best minus reference when only one exclusion row exists.
    """
    rows = table.exclusion_rows()
    if not rows:
        raise InputError("confidence table has no exclusion rows")
    best_label, best_conf = max(rows, key=lambda row: (row[1], -row[0]))
    others = [c for l, c in rows if l != best_label]
    runner_up = max(others) if others else table.reference_confidence
    margin = max(0.0, best_conf - runner_up)
    if min_margin is not None and best_conf - table.reference_confidence < min_margin:
        return None, margin
    return best_label, margin


def _iteration_seed(seed: int, iteration: int) -> int:
    return seed ^ (iteration * _ITERATION_SALT)


def detect_changes(
    mask: np.ndarray,
    post_image: np.ndarray,
    backend: Segmenter,
    num_changed: int | None,
    config: DetectorConfig = DetectorConfig(),
) -> tuple[ChangeReport, LabeledMask]:
    """Run the full detection pipeline over a pre-change mask.

    `num_changed` fixes the number of detections; None selects auto mode,
    which stops once no exclusion beats the reference by config.delta.
    Returns the report plus the labeled pre-change mask (needed to render
    the change map).
    """
    config.validate()
    if num_changed is not None and num_changed < 0:
        raise InputError(f"expected change count must be >= 0, got {num_changed}")
    post = np.asarray(post_image)
    labeled = connected_components(mask, config.connectivity)
    if post.ndim != 3 or post.shape[:2] != labeled.labels.shape:
        raise InputError(
            f"post-change image shape {post.shape} does not match mask "
            f"{labeled.labels.shape}"
        )

    stats = object_stats(labeled)
    ignored = [s.label for s in stats if s.area < config.min_area]
    active = {s.label for s in stats if s.area >= config.min_area}

    mode = "fixed" if num_changed is not None else "auto"
    echo = {
        "backend": backend.backend_id,
        "points_per_object": config.points_per_object,
        "min_area": config.min_area,
        "connectivity": config.connectivity,
        "mode": mode,
        "num_changed": num_changed,
        "delta": config.delta,
        "aggregation": "single-call",
        "seed": config.seed,
    }
    report = ChangeReport(
        changed_labels=[],
        margins=[],
        tables=[],
        ignored_labels=sorted(ignored),
        seed=config.seed,
        config_echo=echo,
    )
    if not active:
        log.warning(
            "no detectable objects in pre-change mask (%d found, %d below min_area)",
            labeled.num_objects,
            len(ignored),
        )
        return report, labeled

    embedding = backend.embed(post)
    iteration = 0
    while active:
        trials = build_trials(
            labeled,
            active,
            config.points_per_object,
            _iteration_seed(config.seed, iteration),
        )
        table = score_trials(trials, embedding, backend)
        report.tables.append(table)
        iteration += 1

        if mode == "fixed":
            if len(report.changed_labels) >= num_changed:
                break  # num_changed == 0: one diagnostic table, no detection
            label, margin = identify_changed(table, min_margin=None)
        elif len(active) == 1:
            # Degenerate single-object case: the exclusion trial is empty,
            # so fall back to thresholding the reference confidence.
            if table.reference_confidence >= 1.0 - config.delta:
                break
            label, margin = identify_changed(table, min_margin=None)
        else:
            label, margin = identify_changed(table, min_margin=config.delta)
            if label is None:
                break

        report.changed_labels.append(label)
        report.margins.append(margin)
        active.remove(label)
        if mode == "fixed" and len(report.changed_labels) >= num_changed:
            break
    return report, labeled


def render_change_map(report: ChangeReport, labeled: LabeledMask) -> np.ndarray:
    """Bool map that is True exactly on the pre-change pixels of changed objects."""
    for label in report.changed_labels:
        if not 1 <= label <= labeled.num_objects:
            raise InputError(f"report references unknown label {label}")
    selected = np.zeros(labeled.num_objects + 1, dtype=bool)
    selected[list(report.changed_labels)] = True
    selected[REFERENCE_LABEL] = False
    return selected[labeled.labels]
