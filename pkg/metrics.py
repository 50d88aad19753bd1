"""Segmentation and tracking benchmark metrics."""
import logging
from typing import Optional, Sequence as Seq

import numpy as np

from errors import InputError
from models import Box, Sequence, SequenceResult, TrackedSequence
from schemas import FrameMetricsSchema, SequenceReportSchema, SuiteReportSchema
from tracker import mask_to_box

logger = logging.getLogger(__name__)

PRECISION_THRESHOLDS = np.arange(0, 51, 1, dtype=float)
OVERLAP_THRESHOLDS = np.linspace(0, 1, 21)
PRECISION_AT = 20


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """|a ∩ b| / |a ∪ b|; 1 when both masks are empty.

    Raises:
        InputError: masks of different shape
    """
    if a.shape != b.shape:
        raise InputError(f"Mask shapes differ: {a.shape} vs {b.shape}")
    a = a.astype(bool)
    b = b.astype(bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def box_iou(a: Optional[Box], b: Optional[Box]) -> float:
    """Overlap ratio of two (x, y, w, h) boxes; a missing box scores 0."""
    if a is None or b is None:
        return 0.0
    rects = np.array([a, b], dtype=float)
    if np.any(rects[:, 2:] < 0):
        raise InputError(f"Box extents must be non-negative: {a}, {b}")
    x1 = rects[:, 0].max()
    y1 = rects[:, 1].max()
    x2 = (rects[:, 0] + rects[:, 2]).min()
    y2 = (rects[:, 1] + rects[:, 3]).min()
    intersection = max(x2 - x1, 0.0) * max(y2 - y1, 0.0)
    union = rects[0, 2] * rects[0, 3] + rects[1, 2] * rects[1, 3] - intersection
    return float(intersection / union) if union > 0 else 0.0


def box_center(box: Box) -> np.ndarray:
    x, y, w, h = box
    return np.array([x + w / 2, y + h / 2])


def center_distance(a: Optional[Box], b: Optional[Box]) -> float:
    """Euclidean distance of box centres; infinite when a box is missing."""
    if a is None or b is None:
        return float("inf")
    return float(np.linalg.norm(box_center(a) - box_center(b)))


def precision_curve(distances: Seq[float], thresholds: np.ndarray = PRECISION_THRESHOLDS) -> np.ndarray:
    """Fraction of frames with centre distance <= τ, for every τ."""
    distances = np.asarray(distances, dtype=float)
    if distances.size == 0:
        return np.zeros(len(thresholds))
    return np.mean(distances[:, None] <= thresholds[None, :], axis=0)


def success_curve_and_auc(
        ious: Seq[float],
        thresholds: np.ndarray = OVERLAP_THRESHOLDS,
) -> tuple[np.ndarray, float]:
    """Fraction of frames with IoU > θ per threshold, and its mean as AUC."""
    ious = np.asarray(ious, dtype=float)
    if ious.size == 0:
        curve = np.zeros(len(thresholds))
    else:
        curve = np.mean(ious[:, None] > thresholds[None, :], axis=0)
    return curve, float(np.mean(curve))


def _precision_at(curve: np.ndarray, thresholds: np.ndarray = PRECISION_THRESHOLDS) -> float:
    return float(curve[int(np.flatnonzero(thresholds == PRECISION_AT)[0])])


def evaluate_sequence(result: SequenceResult) -> SequenceReportSchema:
    """Per-frame and summary metrics of one tracked sequence.

    Raises:
        InputError: lists of unequal length or mask shapes that differ
    """
    lengths = {len(result.frame_indices), len(result.pred_masks), len(result.pred_boxes),
               len(result.gt_masks), len(result.gt_boxes)}
    if len(lengths) != 1:
        raise InputError(f"Sequence {result.name}: prediction and ground-truth lists differ in length")

    frames = []
    for i, frame in enumerate(result.frame_indices):
        frames.append(FrameMetricsSchema(
            frame=frame,
            mask_iou=mask_iou(result.pred_masks[i], result.gt_masks[i]),
            box_iou=box_iou(result.pred_boxes[i], result.gt_boxes[i]),
            center_dist=center_distance(result.pred_boxes[i], result.gt_boxes[i]),
        ))

    precision = precision_curve([f.center_dist for f in frames])
    success_mask, auc_mask = success_curve_and_auc([f.mask_iou for f in frames])
    success_box, auc_box = success_curve_and_auc([f.box_iou for f in frames])
    report = SequenceReportSchema(
        name=result.name,
        frames=frames,
        mean_mask_iou=float(np.mean([f.mask_iou for f in frames])) if frames else 0.0,
        mean_box_iou=float(np.mean([f.box_iou for f in frames])) if frames else 0.0,
        precision_at_20=_precision_at(precision),
        auc_mask=auc_mask,
        auc_box=auc_box,
        precision_curve=precision.tolist(),
        success_curve_mask=success_mask.tolist(),
        success_curve_box=success_box.tolist(),
    )
    logger.info(
        "%s: mask IoU %.3f, box IoU %.3f, precision@20 %.3f",
        result.name, report.mean_mask_iou, report.mean_box_iou, report.precision_at_20,
    )
    return report


def aggregate(reports: list[SequenceReportSchema]) -> SuiteReportSchema:
    """Suite summary: means over sequences, curves pooled over all frames."""
    if not reports:
        raise InputError("Nothing to aggregate: no sequence reports")
    frames = [f for report in reports for f in report.frames]
    precision = precision_curve([f.center_dist for f in frames])
    success_mask, _ = success_curve_and_auc([f.mask_iou for f in frames])
    success_box, _ = success_curve_and_auc([f.box_iou for f in frames])
    return SuiteReportSchema(
        sequences=reports,
        mean_mask_iou=float(np.mean([r.mean_mask_iou for r in reports])),
        mean_box_iou=float(np.mean([r.mean_box_iou for r in reports])),
        precision_at_20=float(np.mean([r.precision_at_20 for r in reports])),
        auc_mask=float(np.mean([r.auc_mask for r in reports])),
        auc_box=float(np.mean([r.auc_box for r in reports])),
        precision_thresholds=PRECISION_THRESHOLDS.tolist(),
        overlap_thresholds=OVERLAP_THRESHOLDS.tolist(),
        precision_curve=precision.tolist(),
        success_curve_mask=success_mask.tolist(),
        success_curve_box=success_box.tolist(),
    )


def align_predictions(
        name: str,
        gt_masks: dict[int, np.ndarray],
        pred_masks: dict[int, np.ndarray],
        pred_boxes: Optional[dict[int, Optional[Box]]] = None,
) -> SequenceResult:
    """Pair every annotated frame with its prediction.

    Boxes default to the tight box of the predicted mask.

    Raises:
        InputError: an annotated frame has no predicted mask
    """
    frames = sorted(gt_masks)
    missing = [i for i in frames if i not in pred_masks]
    if missing:
        raise InputError(f"Sequence {name}: no prediction for annotated frame(s) {missing}")
    pred_boxes = pred_boxes or {}
    return SequenceResult(
        name=name,
        frame_indices=frames,
        pred_masks=[pred_masks[i] for i in frames],
        pred_boxes=[pred_boxes[i] if i in pred_boxes else mask_to_box(pred_masks[i]) for i in frames],
        gt_masks=[gt_masks[i] for i in frames],
        gt_boxes=[mask_to_box(gt_masks[i]) for i in frames],
    )


def evaluate_tracking(sequence: Sequence, tracked: TrackedSequence) -> SequenceReportSchema:
    gt_masks = {i: m for i, m in enumerate(sequence.masks) if m is not None}
    result = align_predictions(
        sequence.name,
        gt_masks,
        dict(enumerate(tracked.masks)),
        dict(enumerate(tracked.boxes)),
    )
    return evaluate_sequence(result)
