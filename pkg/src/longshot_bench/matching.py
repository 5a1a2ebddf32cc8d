"""Box overlap and detection-to-ground-truth assignment.

Assignment is greedy: detections are visited in descending confidence (file
order on ties) and each takes the still-unmatched ground-truth box it overlaps
most, provided the overlap reaches the IoU threshold. Equal overlaps go to the
lowest ground-truth index. Classes never match across each other.

:func:`match_frame` is the per-frame reference; :func:`greedy_match_batched`
runs the same rule for many frames and many thresholds at once with numpy and
is what the evaluator uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .annotation_io import (
    Detection,
    GroundTruthObject,
    PixelBox,
    boxes_to_xyxy,
)
from .exceptions import MixedClasses


def iou(a: PixelBox, b: PixelBox) -> float:
    """Intersection over union of two axis-aligned boxes (0 when disjoint)."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU of ``(N, 4)`` and ``(M, 4)`` xyxy arrays, shape ``(N, M)``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    return _iou_broadcast(a[:, None, :], b[None, :, :])


def _iou_broadcast(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    iw = np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0])
    ih = np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(inter > 0.0, inter / union, 0.0)
    return out


@dataclass(frozen=True)
class MatchOutcome:
    """Result of matching one frame's detections of one class.

    ``order`` lists input detection indices in the order they were visited
    (descending confidence); ``is_tp``, ``matched_gt`` and ``confidences``
    follow that order. ``matched_gt`` is -1 for false positives.
    """

    order: np.ndarray
    confidences: np.ndarray
    is_tp: np.ndarray
    matched_gt: np.ndarray
    n_gt: int
    iou_threshold: float

    @property
    def tp_count(self) -> int:
        return int(self.is_tp.sum())

    @property
    def fp_count(self) -> int:
        return int(self.is_tp.size - self.is_tp.sum())

    @property
    def fn_count(self) -> int:
        return self.n_gt - self.tp_count

    def counts(self) -> "ConfusionCounts":
        return ConfusionCounts(self.tp_count, self.fp_count, self.fn_count)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        # 0 rather than NaN when nothing was predicted
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0


def confidence_order(confidences) -> np.ndarray:
    """Indices sorting by descending confidence, stable on ties."""
    conf = np.asarray(confidences, dtype=np.float64)
    return np.argsort(-conf, kind="stable")


def _single_label(items, what: str):
    labels = {int(x.label) for x in items}
    if len(labels) > 1:
        raise MixedClasses(f"{what} mix classes {sorted(labels)}")
    return labels.pop() if labels else None


def match_frame(
    detections: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    image_width: float,
    image_height: float,
    iou_threshold: float,
) -> MatchOutcome:
    """Greedy IoU assignment of one class's detections to its ground truth."""
    if not (0.0 < iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must lie in (0, 1], got {iou_threshold}")
    det_label = _single_label(detections, "detections")
    gt_label = _single_label(gts, "ground-truth objects")
    if det_label is not None and gt_label is not None and det_label != gt_label:
        raise MixedClasses(f"detections of class {det_label} vs ground truth of class {gt_label}")

    scale = np.array([image_width, image_height, image_width, image_height], dtype=np.float64)
    det_xyxy = boxes_to_xyxy([d.box for d in detections]) * scale
    gt_xyxy = boxes_to_xyxy([g.box for g in gts]) * scale
    ious = iou_matrix(det_xyxy, gt_xyxy)

    conf = np.array([d.confidence for d in detections], dtype=np.float64)
    order = confidence_order(conf)
    matched = np.zeros(len(gts), dtype=bool)
    is_tp = np.zeros(len(order), dtype=bool)
    matched_gt = np.full(len(order), -1, dtype=np.int64)
    for rank, d in enumerate(order):
        best, best_iou = -1, -1.0
        for g in range(len(gts)):
            if not matched[g] and ious[d, g] > best_iou:
                best, best_iou = g, ious[d, g]
        if best >= 0 and best_iou >= iou_threshold:
            matched[best] = True
            is_tp[rank] = True
            matched_gt[rank] = best
    return MatchOutcome(
        order=order,
        confidences=conf[order],
        is_tp=is_tp,
        matched_gt=matched_gt,
        n_gt=len(gts),
        iou_threshold=float(iou_threshold),
    )


def greedy_match_batched(
    det_xyxy: np.ndarray,
    gt_xyxy: np.ndarray,
    thresholds: np.ndarray,
) -> np.ndarray:
    """Greedy matching for a padded batch of frames at several thresholds.

    Parameters
    ----------
    det_xyxy : (F, D, 4) array
        Detections per frame, already in visiting order. Padding rows are NaN.
    gt_xyxy : (F, G, 4) array
        Ground truth per frame; padding rows are NaN.
    thresholds : (T,) array

    Returns
    -------
    (T, F, D) bool array of true-positive flags.
    """
    n_frames, n_det = det_xyxy.shape[:2]
    n_gt = gt_xyxy.shape[1]
    thresholds = np.asarray(thresholds, dtype=np.float64)
    tp = np.zeros((thresholds.size, n_frames, n_det), dtype=bool)
    if n_det == 0 or n_gt == 0 or n_frames == 0:
        return tp
    ious = _iou_broadcast(det_xyxy[:, :, None, :], gt_xyxy[:, None, :, :])
    # only ground truth overlapping at least the loosest threshold can ever be
    # matched; keep those as a short candidate list per detection, in ground
    # truth index order so that argmax ties resolve to the lowest index
    usable = ious >= thresholds.min()
    n_cand = int(usable.sum(axis=2).max())
    if n_cand == 0:
        return tp
    cand_gt = np.argsort(np.where(usable, np.arange(n_gt), n_gt), axis=2, kind="stable")[:, :, :n_cand]
    cand_iou = np.where(
        np.take_along_axis(usable, cand_gt, axis=2),
        np.take_along_axis(ious, cand_gt, axis=2),
        -1.0,
    )
    matched = np.zeros((thresholds.size, n_frames, n_gt), dtype=bool)
    t_idx = np.arange(thresholds.size)[:, None]
    f_idx = np.arange(n_frames)[None, :]
    f_col = np.arange(n_frames)[:, None]
    thr = thresholds[:, None]
    for k in range(n_det):
        gts = cand_gt[:, k, :]
        cand = np.where(matched[:, f_col, gts], -1.0, cand_iou[None, :, k, :])
        best = cand.argmax(axis=2)
        hit = np.take_along_axis(cand, best[..., None], axis=2)[..., 0] >= thr
        tp[:, :, k] = hit
        matched[t_idx, f_idx, gts[f_idx, best]] |= hit
    return tp


def ball_center_match(det_center, gt_center, radius: float) -> bool:
    """True iff the two points lie within ``radius`` pixels (inclusive)."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return math.hypot(det_center[0] - gt_center[0], det_center[1] - gt_center[1]) <= radius


def match_ball_centers(
    det_centers: Sequence[tuple[float, float]],
    gt_centers: Sequence[tuple[float, float]],
    radius: float,
) -> list[int]:
    """Greedy point-radius assignment.

    ``det_centers`` must already be in visiting order (descending
    confidence). Each detection takes the nearest unmatched ground-truth
    center within ``radius``. Returns the matched ground-truth index per
    detection, -1 for none.
    """
    matched = [False] * len(gt_centers)
    out = []
    for dc in det_centers:
        best, best_dist = -1, math.inf
        for g, gc in enumerate(gt_centers):
            if matched[g] or not ball_center_match(dc, gc, radius):
                continue
            dist = math.hypot(dc[0] - gc[0], dc[1] - gc[1])
            if dist < best_dist:
                best, best_dist = g, dist
        if best >= 0:
            matched[best] = True
        out.append(best)
    return out
