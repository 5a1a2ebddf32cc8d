"""Precision/recall curves, interpolated AP and the ball point metrics."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ._validation import check_detections, check_frames
from .annotation_io import ClassLabel, FrameAnnotations, FrameDetections, boxes_to_xyxy
from .exceptions import (
    ConfigError,
    InconsistentThreshold,
    MissingThresholdCurve,
    UnknownFrameId,
    ZeroGroundTruth,
)
from .matching import (
    ConfusionCounts,
    MatchOutcome,
    confidence_order,
    greedy_match_batched,
    match_ball_centers,
)

logger = logging.getLogger(__name__)

COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation settings.

    Recall grids are ``i / ap11_recall_steps`` and ``i / coco_recall_steps``
    for ``i = 0..steps``; membership tests against them are done in exact
    integer arithmetic.
    """

    iou_threshold_ap11: float = 0.5
    coco_iou_thresholds: tuple[float, ...] = COCO_IOU_THRESHOLDS
    ap11_recall_steps: int = 10
    coco_recall_steps: int = 100
    ball_radius_px: float = 5.0
    ball_confidence_threshold: float = 0.5
    coco: bool = True

    def __post_init__(self):
        object.__setattr__(self, "coco_iou_thresholds", tuple(float(t) for t in self.coco_iou_thresholds))
        thr = self.coco_iou_thresholds
        if list(thr) != sorted(thr) or not thr:
            raise ConfigError("coco_iou_thresholds must be non-empty and sorted ascending")
        for t in (self.iou_threshold_ap11, *thr):
            if not (0.0 < t <= 1.0):
                raise ConfigError(f"IoU threshold {t} outside (0, 1]")
        if self.ap11_recall_steps < 1 or self.coco_recall_steps < 1:
            raise ConfigError("recall grids need at least one step")
        if not (self.ball_radius_px > 0):
            raise ConfigError(f"ball_radius_px must be positive, got {self.ball_radius_px}")
        if not (0.0 <= self.ball_confidence_threshold <= 1.0):
            raise ConfigError("ball_conf_threshold must lie in [0, 1]")

    @property
    def ap11_recall_points(self) -> np.ndarray:
        return np.arange(self.ap11_recall_steps + 1) / self.ap11_recall_steps

    @property
    def coco_recall_points(self) -> np.ndarray:
        return np.arange(self.coco_recall_steps + 1) / self.coco_recall_steps

    # -- key=value config files --------------------------------------------

    # config-file key -> field name
    FILE_KEYS = {
        "iou_threshold": "iou_threshold_ap11",
        "ball_radius_px": "ball_radius_px",
        "ball_conf_threshold": "ball_confidence_threshold",
        "coco": "coco",
    }

    @classmethod
    def from_mapping(cls, values: Mapping[str, object], base: "EvalConfig | None" = None) -> "EvalConfig":
        base = base or cls()
        changes = {}
        for key, raw in values.items():
            name = cls.FILE_KEYS.get(key)
            if name is None:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                changes[name] = _coerce(name, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
        return replace(base, **changes)

    @classmethod
    def from_file(cls, path, base: "EvalConfig | None" = None) -> "EvalConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        values = {}
        for number, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}: line {number}: expected key=value")
            values[key.strip()] = value.strip()
        try:
            return cls.from_mapping(values, base)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coco_iou_thresholds"] = list(self.coco_iou_thresholds)
        return d


def _coerce(name: str, raw):
    if name == "coco":
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("true", "1", "yes", "on"):
            return True
        if s in ("false", "0", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


# ---------------------------------------------------------------------------
# PR curves


@dataclass(frozen=True)
class PRCurve:
    """Cumulative TP/FP counts at each distinct confidence cutoff.

    Detections sharing a confidence enter the sweep together, so the curve
    does not depend on how ties happen to be ordered.
    """

    confidence: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    total_gt: int
    iou_threshold: Optional[float] = None

    @classmethod
    def from_scored(cls, confidences, is_tp, total_gt: int, iou_threshold=None) -> "PRCurve":
        conf = np.asarray(confidences, dtype=np.float64)
        flags = np.asarray(is_tp, dtype=bool)
        order = confidence_order(conf)
        return cls.from_sorted(conf[order], flags[order], total_gt, iou_threshold)

    @classmethod
    def from_sorted(cls, conf: np.ndarray, flags: np.ndarray, total_gt: int, iou_threshold=None) -> "PRCurve":
        tp = np.cumsum(flags, dtype=np.int64)
        fp = np.arange(1, flags.size + 1, dtype=np.int64) - tp
        if conf.size:
            last_of_run = np.append(conf[1:] != conf[:-1], True)
            conf, tp, fp = conf[last_of_run], tp[last_of_run], fp[last_of_run]
        return cls(conf, tp, fp, int(total_gt), iou_threshold)

    @property
    def precision(self) -> np.ndarray:
        return self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> np.ndarray:
        if self.total_gt == 0:
            return np.zeros(self.tp.shape)
        return self.tp / self.total_gt

    @property
    def points(self) -> list[tuple[float, float, float]]:
        """``(recall, precision, confidence)`` triples along the sweep."""
        return list(zip(self.recall.tolist(), self.precision.tolist(), self.confidence.tolist()))

    def envelope(self) -> np.ndarray:
        """Interpolated precision: best precision at this or any higher recall."""
        if self.tp.size == 0:
            return np.zeros(0)
        return np.maximum.accumulate(self.precision[::-1])[::-1]

    def interpolated_precision(self, steps: int) -> np.ndarray:
        """Envelope sampled at recall levels ``i / steps``, ``i = 0..steps``."""
        if self.total_gt == 0:
            raise ZeroGroundTruth("average precision is undefined without ground truth")
        levels = np.arange(steps + 1, dtype=np.int64)
        # recall >= i/steps  <=>  tp >= ceil(i * total_gt / steps)
        needed = -((-levels * self.total_gt) // steps)
        out = np.zeros(steps + 1)
        if self.tp.size:
            idx = np.searchsorted(self.tp, needed, side="left")
            ok = idx < self.tp.size
            out[ok] = self.envelope()[idx[ok]]
        return out


def build_pr_curve(outcomes: Sequence[MatchOutcome]) -> PRCurve:
    """Pool per-frame outcomes (one class, one IoU threshold) into a curve."""
    thresholds = {o.iou_threshold for o in outcomes}
    if len(thresholds) > 1:
        raise InconsistentThreshold(f"outcomes mix IoU thresholds {sorted(thresholds)}")
    total_gt = sum(o.n_gt for o in outcomes)
    if not outcomes:
        return PRCurve.from_sorted(np.zeros(0), np.zeros(0, dtype=bool), 0)
    conf = np.concatenate([o.confidences for o in outcomes])
    flags = np.concatenate([o.is_tp for o in outcomes])
    return PRCurve.from_scored(conf, flags, total_gt, thresholds.pop())


def interpolated_ap(curve: PRCurve, steps: int) -> float:
    values = curve.interpolated_precision(steps)
    return float(values.sum() / values.size)


def ap_11(curve: PRCurve) -> float:
    """Mean interpolated precision at recall 0.0, 0.1, ..., 1.0."""
    return interpolated_ap(curve, 10)


def coco_ap_single(curve: PRCurve, recall_steps: int = 100) -> float:
    """Mean interpolated precision over the 101-point recall grid."""
    return interpolated_ap(curve, recall_steps)


def coco_map(
    curves: Mapping[float, PRCurve],
    thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
    recall_steps: int = 100,
) -> float:
    """Average of :func:`coco_ap_single` over the configured IoU thresholds."""
    aps = []
    for t in thresholds:
        curve = curves.get(t)
        if curve is None:
            raise MissingThresholdCurve(f"no PR curve for IoU threshold {t}")
        aps.append(coco_ap_single(curve, recall_steps))
    return sum(aps) / len(aps)


# ---------------------------------------------------------------------------
# ball point-radius metrics


@dataclass(frozen=True)
class BallFrameMetrics:
    avg_precision: float
    avg_recall: float
    pct_correct_frames: float
    counts: ConfusionCounts
    n_frames: int
    n_correct_frames: int

    def __iter__(self):
        return iter((self.avg_precision, self.avg_recall, self.pct_correct_frames))


def _pixel_centers(boxes, width, height) -> list[tuple[float, float]]:
    return [(b.cx * width, b.cy * height) for b in boxes]


def ball_frame_metrics(
    frames: Iterable[tuple[FrameAnnotations, Optional[FrameDetections]]],
    config: EvalConfig = EvalConfig(),
) -> BallFrameMetrics:
    """Point-radius ball precision, recall and share of correct frames.

    Ball detections below ``config.ball_confidence_threshold`` are dropped.
    A detection is a TP when its box center falls within
    ``config.ball_radius_px`` of an unmatched ground-truth ball center. A frame
    counts as correct when it has a ball and at least one TP, or has no ball
    and no surviving ball detection.
    """
    totals = ConfusionCounts()
    n_frames = n_correct = 0
    thr = config.ball_confidence_threshold
    for frame, dets in frames:
        n_frames += 1
        gt_boxes = [o.box for o in frame.objects if o.label == ClassLabel.BALL]
        kept = []
        if dets is not None:
            kept = [d for d in dets.detections if d.label == ClassLabel.BALL and d.confidence >= thr]
        tp = 0
        if kept and gt_boxes:
            order = confidence_order([d.confidence for d in kept])
            w, h = frame.image_width, frame.image_height
            det_centers = _pixel_centers((kept[i].box for i in order), w, h)
            gt_centers = _pixel_centers(gt_boxes, w, h)
            assigned = match_ball_centers(det_centers, gt_centers, config.ball_radius_px)
            tp = sum(1 for a in assigned if a >= 0)
        totals = totals + ConfusionCounts(tp, len(kept) - tp, len(gt_boxes) - tp)
        if gt_boxes:
            n_correct += tp > 0
        else:
            n_correct += not kept
    return BallFrameMetrics(
        avg_precision=totals.precision,
        avg_recall=totals.recall,
        pct_correct_frames=n_correct / n_frames if n_frames else 0.0,
        counts=totals,
        n_frames=n_frames,
        n_correct_frames=n_correct,
    )


# ---------------------------------------------------------------------------
# full evaluation


@dataclass(frozen=True)
class MetricsReport:
    """One comparison-table row. ``None`` marks a column that was not computed."""

    person_ap11: Optional[float] = None
    person_coco_map: Optional[float] = None
    ball_ap11: Optional[float] = None
    ball_coco_map: Optional[float] = None
    ball_avg_precision: Optional[float] = None
    ball_avg_recall: Optional[float] = None
    ball_pct_frames: Optional[float] = None
    inference_ms: Optional[float] = None
    total_ms: Optional[float] = None
    n_frames: Optional[int] = field(default=None, compare=False)

    ACCURACY_FIELDS = (
        "person_ap11",
        "person_coco_map",
        "ball_ap11",
        "ball_coco_map",
        "ball_avg_precision",
        "ball_avg_recall",
        "ball_pct_frames",
    )

    def __post_init__(self):
        for name in self.ACCURACY_FIELDS:
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")
        for name in ("inference_ms", "total_ms"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")

    def with_timing(self, inference_ms, total_ms=None) -> "MetricsReport":
        return replace(self, inference_ms=inference_ms, total_ms=total_ms)

    def to_dict(self) -> dict:
        return {
            "person": {"ap11": self.person_ap11, "coco_map": self.person_coco_map},
            "ball": {
                "ap11": self.ball_ap11,
                "coco_map": self.ball_coco_map,
                "avg_precision": self.ball_avg_precision,
                "avg_recall": self.ball_avg_recall,
                "pct_correct_frames": self.ball_pct_frames,
            },
            "timing": {"inference_ms": self.inference_ms, "total_ms": self.total_ms},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsReport":
        person = d.get("person") or {}
        ball = d.get("ball") or {}
        timing = d.get("timing") or {}
        return cls(
            person_ap11=person.get("ap11"),
            person_coco_map=person.get("coco_map"),
            ball_ap11=ball.get("ap11"),
            ball_coco_map=ball.get("coco_map"),
            ball_avg_precision=ball.get("avg_precision"),
            ball_avg_recall=ball.get("avg_recall"),
            ball_pct_frames=ball.get("pct_correct_frames"),
            inference_ms=timing.get("inference_ms"),
            total_ms=timing.get("total_ms"),
        )


class _FlatObjects:
    """All objects of a frame list stacked into flat arrays."""

    def __init__(self, frame_idx, labels, boxes, conf, pos):
        self.frame_idx = frame_idx
        self.labels = labels
        self.boxes = boxes
        self.conf = conf
        self.pos = pos


def _flatten(frames: Sequence[FrameAnnotations], dets: Sequence[Optional[FrameDetections]]):
    widths = np.array([f.image_width for f in frames], dtype=np.float64)
    heights = np.array([f.image_height for f in frames], dtype=np.float64)

    gt_counts = [len(f.objects) for f in frames]
    gt_rows = [o for f in frames for o in f.objects]
    det_counts = [0 if d is None else len(d.detections) for d in dets]
    det_rows = [x for d in dets if d is not None for x in d.detections]

    def pack(rows, counts, with_conf):
        frame_idx = np.repeat(np.arange(len(counts)), counts)
        labels = np.fromiter((r[0] for r in rows), dtype=np.int64, count=len(rows))
        if rows:
            boxes = boxes_to_xyxy([r[1] for r in rows])
            scale = np.stack([widths, heights, widths, heights], axis=1)[frame_idx]
            boxes *= scale
        else:
            boxes = np.zeros((0, 4))
        conf = (
            np.fromiter((r[2] for r in rows), dtype=np.float64, count=len(rows))
            if with_conf
            else None
        )
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        pos = np.arange(len(rows)) - np.repeat(starts, counts)
        return _FlatObjects(frame_idx, labels, boxes, conf, pos)

    return pack(gt_rows, gt_counts, False), pack(det_rows, det_counts, True)


# elements of the (frames, detections, ground truth) IoU tensor per chunk
_CHUNK_BUDGET = 1 << 21


def _plan_chunks(n_det_f: np.ndarray, n_gt_f: np.ndarray) -> list[np.ndarray]:
    active = np.flatnonzero((n_det_f > 0) & (n_gt_f > 0))
    active = active[np.argsort(n_det_f[active], kind="stable")]
    chunks, start, d_max, g_max = [], 0, 0, 0
    for i, f in enumerate(active):
        d = max(d_max, n_det_f[f])
        g = max(g_max, n_gt_f[f])
        if i > start and (i - start + 1) * d * g > _CHUNK_BUDGET:
            chunks.append(active[start:i])
            start, d, g = i, n_det_f[f], n_gt_f[f]
        d_max, g_max = d, g
    if start < active.size:
        chunks.append(active[start:])
    return chunks


def _class_tp_flags(gt: _FlatObjects, det: _FlatObjects, label: int, n_frames: int,
                    thresholds: np.ndarray, executor) -> tuple[np.ndarray, np.ndarray, int]:
    """TP flags of every ``label`` detection at every threshold.

    Returns ``(conf, flags, total_gt)`` with detections in pooled descending
    confidence order and ``flags`` of shape ``(T, n)``.
    """
    g_sel = np.flatnonzero(gt.labels == label)
    d_sel = np.flatnonzero(det.labels == label)
    g_frame = gt.frame_idx[g_sel]
    # ground-truth index = file order among this class's boxes in the frame
    g_rank = _rank_within(g_frame, n_frames)
    d_frame = det.frame_idx[d_sel]
    d_conf = det.conf[d_sel]
    # visiting order per frame: descending confidence, then file order
    order = np.lexsort((det.pos[d_sel], -d_conf, d_frame))
    d_sel, d_frame, d_conf = d_sel[order], d_frame[order], d_conf[order]
    d_rank = _rank_within(d_frame, n_frames)

    n_det_f = np.bincount(d_frame, minlength=n_frames)
    n_gt_f = np.bincount(g_frame, minlength=n_frames)
    flags = np.zeros((thresholds.size, d_sel.size), dtype=bool)
    d_boxes = det.boxes[d_sel]
    g_boxes = gt.boxes[g_sel]

    def run(chunk):
        local = np.full(n_frames, -1, dtype=np.int64)
        local[chunk] = np.arange(chunk.size)
        d_rows = np.flatnonzero(local[d_frame] >= 0)
        g_rows = np.flatnonzero(local[g_frame] >= 0)
        d_pad = np.full((chunk.size, int(n_det_f[chunk].max()), 4), np.nan)
        g_pad = np.full((chunk.size, int(n_gt_f[chunk].max()), 4), np.nan)
        d_pad[local[d_frame[d_rows]], d_rank[d_rows]] = d_boxes[d_rows]
        g_pad[local[g_frame[g_rows]], g_rank[g_rows]] = g_boxes[g_rows]
        tp = greedy_match_batched(d_pad, g_pad, thresholds)
        return d_rows, tp[:, local[d_frame[d_rows]], d_rank[d_rows]]

    for d_rows, tp in executor.map(run, _plan_chunks(n_det_f, n_gt_f)):
        flags[:, d_rows] = tp

    pooled = confidence_order(d_conf)
    return d_conf[pooled], flags[:, pooled], int(g_sel.size)


def _rank_within(frame_idx: np.ndarray, n_frames: int) -> np.ndarray:
    """Position of each row inside its frame; rows must be grouped by frame."""
    counts = np.bincount(frame_idx, minlength=n_frames)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return np.arange(frame_idx.size) - starts[frame_idx]


class _SerialExecutor:
    def map(self, fn, items):
        return map(fn, items)


def _class_curves(gt, det, label, n_frames, thresholds, executor) -> dict[float, PRCurve]:
    conf, flags, total_gt = _class_tp_flags(gt, det, label, n_frames, thresholds, executor)
    if total_gt == 0:
        name = ClassLabel(label).name.lower()
        raise ZeroGroundTruth(f"class {name!r} has no ground-truth objects; AP is undefined")
    return {
        float(t): PRCurve.from_sorted(conf, flags[i], total_gt, float(t))
        for i, t in enumerate(thresholds)
    }


def _resolve_detections(frames, detections) -> list[Optional[FrameDetections]]:
    if detections is None:
        detections = {}
    if not isinstance(detections, Mapping):
        detections = check_detections(detections)
    known = {f.frame_id for f in frames}
    for frame_id in detections:
        if frame_id not in known:
            raise UnknownFrameId(frame_id)
    return [detections.get(f.frame_id) for f in frames]


def evaluate(
    annotations: Sequence[FrameAnnotations],
    detections,
    config: EvalConfig = EvalConfig(),
    n_jobs: int = 1,
) -> MetricsReport:
    """Compute every accuracy column of the comparison table.

    ``detections`` is a mapping ``frame_id -> FrameDetections`` or an iterable
    of :class:`FrameDetections`; frames without an entry have no detections.
    Results do not depend on frame order, detection file order (for distinct
    confidences) or ``n_jobs``.
    """
    frames = check_frames(annotations)
    dets = _resolve_detections(frames, detections)
    gt, det = _flatten(frames, dets)

    thresholds = [config.iou_threshold_ap11]
    if config.coco:
        thresholds += [t for t in config.coco_iou_thresholds if t not in thresholds]
    thr = np.array(sorted(thresholds))

    executor = ThreadPoolExecutor(n_jobs) if n_jobs > 1 else _SerialExecutor()
    try:
        scores = {}
        for label in (ClassLabel.PERSON, ClassLabel.BALL):
            curves = _class_curves(gt, det, int(label), len(frames), thr, executor)
            ap11 = interpolated_ap(curves[config.iou_threshold_ap11], config.ap11_recall_steps)
            cmap = (
                coco_map(curves, config.coco_iou_thresholds, config.coco_recall_steps)
                if config.coco
                else None
            )
            scores[label] = (ap11, cmap)
    finally:
        if isinstance(executor, ThreadPoolExecutor):
            executor.shutdown()

    ball = ball_frame_metrics(zip(frames, dets), config)
    return MetricsReport(
        person_ap11=scores[ClassLabel.PERSON][0],
        person_coco_map=scores[ClassLabel.PERSON][1],
        ball_ap11=scores[ClassLabel.BALL][0],
        ball_coco_map=scores[ClassLabel.BALL][1],
        ball_avg_precision=ball.avg_precision,
        ball_avg_recall=ball.avg_recall,
        ball_pct_frames=ball.pct_correct_frames,
        n_frames=len(frames),
    )
