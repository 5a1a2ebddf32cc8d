"""Benchmark toolkit for long-shot soccer player and ball detection."""

__version__ = "0.1.0"

from .annotation_io import (
    ClassLabel,
    Detection,
    FrameAnnotations,
    FrameDetections,
    GroundTruthObject,
    NormalizedBox,
    PixelBox,
    normalized_to_pixel,
    parse_detection_file,
    parse_label_file,
    pixel_to_normalized,
    serialize_detection_file,
    serialize_label_file,
)
from .dataset_tools import (
    CropRect,
    DatasetIndex,
    RawHumanClass,
    ball_point_to_box,
    consolidate_person_classes,
    crop_annotations,
    dataset_stats,
    filter_long_shot,
    max_person_height,
)
from .matching import ball_center_match, iou, match_frame
from .metrics import (
    EvalConfig,
    MetricsReport,
    PRCurve,
    ap_11,
    ball_frame_metrics,
    build_pr_curve,
    coco_ap_single,
    coco_map,
    evaluate,
)
from .report import RunResult, render_csv, render_markdown
from .timing import TimingRecord, parse_timing_log, summarize_timing

_ESTIMATORS = ("DetectionEvaluator", "LongShotFilter")


def __getattr__(name):
    # the estimator wrappers pull in scikit-learn; load them on first use
    if name in _ESTIMATORS:
        from . import estimators

        return getattr(estimators, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
