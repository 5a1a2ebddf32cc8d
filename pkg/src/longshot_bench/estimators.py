"""scikit-learn style wrappers around the filtering and evaluation functions.

Kept apart from the core modules so that the command-line tool does not pay
for importing scikit-learn.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_frames, check_threshold
from .annotation_io import FrameAnnotations
from .dataset_tools import DEFAULT_HEIGHT_THRESHOLD, DatasetIndex, filter_long_shot, max_person_height
from .metrics import EvalConfig, MetricsReport, evaluate


class LongShotFilter(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`filter_long_shot`.

    Accepts either a :class:`DatasetIndex` or a plain sequence of frames and
    returns the same kind of object.

    Parameters
    ----------
    height_threshold : float, default=250.0
        Largest allowed person box height in pixels (inclusive).
    """

    def __init__(self, height_threshold=DEFAULT_HEIGHT_THRESHOLD):
        self.height_threshold = height_threshold

    def fit(self, X, y=None):
        check_threshold(self.height_threshold, "height_threshold")
        frames = _frames_of(X)
        self.n_frames_in_ = len(frames)
        self.max_heights_ = [max_person_height(f) for f in frames]
        return self

    def transform(self, X):
        if not hasattr(self, "n_frames_in_"):
            raise NotFittedError("LongShotFilter is not fitted yet")
        if isinstance(X, DatasetIndex):
            return filter_long_shot(X, self.height_threshold)
        threshold = check_threshold(self.height_threshold, "height_threshold")
        return [f for f in check_frames(X) if max_person_height(f) <= threshold]


def _frames_of(X) -> list[FrameAnnotations]:
    if isinstance(X, DatasetIndex):
        return [f for frames in X.splits.values() for f in frames]
    return check_frames(X)


class DetectionEvaluator(BaseEstimator):
    """Estimator-style wrapper around :func:`evaluate`.

    ``fit`` stores the ground truth; ``evaluate`` scores a detection set
    against it and ``score`` returns the person COCO mAP (AP11 when COCO
    averaging is disabled) so the object can sit inside model-selection code.

    Parameters
    ----------
    iou_threshold : float, default=0.5
        IoU threshold of the 11-point AP.
    ball_radius_px : float, default=5.0
        Point-radius tolerance for the ball precision/recall columns.
    ball_conf_threshold : float, default=0.5
        Operating point applied to ball detections before point matching.
    coco : bool, default=True
        Also compute COCO mAP over IoU 0.50:0.05:0.95.
    n_jobs : int, default=1
        Worker threads for matching. Output does not depend on it.
    """

    def __init__(self, iou_threshold=0.5, ball_radius_px=5.0, ball_conf_threshold=0.5,
                 coco=True, n_jobs=1):
        self.iou_threshold = iou_threshold
        self.ball_radius_px = ball_radius_px
        self.ball_conf_threshold = ball_conf_threshold
        self.coco = coco
        self.n_jobs = n_jobs

    @property
    def config(self) -> EvalConfig:
        return EvalConfig(
            iou_threshold_ap11=self.iou_threshold,
            ball_radius_px=self.ball_radius_px,
            ball_confidence_threshold=self.ball_conf_threshold,
            coco=self.coco,
        )

    def fit(self, annotations, y=None):
        self.config_ = self.config
        self.frames_ = check_frames(annotations)
        self.n_frames_ = len(self.frames_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "frames_"):
            raise NotFittedError("DetectionEvaluator is not fitted; call fit(annotations) first")

    def evaluate(self, detections) -> MetricsReport:
        self._check_fitted()
        return evaluate(self.frames_, detections, self.config_, n_jobs=self.n_jobs)

    def score(self, detections, y=None) -> float:
        report = self.evaluate(detections)
        return report.person_coco_map if report.person_coco_map is not None else report.person_ap11
