"""YOLO-normalized label and detection files.

Ground-truth lines are ``class cx cy w h``; detection lines append a
confidence column, ``class cx cy w h conf``. All four geometry fields are
fractions of the image size. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import logging
from functools import partial
from itertools import chain
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .exceptions import (
    ConfidenceOutOfRange,
    CoordinateOutOfRange,
    InvalidDims,
    MalformedLine,
    UnknownClass,
)

logger = logging.getLogger(__name__)

# tolerated rounding noise before a coordinate is clamped
EDGE_EPS = 1e-6
# overshoot beyond this is treated as a broken file, not noise
MAX_OVERSHOOT = 1e-3

WRITE_DECIMALS = 6


class ClassLabel(IntEnum):
    BALL = 0
    PERSON = 1


DEFAULT_CLASSES = frozenset(int(c) for c in ClassLabel)


class NormalizedBox(NamedTuple):
    """Box center and size as fractions of the image width/height."""

    cx: float
    cy: float
    w: float
    h: float

    def to_pixel(self, image_width, image_height) -> "PixelBox":
        return normalized_to_pixel(self, image_width, image_height)


class PixelBox(NamedTuple):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)


class GroundTruthObject(NamedTuple):
    label: ClassLabel
    box: NormalizedBox


class Detection(NamedTuple):
    label: ClassLabel
    box: NormalizedBox
    confidence: float


def _check_dims(image_width, image_height) -> None:
    if not (image_width > 0 and image_height > 0):
        raise InvalidDims(image_width, image_height)


@dataclass(frozen=True)
class FrameAnnotations:
    frame_id: str
    image_width: int
    image_height: int
    objects: tuple[GroundTruthObject, ...] = field(default=())

    def __post_init__(self):
        if not self.frame_id:
            raise ValueError("frame_id must be non-empty")
        _check_dims(self.image_width, self.image_height)
        if not isinstance(self.objects, tuple):
            object.__setattr__(self, "objects", tuple(self.objects))

    def of_class(self, label: ClassLabel) -> list[GroundTruthObject]:
        return [o for o in self.objects if o.label == label]

    def has_ball(self) -> bool:
        return any(o.label == ClassLabel.BALL for o in self.objects)

    def replace(self, **changes) -> "FrameAnnotations":
        kwargs = dict(
            frame_id=self.frame_id,
            image_width=self.image_width,
            image_height=self.image_height,
            objects=self.objects,
        )
        kwargs.update(changes)
        return FrameAnnotations(**kwargs)


@dataclass(frozen=True)
class FrameDetections:
    frame_id: str
    detections: tuple[Detection, ...] = field(default=())

    def __post_init__(self):
        if not self.frame_id:
            raise ValueError("frame_id must be non-empty")
        if not isinstance(self.detections, tuple):
            object.__setattr__(self, "detections", tuple(self.detections))


# ---------------------------------------------------------------------------
# coordinate conversion


def normalized_to_pixel(box: NormalizedBox, image_width, image_height) -> PixelBox:
    _check_dims(image_width, image_height)
    cx, cy, w, h = box
    return PixelBox(
        (cx - w / 2.0) * image_width,
        (cy - h / 2.0) * image_height,
        (cx + w / 2.0) * image_width,
        (cy + h / 2.0) * image_height,
    )


def pixel_to_normalized(box: PixelBox, image_width, image_height) -> NormalizedBox:
    _check_dims(image_width, image_height)
    x0, y0, x1, y1 = box
    return NormalizedBox(
        (x0 + x1) / 2.0 / image_width,
        (y0 + y1) / 2.0 / image_height,
        (x1 - x0) / image_width,
        (y1 - y0) / image_height,
    )


def boxes_to_xyxy(boxes) -> np.ndarray:
    """Vectorised ``(cx, cy, w, h)`` -> ``(x0, y0, x1, y1)`` in the same units."""
    if isinstance(boxes, np.ndarray):
        b = boxes.astype(np.float64, copy=False).reshape(-1, 4)
    else:
        boxes = list(boxes)
        b = np.fromiter(chain.from_iterable(boxes), dtype=np.float64, count=4 * len(boxes)).reshape(-1, 4)
    half_w = b[:, 2] / 2.0
    half_h = b[:, 3] / 2.0
    return np.stack(
        [b[:, 0] - half_w, b[:, 1] - half_h, b[:, 0] + half_w, b[:, 1] + half_h], axis=1
    )


# ---------------------------------------------------------------------------
# parsing


def _clamp_axis(c: float, s: float, line_number: int, axis: str) -> tuple[float, float, bool]:
    lo = c - s / 2.0
    hi = c + s / 2.0
    if lo >= -EDGE_EPS and hi <= 1.0 + EDGE_EPS:
        return c, s, False
    if lo < -MAX_OVERSHOOT or hi > 1.0 + MAX_OVERSHOOT:
        raise CoordinateOutOfRange(
            line_number, f"box extends outside the image along {axis} ({lo:.6f}..{hi:.6f})"
        )
    lo = max(lo, 0.0)
    hi = min(hi, 1.0)
    if hi <= lo:
        raise CoordinateOutOfRange(line_number, f"box collapses to zero size along {axis}")
    return (lo + hi) / 2.0, hi - lo, True


def _parse_geometry(parts: Sequence[str], line_number: int) -> NormalizedBox:
    try:
        cx, cy, w, h = map(float, parts)
    except ValueError:
        raise MalformedLine(line_number, "non-numeric coordinate") from None
    # common case: a proper box well inside the image
    if (
        0.0 < w <= 1.0
        and 0.0 < h <= 1.0
        and cx - w / 2.0 >= -EDGE_EPS
        and cx + w / 2.0 <= 1.0 + EDGE_EPS
        and cy - h / 2.0 >= -EDGE_EPS
        and cy + h / 2.0 <= 1.0 + EDGE_EPS
    ):
        return NormalizedBox(cx, cy, w, h)
    for name, v in (("cx", cx), ("cy", cy)):
        # also rejects NaN
        if not (-MAX_OVERSHOOT <= v <= 1.0 + MAX_OVERSHOOT):
            raise CoordinateOutOfRange(line_number, f"{name}={v} outside [0, 1]")
    for name, v in (("w", w), ("h", h)):
        if not (0.0 < v <= 1.0 + MAX_OVERSHOOT):
            raise CoordinateOutOfRange(line_number, f"{name}={v} outside (0, 1]")
    cx, w, clamped_x = _clamp_axis(cx, w, line_number, "x")
    cy, h, clamped_y = _clamp_axis(cy, h, line_number, "y")
    if clamped_x or clamped_y:
        logger.warning("line %d: box clamped to the image bounds", line_number)
    return NormalizedBox(cx, cy, w, h)


def _parse_class(token: str, line_number: int, classes) -> ClassLabel:
    try:
        value = int(token)
    except ValueError:
        raise MalformedLine(line_number, f"class {token!r} is not an integer") from None
    if value not in classes:
        raise UnknownClass(line_number, value)
    return ClassLabel(value)


def _content_lines(text: str) -> Iterable[tuple[int, list[str]]]:
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield number, stripped.split()


def _bulk_parse(text: str, n_fields: int, classes):
    """Whole-file parse for the common case of clean, well-formed rows.

    Returns the parsed objects (ground truth for 5 fields, detections for 6)
    or ``None`` when anything looks unusual, in which case the caller falls
    back to the line-by-line parser and its exact error reporting.
    """
    if "#" in text:
        return None
    tokens = text.split()
    n = len(tokens) // n_fields
    if n == 0 or len(tokens) != n * n_fields:
        return None
    if sum(1 for line in text.splitlines() if line and not line.isspace()) != n:
        return None
    label_tokens = tokens[0::n_fields]
    if classes is DEFAULT_CLASSES:
        allowed = _DEFAULT_LABEL_TOKENS
    else:
        allowed = {str(c): ClassLabel(c) for c in ClassLabel if int(c) in classes}
    try:
        labels = [allowed[t] for t in label_tokens]
    except KeyError:
        return None
    del tokens[0::n_fields]
    try:
        values = np.array(tokens, dtype=np.float64).reshape(n, n_fields - 1)
    except ValueError:
        return None
    cx, cy, w, h = values[:, 0], values[:, 1], values[:, 2], values[:, 3]
    ok = (
        (w > 0.0) & (w <= 1.0) & (h > 0.0) & (h <= 1.0)
        & (cx - w / 2.0 >= -EDGE_EPS) & (cx + w / 2.0 <= 1.0 + EDGE_EPS)
        & (cy - h / 2.0 >= -EDGE_EPS) & (cy + h / 2.0 <= 1.0 + EDGE_EPS)
    )
    if n_fields == 6:
        ok &= (values[:, 4] >= 0.0) & (values[:, 4] <= 1.0)
    if not ok.all():
        return None
    # tuple.__new__ skips the per-instance Python frame of NamedTuple.__new__
    boxes = map(partial(tuple.__new__, NormalizedBox), values[:, :4].tolist())
    if n_fields == 5:
        return tuple(map(partial(tuple.__new__, GroundTruthObject), zip(labels, boxes)))
    return tuple(map(partial(tuple.__new__, Detection), zip(labels, boxes, values[:, 4].tolist())))


_DEFAULT_LABEL_TOKENS = {str(int(c)): c for c in ClassLabel}


def parse_label_file(
    text: str,
    image_width: int,
    image_height: int,
    frame_id: str,
    *,
    classes=DEFAULT_CLASSES,
) -> FrameAnnotations:
    """Parse a ground-truth label file into a :class:`FrameAnnotations`.

    Boxes overshooting the unit square by at most ``MAX_OVERSHOOT`` are clamped
    (with a logged warning); anything worse raises
    :class:`~longshot_bench.exceptions.CoordinateOutOfRange`.
    """
    _check_dims(image_width, image_height)
    objects = _bulk_parse(text, 5, classes)
    if objects is not None:
        return FrameAnnotations(frame_id, image_width, image_height, objects)
    objects = []
    for number, parts in _content_lines(text):
        if len(parts) != 5:
            raise MalformedLine(number, f"expected 5 fields, got {len(parts)}")
        label = _parse_class(parts[0], number, classes)
        objects.append(GroundTruthObject(label, _parse_geometry(parts[1:], number)))
    return FrameAnnotations(frame_id, image_width, image_height, tuple(objects))


def parse_detection_file(
    text: str,
    image_width: int,
    image_height: int,
    frame_id: str,
    *,
    classes=DEFAULT_CLASSES,
) -> FrameDetections:
    """Parse a detection file. File order is preserved; nothing is sorted."""
    _check_dims(image_width, image_height)
    detections = _bulk_parse(text, 6, classes)
    if detections is not None:
        return FrameDetections(frame_id, detections)
    detections = []
    for number, parts in _content_lines(text):
        if len(parts) != 6:
            raise MalformedLine(number, f"expected 6 fields, got {len(parts)}")
        label = _parse_class(parts[0], number, classes)
        box = _parse_geometry(parts[1:5], number)
        try:
            conf = float(parts[5])
        except ValueError:
            raise MalformedLine(number, "non-numeric confidence") from None
        if not (0.0 <= conf <= 1.0):
            raise ConfidenceOutOfRange(number, conf)
        detections.append(Detection(label, box, conf))
    return FrameDetections(frame_id, tuple(detections))


# ---------------------------------------------------------------------------
# serialization


def _fmt_box(box: NormalizedBox) -> str:
    return f"{box.cx:.6f} {box.cy:.6f} {box.w:.6f} {box.h:.6f}"


def serialize_label_file(frame: FrameAnnotations) -> str:
    return "".join(f"{int(o.label)} {_fmt_box(o.box)}\n" for o in frame.objects)


def serialize_detection_file(frames: FrameDetections) -> str:
    return "".join(
        f"{int(d.label)} {_fmt_box(d.box)} {d.confidence:.6f}\n" for d in frames.detections
    )
