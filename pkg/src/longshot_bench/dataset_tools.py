"""Long-shot subset construction and dataset statistics.

The long-shot rule keeps a frame when no person box in it is taller than a
pixel threshold (250 px by default, inclusive). The other helpers cover the
annotation repairs applied while building the subset: the seven human roles
are merged into one person class, ball point annotations become small square
boxes, and crops drop a box only when less than half of it survives.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple, Optional, Sequence

from ._validation import check_frames, check_threshold
from .annotation_io import (
    ClassLabel,
    FrameAnnotations,
    GroundTruthObject,
    NormalizedBox,
    PixelBox,
    normalized_to_pixel,
    pixel_to_normalized,
)
from .exceptions import CenterOutOfImage, DuplicateFrameId, InvalidCrop, MalformedLine

DEFAULT_HEIGHT_THRESHOLD = 250.0
DEFAULT_BALL_BOX_SIDE = 10.0
DEFAULT_HEIGHT_BIN = 10


class RawHumanClass(Enum):
    LEFT_PLAYER = "left_player"
    RIGHT_PLAYER = "right_player"
    LEFT_GOALKEEPER = "left_goalkeeper"
    RIGHT_GOALKEEPER = "right_goalkeeper"
    MAIN_REFEREE = "main_referee"
    SIDE_REFEREE = "side_referee"
    STAFF = "staff"


class DatasetSplit(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


SPLITS = tuple(s.value for s in DatasetSplit)


def consolidate_person_classes(raw: RawHumanClass) -> ClassLabel:
    """Every human role, referees and staff included, counts as a person."""
    RawHumanClass(raw)
    return ClassLabel.PERSON


@dataclass(frozen=True)
class DatasetIndex:
    """Frames per split plus where they came from.

    ``threshold`` is the long-shot height threshold applied so far, or None
    for an unfiltered dataset.
    """

    splits: Mapping[str, tuple[FrameAnnotations, ...]]
    source: str = ""
    threshold: Optional[float] = None

    def __post_init__(self):
        splits = {}
        for name, frames in self.splits.items():
            if name not in SPLITS:
                raise ValueError(f"unknown split {name!r}; expected one of {SPLITS}")
            try:
                splits[name] = tuple(check_frames(frames))
            except DuplicateFrameId as exc:
                raise DuplicateFrameId(f"split {name}: {exc}") from None
        object.__setattr__(self, "splits", splits)

    def __iter__(self):
        return iter(self.splits.items())

    @property
    def frame_count(self) -> int:
        return sum(len(f) for f in self.splits.values())

    def counts(self) -> dict[str, int]:
        return {name: len(frames) for name, frames in self.splits.items()}


# ---------------------------------------------------------------------------
# long-shot filter


def max_person_height(frame: FrameAnnotations) -> float:
    """Tallest person box in pixels; 0 for frames without people."""
    heights = [o.box.h * frame.image_height for o in frame.objects if o.label == ClassLabel.PERSON]
    return max(heights, default=0.0)


def filter_long_shot(index: DatasetIndex, threshold: float = DEFAULT_HEIGHT_THRESHOLD) -> DatasetIndex:
    """Keep frames whose tallest person is at most ``threshold`` pixels."""
    threshold = check_threshold(threshold)
    kept = {
        name: tuple(f for f in frames if max_person_height(f) <= threshold)
        for name, frames in index.splits.items()
    }
    # repeated filtering keeps the strictest threshold in the provenance
    if index.threshold is not None:
        threshold = min(threshold, index.threshold)
    return DatasetIndex(kept, source=index.source, threshold=threshold)


# ---------------------------------------------------------------------------
# annotation repair


class CropRect(NamedTuple):
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min


def center_crop_rect(image_width: int, image_height: int, crop_width: int, crop_height: int) -> CropRect:
    if not (0 < crop_width <= image_width and 0 < crop_height <= image_height):
        raise InvalidCrop(
            f"center crop {crop_width}x{crop_height} does not fit a {image_width}x{image_height} image"
        )
    x0 = (image_width - crop_width) // 2
    y0 = (image_height - crop_height) // 2
    return CropRect(x0, y0, x0 + crop_width, y0 + crop_height)


def ball_point_to_box(
    center_x: float,
    center_y: float,
    image_width: int,
    image_height: int,
    box_side: float = DEFAULT_BALL_BOX_SIDE,
) -> NormalizedBox:
    """Square box of side ``box_side`` around a ball point, clipped to the image."""
    if not box_side > 0:
        raise ValueError(f"box_side must be positive, got {box_side}")
    if not (0 <= center_x <= image_width and 0 <= center_y <= image_height):
        raise CenterOutOfImage(
            f"ball point ({center_x}, {center_y}) outside {image_width}x{image_height} image"
        )
    half = box_side / 2.0
    box = PixelBox(
        max(center_x - half, 0.0),
        max(center_y - half, 0.0),
        min(center_x + half, float(image_width)),
        min(center_y + half, float(image_height)),
    )
    return pixel_to_normalized(box, image_width, image_height)


def crop_annotations(frame: FrameAnnotations, crop: CropRect) -> FrameAnnotations:
    """Re-express a frame's boxes in a crop of the image.

    A box survives when at least half of its area lies inside the crop; it is
    then clipped to the crop. The returned frame has the crop's dimensions.
    """
    crop = CropRect(*crop)
    if not (
        0 <= crop.x_min < crop.x_max <= frame.image_width
        and 0 <= crop.y_min < crop.y_max <= frame.image_height
    ):
        raise InvalidCrop(
            f"crop {tuple(crop)} is empty or outside the "
            f"{frame.image_width}x{frame.image_height} image of {frame.frame_id}"
        )
    kept = []
    for obj in frame.objects:
        b = normalized_to_pixel(obj.box, frame.image_width, frame.image_height)
        clipped = PixelBox(
            max(b.x_min, crop.x_min),
            max(b.y_min, crop.y_min),
            min(b.x_max, crop.x_max),
            min(b.y_max, crop.y_max),
        )
        if clipped.x_max <= clipped.x_min or clipped.y_max <= clipped.y_min:
            continue
        if clipped.area < 0.5 * b.area:
            continue
        shifted = PixelBox(
            clipped.x_min - crop.x_min,
            clipped.y_min - crop.y_min,
            clipped.x_max - crop.x_min,
            clipped.y_max - crop.y_min,
        )
        kept.append(GroundTruthObject(obj.label, pixel_to_normalized(shifted, crop.width, crop.height)))
    return FrameAnnotations(frame.frame_id, crop.width, crop.height, tuple(kept))


# ---------------------------------------------------------------------------
# source annotations -> two-class labels

_RAW_NAMES = {c.value: c for c in RawHumanClass}


def convert_source_annotations(
    text: str,
    image_width: int,
    image_height: int,
    frame_id: str,
    *,
    ball_box_side: float = DEFAULT_BALL_BOX_SIDE,
) -> FrameAnnotations:
    """Convert a pixel-space source annotation file to two-class ground truth.

    Each line is either ``ball X Y`` (a ball point) or
    ``<role> X_MIN Y_MIN X_MAX Y_MAX`` where ``<role>`` names one of the seven
    :class:`RawHumanClass` values. Human boxes are clipped to the image.
    """
    objects = []
    for number, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        kind = parts[0]
        try:
            values = [float(p) for p in parts[1:]]
        except ValueError:
            raise MalformedLine(number, "non-numeric coordinate") from None
        if kind == "ball":
            if len(values) != 2:
                raise MalformedLine(number, f"ball point needs 2 coordinates, got {len(values)}")
            try:
                box = ball_point_to_box(values[0], values[1], image_width, image_height, ball_box_side)
            except CenterOutOfImage as exc:
                raise MalformedLine(number, str(exc)) from None
            objects.append(GroundTruthObject(ClassLabel.BALL, box))
            continue
        role = _RAW_NAMES.get(kind)
        if role is None:
            raise MalformedLine(number, f"unknown source class {kind!r}")
        if len(values) != 4:
            raise MalformedLine(number, f"box needs 4 coordinates, got {len(values)}")
        x0, y0 = max(values[0], 0.0), max(values[1], 0.0)
        x1, y1 = min(values[2], float(image_width)), min(values[3], float(image_height))
        if x1 <= x0 or y1 <= y0:
            raise MalformedLine(number, "box is empty inside the image")
        box = pixel_to_normalized(PixelBox(x0, y0, x1, y1), image_width, image_height)
        objects.append(GroundTruthObject(consolidate_person_classes(role), box))
    return FrameAnnotations(frame_id, image_width, image_height, tuple(objects))


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class SplitStats:
    frame_count: int
    resolutions: dict[tuple[int, int], int]
    height_histogram: dict[int, int]
    ball_frames: int

    @property
    def ball_fraction(self) -> float:
        return self.ball_frames / self.frame_count if self.frame_count else 0.0

    def merge(self, other: "SplitStats") -> "SplitStats":
        return SplitStats(
            self.frame_count + other.frame_count,
            dict(Counter(self.resolutions) + Counter(other.resolutions)),
            dict(Counter(self.height_histogram) + Counter(other.height_histogram)),
            self.ball_frames + other.ball_frames,
        )


@dataclass(frozen=True)
class StatsSummary:
    splits: dict[str, SplitStats]
    bin_width: int = DEFAULT_HEIGHT_BIN
    source: str = ""
    threshold: Optional[float] = None

    def to_dict(self) -> dict:
        out = {
            "source": self.source,
            "threshold": self.threshold,
            "height_bin_px": self.bin_width,
            "splits": {},
        }
        for name, s in self.splits.items():
            out["splits"][name] = {
                "frames": s.frame_count,
                "resolutions": {f"{w}x{h}": n for (w, h), n in sorted(s.resolutions.items())},
                "max_person_height": {str(b): n for b, n in sorted(s.height_histogram.items())},
                "ball_frames": s.ball_frames,
                "ball_fraction": round(s.ball_fraction, 6),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render_text(self) -> str:
        lines = []
        for name, s in self.splits.items():
            lines.append(f"[{name}] frames: {s.frame_count}")
            lines.append("  resolutions:")
            if not s.resolutions:
                lines.append("    (none)")
            for (w, h), n in sorted(s.resolutions.items(), key=lambda kv: (-kv[1], kv[0])):
                lines.append(f"    {w}x{h:<6} {n:>8}")
            lines.append(f"  max person height (px, bin {self.bin_width}):")
            if not s.height_histogram:
                lines.append("    (none)")
            peak = max(s.height_histogram.values(), default=0)
            for b, n in sorted(s.height_histogram.items()):
                bar = "#" * max(1, round(40 * n / peak)) if n else ""
                lines.append(f"    {b:>5}-{b + self.bin_width - 1:<5} {n:>8} {bar}")
            lines.append(f"  ball fraction: {s.ball_fraction:.3f} ({s.ball_frames}/{s.frame_count})")
        return "\n".join(lines) + "\n"


def split_stats(frames: Sequence[FrameAnnotations], bin_width: int = DEFAULT_HEIGHT_BIN) -> SplitStats:
    resolutions = Counter((f.image_width, f.image_height) for f in frames)
    heights = Counter(int(max_person_height(f) // bin_width) * bin_width for f in frames)
    balls = sum(1 for f in frames if f.has_ball())
    return SplitStats(len(frames), dict(resolutions), dict(heights), balls)


def dataset_stats(index: DatasetIndex, bin_width: int = DEFAULT_HEIGHT_BIN) -> StatsSummary:
    """Resolution histogram, tallest-person histogram and ball share per split."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    splits = {name: split_stats(frames, bin_width) for name, frames in index.splits.items()}
    return StatsSummary(splits, bin_width, index.source, index.threshold)
