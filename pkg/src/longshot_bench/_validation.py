"""Input checks shared by the estimators and pipeline functions."""

from __future__ import annotations

from typing import Iterable

from .annotation_io import FrameAnnotations, FrameDetections
from .exceptions import DuplicateFrameId


def check_frames(frames: Iterable[FrameAnnotations]) -> list[FrameAnnotations]:
    """Return ``frames`` as a list, rejecting wrong types and repeated ids."""
    frames = list(frames)
    seen = set()
    for f in frames:
        if not isinstance(f, FrameAnnotations):
            raise TypeError(f"expected FrameAnnotations, got {type(f).__name__}")
        if f.frame_id in seen:
            raise DuplicateFrameId(f"frame_id {f.frame_id!r} appears more than once")
        seen.add(f.frame_id)
    return frames


def check_detections(detections: Iterable[FrameDetections]) -> dict[str, FrameDetections]:
    """Index detection frames by id, rejecting repeated ids."""
    out: dict[str, FrameDetections] = {}
    for d in detections:
        if not isinstance(d, FrameDetections):
            raise TypeError(f"expected FrameDetections, got {type(d).__name__}")
        if d.frame_id in out:
            raise DuplicateFrameId(f"detections for frame_id {d.frame_id!r} given twice")
        out[d.frame_id] = d
    return out


def check_threshold(value, name: str = "threshold") -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
