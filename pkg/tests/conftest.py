import sys
from pathlib import Path

import numpy as np
import pytest

from longshot_bench.annotation_io import (
    ClassLabel,
    Detection,
    FrameAnnotations,
    FrameDetections,
    GroundTruthObject,
    NormalizedBox,
    serialize_detection_file,
    serialize_label_file,
)

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def person(cx, cy, w, h):
    return GroundTruthObject(ClassLabel.PERSON, NormalizedBox(cx, cy, w, h))


def ball(cx, cy, w=0.01, h=0.01):
    return GroundTruthObject(ClassLabel.BALL, NormalizedBox(cx, cy, w, h))


def det(label, box, conf):
    return Detection(ClassLabel(label), NormalizedBox(*box), conf)


def echo(frame, conf=1.0):
    """Ground truth replayed as detections."""
    return FrameDetections(frame.frame_id, tuple(Detection(o.label, o.box, conf) for o in frame.objects))


def random_box(rng, max_size=0.3, min_size=0.005):
    w, h = rng.uniform(min_size, max_size, size=2)
    cx = rng.uniform(w / 2, 1 - w / 2)
    cy = rng.uniform(h / 2, 1 - h / 2)
    return NormalizedBox(float(cx), float(cy), float(w), float(h))


def jitter(rng, box, scale):
    cx = min(max(box.cx + rng.normal(0, scale * box.w), box.w / 2), 1 - box.w / 2)
    cy = min(max(box.cy + rng.normal(0, scale * box.h), box.h / 2), 1 - box.h / 2)
    return NormalizedBox(float(cx), float(cy), box.w, box.h)


def synthetic_scenario(seed, n_frames=20, persons=(0, 6), ball_prob=0.7, size=(1280, 720),
                       conf_levels=None):
    """Frames plus detections with a planted mix of hits, near-misses and spurious boxes.

    ``conf_levels`` restricts confidences to a small set so that ties occur.
    """
    rng = np.random.default_rng(seed)
    frames, dets = [], []

    def conf():
        if conf_levels is not None:
            return float(rng.choice(conf_levels))
        return float(rng.uniform(0.01, 1.0))

    for i in range(n_frames):
        objects = [GroundTruthObject(ClassLabel.PERSON, random_box(rng, 0.2, 0.02))
                   for _ in range(rng.integers(*persons, endpoint=True))]
        if rng.random() < ball_prob:
            objects.append(GroundTruthObject(ClassLabel.BALL, random_box(rng, 0.012, 0.004)))
        frame = FrameAnnotations(f"f{i:04d}", size[0], size[1], tuple(objects))
        out = []
        for o in objects:
            r = rng.random()
            if r < 0.55:
                out.append(Detection(o.label, jitter(rng, o.box, 0.05), conf()))
            elif r < 0.8:
                out.append(Detection(o.label, jitter(rng, o.box, 0.4), conf()))
            # else: missed
        for _ in range(rng.integers(0, 3, endpoint=True)):
            label = ClassLabel.BALL if rng.random() < 0.4 else ClassLabel.PERSON
            out.append(Detection(label, random_box(rng, 0.15 if label else 0.012, 0.004), conf()))
        rng.shuffle(out)
        frames.append(frame)
        dets.append(FrameDetections(frame.frame_id, tuple(out)))
    return frames, dets


def random_instance(rng):
    """One frame, one class: up to 8 detections and 1-5 ground-truth boxes."""
    gts = tuple(person(*random_box(rng, 0.25, 0.03)) for _ in range(rng.integers(1, 6)))
    dets = []
    for _ in range(rng.integers(0, 9)):
        if rng.random() < 0.6:
            box = jitter(rng, gts[rng.integers(len(gts))].box, 0.15)
        else:
            box = random_box(rng, 0.25, 0.03)
        # a share of tied confidences
        conf = float(rng.choice([0.2, 0.5, 0.8])) if rng.random() < 0.3 else float(rng.uniform())
        dets.append(Detection(ClassLabel.PERSON, box, conf))
    frame = FrameAnnotations("x", 640, 480, gts)
    return frame, FrameDetections("x", tuple(dets))


def write_corpus(root: Path, frames, dets=None, run="run", split="test", sizes=True):
    """Write frames (and optional detections) in the on-disk layout."""
    lbl = root / "labels" / split
    lbl.mkdir(parents=True, exist_ok=True)
    rows = ["split,frame_id,width,height"]
    for f in frames:
        (lbl / f"{f.frame_id}.txt").write_text(serialize_label_file(f))
        rows.append(f"{split},{f.frame_id},{f.image_width},{f.image_height}")
    if sizes:
        (root / "sizes.csv").write_text("\n".join(rows) + "\n")
    run_dir = None
    if dets is not None:
        run_dir = root / "detections" / run
        d_dir = run_dir / split
        d_dir.mkdir(parents=True, exist_ok=True)
        for d in dets:
            (d_dir / f"{d.frame_id}.txt").write_text(serialize_detection_file(d))
    return run_dir


@pytest.fixture
def scenario():
    return synthetic_scenario(7)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance.VERDICTS, key=lambda v: int(v.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
