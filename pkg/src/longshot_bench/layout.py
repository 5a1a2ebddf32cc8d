"""On-disk dataset layout.

::

    <root>/images/{train,valid,test}/<frame_id>.jpg
    <root>/labels/{train,valid,test}/<frame_id>.txt
    <root>/sizes.csv                  optional: split,frame_id,width,height
    <root>/dataset_manifest.txt       written by the filter

    <detections>/<run_name>/{train,valid,test}/<frame_id>.txt

A frame exists when it has an image or a label file; a missing label file
means the frame has no objects. Image sizes come from ``sizes.csv`` when it
lists the frame, otherwise from the image header, otherwise from the caller's
default size.
"""

from __future__ import annotations

import csv
import gc
import io
import shutil
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Mapping, Optional

from .annotation_io import (
    FrameAnnotations,
    FrameDetections,
    parse_detection_file,
    parse_label_file,
    serialize_label_file,
)
from .dataset_tools import SPLITS, DatasetIndex
from .exceptions import DataError, IoFailure, UnknownFrameId

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
SIZES_FILE = "sizes.csv"
MANIFEST_FILE = "dataset_manifest.txt"


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read file ({getattr(exc, 'strerror', None) or exc})", path=path) from None


def read_sizes(root: Path) -> dict[tuple[str, str], tuple[int, int]]:
    path = Path(root) / SIZES_FILE
    if not path.exists():
        return {}
    sizes = {}
    reader = csv.DictReader(io.StringIO(_read_text(path)))
    if reader.fieldnames != ["split", "frame_id", "width", "height"]:
        raise DataError("expected header split,frame_id,width,height", path=path)
    for number, row in enumerate(reader, start=2):
        try:
            sizes[(row["split"], row["frame_id"])] = (int(row["width"]), int(row["height"]))
        except (TypeError, ValueError):
            raise DataError(f"line {number}: bad image size row", path=path) from None
    return sizes


def write_sizes(index: DatasetIndex, root: Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["split", "frame_id", "width", "height"])
    for split, frames in index.splits.items():
        for f in frames:
            writer.writerow([split, f.frame_id, f.image_width, f.image_height])
    (Path(root) / SIZES_FILE).write_text(buf.getvalue(), encoding="utf-8")


def _image_header_size(path: Path) -> tuple[int, int]:
    from PIL import Image  # header only; pixels are never decoded

    try:
        with Image.open(path) as im:
            return im.size
    except OSError as exc:
        raise IoFailure(f"cannot read image header ({exc})", path=path) from None


def _split_frame_ids(root: Path, split: str, label_dir: str = "labels") -> tuple[dict[str, Path], dict[str, Path]]:
    images, labels = {}, {}
    img_dir = root / "images" / split
    lbl_dir = root / label_dir / split
    if img_dir.is_dir():
        for p in img_dir.iterdir():
            if p.suffix.lower() in IMAGE_SUFFIXES:
                images[p.stem] = p
    if lbl_dir.is_dir():
        for p in lbl_dir.iterdir():
            if p.suffix == ".txt":
                labels[p.stem] = p
    return images, labels


def available_splits(root, label_dir: str = "labels") -> list[str]:
    root = Path(root)
    return [s for s in SPLITS if (root / "images" / s).is_dir() or (root / label_dir / s).is_dir()]


@contextmanager
def _gc_paused():
    # parsing allocates hundreds of thousands of small acyclic tuples and the
    # cyclic collector would otherwise rescan them over and over
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def _pool_map(fn: Callable, items: list, n_jobs: int) -> list:
    with _gc_paused():
        if n_jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(n_jobs) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]


def load_split(
    root,
    split: str,
    *,
    image_size: Optional[tuple[int, int]] = None,
    sizes: Optional[Mapping] = None,
    parser: Callable = parse_label_file,
    label_dir: str = "labels",
    n_jobs: int = 1,
) -> tuple[FrameAnnotations, ...]:
    """Load one split, frames sorted by ``frame_id``."""
    root = Path(root)
    sizes = read_sizes(root) if sizes is None else sizes
    images, labels = _split_frame_ids(root, split, label_dir)

    def load(frame_id: str) -> FrameAnnotations:
        dims = sizes.get((split, frame_id))
        if dims is None and frame_id in images:
            dims = _image_header_size(images[frame_id])
        if dims is None:
            dims = image_size
        if dims is None:
            raise DataError(
                f"no image size for frame {frame_id!r} in split {split!r} "
                f"(no {SIZES_FILE} entry, no image, no default size)",
                path=labels.get(frame_id, root),
            )
        path = labels.get(frame_id)
        text = _read_text(path) if path is not None else ""
        try:
            return parser(text, dims[0], dims[1], frame_id)
        except DataError as exc:
            raise exc.with_path(path) from None

    return tuple(_pool_map(load, sorted(set(images) | set(labels)), n_jobs))


def load_dataset(
    root,
    *,
    splits=None,
    image_size: Optional[tuple[int, int]] = None,
    n_jobs: int = 1,
) -> DatasetIndex:
    root = Path(root)
    if not root.is_dir():
        raise IoFailure("dataset directory not found", path=root)
    sizes = read_sizes(root)
    names = available_splits(root) if splits is None else list(splits)
    frames = {
        s: load_split(root, s, image_size=image_size, sizes=sizes, n_jobs=n_jobs) for s in names
    }
    manifest = read_manifest(root)
    threshold = manifest.get("threshold")
    return DatasetIndex(
        frames,
        source=manifest.get("source", root.name),
        threshold=float(threshold) if threshold not in (None, "", "none") else None,
    )


def load_detections(
    run_dir,
    split: str,
    frames: Mapping[str, FrameAnnotations],
    *,
    n_jobs: int = 1,
) -> dict[str, FrameDetections]:
    """Read ``<run_dir>/<split>/*.txt`` against the annotated frames.

    Falls back to ``run_dir`` itself when it holds the detection files
    directly. A file for a frame that has no annotation raises
    :class:`UnknownFrameId` naming the file.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise IoFailure("detections directory not found", path=run_dir)
    det_dir = run_dir / split
    if not det_dir.is_dir():
        det_dir = run_dir
    paths = sorted(p for p in det_dir.iterdir() if p.suffix == ".txt")
    for p in paths:
        if p.stem not in frames:
            raise UnknownFrameId(p.stem, path=p)

    def load(path: Path) -> FrameDetections:
        frame = frames[path.stem]
        try:
            return parse_detection_file(
                _read_text(path), frame.image_width, frame.image_height, frame.frame_id
            )
        except DataError as exc:
            raise exc.with_path(path) from None

    return {d.frame_id: d for d in _pool_map(load, paths, n_jobs)}


# ---------------------------------------------------------------------------
# writing


def write_manifest(index: DatasetIndex, root) -> Path:
    threshold = "none" if index.threshold is None else f"{index.threshold:g}"
    lines = [f"source={index.source}", f"threshold={threshold}"]
    lines += [f"{split}={n}" for split, n in index.counts().items()]
    path = Path(root) / MANIFEST_FILE
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(root) -> dict[str, str]:
    path = Path(root) / MANIFEST_FILE
    if not path.exists():
        return {}
    out = {}
    for line in _read_text(path).splitlines():
        key, sep, value = line.partition("=")
        if sep:
            out[key.strip()] = value.strip()
    return out


def write_dataset(index: DatasetIndex, out_root, *, image_source=None) -> None:
    """Write labels, sizes and manifest; copy images from ``image_source``."""
    out_root = Path(out_root)
    try:
        for split, frames in index.splits.items():
            lbl_dir = out_root / "labels" / split
            lbl_dir.mkdir(parents=True, exist_ok=True)
            src_images = {}
            if image_source is not None:
                src_images, _ = _split_frame_ids(Path(image_source), split)
            if src_images:
                (out_root / "images" / split).mkdir(parents=True, exist_ok=True)
            for f in frames:
                (lbl_dir / f"{f.frame_id}.txt").write_text(serialize_label_file(f), encoding="utf-8")
                src = src_images.get(f.frame_id)
                if src is not None:
                    shutil.copy2(src, out_root / "images" / split / src.name)
        write_sizes(index, out_root)
        write_manifest(index, out_root)
    except OSError as exc:
        raise IoFailure(f"cannot write dataset ({exc.strerror})", path=exc.filename or out_root) from None
