"""Command-line front end: ``longshot-bench {convert,filter,stats,eval,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .dataset_tools import (
    DEFAULT_BALL_BOX_SIDE,
    DEFAULT_HEIGHT_BIN,
    DEFAULT_HEIGHT_THRESHOLD,
    DatasetIndex,
    center_crop_rect,
    convert_source_annotations,
    crop_annotations,
    dataset_stats,
    filter_long_shot,
)
from .exceptions import BenchError, ConfigError, DataError, IoFailure, UsageError
from .layout import available_splits, load_dataset, load_detections, load_split, read_sizes, write_dataset
from .metrics import EvalConfig, evaluate
from .report import RENDERERS, RunResult
from .timing import parse_timing_log, summarize_timing

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("image size must be positive")
    return w, h


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _out(args, text: str) -> None:
    if not args.quiet:
        sys.stdout.write(text)


def _print_counts(args, index: DatasetIndex, verb: str) -> None:
    for split, n in index.counts().items():
        _out(args, f"{split}: {n} frames {verb}\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_convert(args) -> int:
    src = Path(args.source)
    if not src.is_dir():
        raise IoFailure("source directory not found", path=src)
    sizes = read_sizes(src)

    def parser(text, w, h, frame_id):
        return convert_source_annotations(text, w, h, frame_id, ball_box_side=args.ball_box_side)

    splits = {}
    for split in available_splits(src, args.source_dir):
        frames = load_split(
            src, split, image_size=args.image_size, sizes=sizes, parser=parser,
            label_dir=args.source_dir, n_jobs=args.threads,
        )
        if args.center_crop:
            cw, ch = args.center_crop
            frames = tuple(
                crop_annotations(f, center_crop_rect(f.image_width, f.image_height, cw, ch))
                for f in frames
            )
        splits[split] = frames
    index = DatasetIndex(splits, source=src.name)
    # cropped labels no longer describe the original images
    write_dataset(index, args.output, image_source=None if args.center_crop else src)
    _print_counts(args, index, "converted")
    return EXIT_OK


def cmd_filter(args) -> int:
    index = load_dataset(args.dataset, image_size=args.image_size, n_jobs=args.threads)
    kept = filter_long_shot(index, args.height_threshold)
    write_dataset(kept, args.output, image_source=args.dataset)
    before = index.counts()
    for split, n in kept.counts().items():
        _out(args, f"{split}: {n}/{before[split]} frames kept\n")
    return EXIT_OK


def cmd_stats(args) -> int:
    index = load_dataset(args.dataset, splits=args.split, image_size=args.image_size, n_jobs=args.threads)
    summary = dataset_stats(index, args.bin_width)
    text = summary.to_json() if args.format == "json" else summary.render_text()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        _out(args, text)
    return EXIT_OK


def _eval_config(args) -> EvalConfig:
    config = EvalConfig()
    if args.config:
        config = EvalConfig.from_file(args.config)
    overrides = {
        key: getattr(args, key)
        for key in ("iou_threshold", "ball_radius_px", "ball_conf_threshold", "coco")
        if getattr(args, key) is not None
    }
    return EvalConfig.from_mapping(overrides, config)


def cmd_eval(args) -> int:
    config = _eval_config(args)
    run_dir = Path(args.detections)
    run_name = args.run_name or run_dir.name
    if not Path(args.dataset).is_dir():
        raise IoFailure("dataset directory not found", path=args.dataset)
    frames = load_split(args.dataset, args.split, image_size=args.image_size, n_jobs=args.threads)
    by_id = {f.frame_id: f for f in frames}
    detections = load_detections(run_dir, args.split, by_id, n_jobs=args.threads)
    report = evaluate(frames, detections, config, n_jobs=args.threads)
    if args.timing:
        try:
            text = Path(args.timing).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read timing log ({exc.strerror})", path=args.timing) from None
        try:
            summary = summarize_timing(parse_timing_log(text))
        except DataError as exc:
            raise exc.with_path(args.timing) from None
        report = report.with_timing(summary.mean_inference_ms, summary.mean_total_ms)
    result = RunResult(
        run_name,
        report,
        config=config.to_dict(),
        extra={"split": args.split, "frames": len(frames)},
    )
    output = Path(args.output) if args.output else Path(f"{run_name}.json")
    result.save(output)
    _out(args, f"wrote {output}\n")
    return EXIT_OK


def cmd_report(args) -> int:
    results = [RunResult.load(p) for p in args.results]
    text = RENDERERS[args.format](results)
    if args.output:
        try:
            Path(args.output).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write report ({exc.strerror})", path=args.output) from None
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=default(None), help="key=value evaluation config file")
    parser.add_argument("--threads", type=_positive_int, default=default(1), help="worker threads")
    parser.add_argument("--quiet", action="store_true", default=default(False), help="no progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="longshot-bench", description="Long-shot player/ball detection benchmark")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_options(p, suppress=True)
        p.set_defaults(func=func)
        return p

    size_help = "fallback WIDTHxHEIGHT for frames without sizes.csv entry or image"

    p = add("convert", cmd_convert, "convert pixel-space source annotations to two-class YOLO labels")
    p.add_argument("source", help="directory with <source-dir>/{split}/*.txt and optional images/")
    p.add_argument("output", help="output dataset directory")
    p.add_argument("--source-dir", default="source", help="annotation subdirectory (default: source)")
    p.add_argument("--ball-box-side", type=float, default=DEFAULT_BALL_BOX_SIDE,
                   help="side in pixels of the box drawn around ball points (default: 10)")
    p.add_argument("--center-crop", type=_size, metavar="WxH", help="re-express labels in a center crop")
    p.add_argument("--image-size", type=_size, metavar="WxH", help=size_help)

    p = add("filter", cmd_filter, "keep long-shot frames (tallest person at most the threshold)")
    p.add_argument("dataset")
    p.add_argument("output")
    p.add_argument("--height-threshold", type=float, default=DEFAULT_HEIGHT_THRESHOLD,
                   help="max person box height in pixels, inclusive (default: 250)")
    p.add_argument("--image-size", type=_size, metavar="WxH", help=size_help)

    p = add("stats", cmd_stats, "resolution, tallest-person and ball-presence statistics")
    p.add_argument("dataset")
    p.add_argument("--split", action="append", choices=["train", "valid", "test"])
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--bin-width", type=_positive_int, default=DEFAULT_HEIGHT_BIN)
    p.add_argument("--image-size", type=_size, metavar="WxH", help=size_help)
    p.add_argument("-o", "--output")

    p = add("eval", cmd_eval, "score one detection run against a dataset split")
    p.add_argument("dataset")
    p.add_argument("detections", help="run directory holding {split}/<frame_id>.txt")
    p.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p.add_argument("--run-name")
    p.add_argument("--timing", help="CSV latency log frame_id,inference_ms[,total_ms]")
    p.add_argument("-o", "--output", help="run result path (default: <run-name>.json)")
    p.add_argument("--iou-threshold", type=float)
    p.add_argument("--ball-radius-px", type=float)
    p.add_argument("--ball-conf-threshold", type=float)
    p.add_argument("--coco", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--image-size", type=_size, metavar="WxH", help=size_help)

    p = add("report", cmd_report, "render run results as a comparison table")
    p.add_argument("results", nargs="+")
    p.add_argument("--format", choices=sorted(RENDERERS), default="markdown")
    p.add_argument("-o", "--output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
