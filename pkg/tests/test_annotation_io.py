import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longshot_bench.annotation_io import (
    ClassLabel,
    FrameAnnotations,
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
from longshot_bench.exceptions import (
    ConfidenceOutOfRange,
    CoordinateOutOfRange,
    InvalidDims,
    MalformedLine,
    UnknownClass,
)

from conftest import random_box, synthetic_scenario


def test_parse_person_line_and_denormalize():
    frame = parse_label_file("1 0.500000 0.500000 0.100000 0.200000", 1280, 720, "f")
    (obj,) = frame.objects
    assert obj.label is ClassLabel.PERSON
    # cx*W -/+ w*W/2 = 640 -/+ 64, cy*H -/+ h*H/2 = 360 -/+ 72
    assert normalized_to_pixel(obj.box, 1280, 720) == pytest.approx((576, 288, 704, 432))


def test_empty_file():
    frame = parse_label_file("", 1280, 720, "f")
    assert frame.objects == ()
    assert frame.frame_id == "f"


def test_wrong_field_count():
    with pytest.raises(MalformedLine) as exc:
        parse_label_file("0 0.5 0.5", 1280, 720, "f")
    assert exc.value.line_number == 1


@pytest.mark.parametrize(
    "text, error, line",
    [
        ("1 0.5 0.5 0.1 abc", MalformedLine, 1),
        ("0 0.5 0.5 0.1 0.1\nx 0.5 0.5 0.1 0.1", MalformedLine, 2),
        ("0 0.5 0.5 0.1 0.1\n\n2 0.5 0.5 0.1 0.1", UnknownClass, 3),
        ("-1 0.5 0.5 0.1 0.1", UnknownClass, 1),
        ("1 1.5 0.5 0.1 0.1", CoordinateOutOfRange, 1),
        ("1 0.5 0.5 0.0 0.1", CoordinateOutOfRange, 1),
        ("1 0.98 0.5 0.1 0.1", CoordinateOutOfRange, 1),
        ("1 nan 0.5 0.1 0.1", CoordinateOutOfRange, 1),
    ],
)
def test_parse_errors_name_the_line(text, error, line):
    with pytest.raises(error) as exc:
        parse_label_file(text, 1280, 720, "f")
    assert exc.value.line_number == line


def test_comments_blank_lines_and_trailing_whitespace():
    text = "# header\n\n1 0.5 0.5 0.1 0.2   \n   \n0 0.25 0.25 0.01 0.01\t\n"
    frame = parse_label_file(text, 1280, 720, "f")
    assert [o.label for o in frame.objects] == [ClassLabel.PERSON, ClassLabel.BALL]


def test_small_overshoot_is_clamped_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        frame = parse_label_file("1 0.9502 0.5 0.1 0.1", 1280, 720, "f")
    box = frame.objects[0].box
    assert box.cx + box.w / 2 <= 1.0 + 1e-12
    assert box.cx - box.w / 2 == pytest.approx(0.9002)
    assert "clamped" in caplog.text


def test_overshoot_within_edge_eps_is_left_alone(caplog):
    with caplog.at_level(logging.WARNING):
        frame = parse_label_file("1 0.9500004 0.5 0.1 0.1", 1280, 720, "f")
    assert frame.objects[0].box.cx == 0.9500004
    assert caplog.text == ""


def test_invalid_dims():
    with pytest.raises(InvalidDims):
        parse_label_file("", 0, 720, "f")
    with pytest.raises(InvalidDims):
        normalized_to_pixel(NormalizedBox(0.5, 0.5, 0.1, 0.1), 100, -1)


def test_custom_class_scheme():
    with pytest.raises(UnknownClass):
        parse_label_file("1 0.5 0.5 0.1 0.1", 100, 100, "f", classes={0})


def test_serialize_zero_objects():
    assert serialize_label_file(FrameAnnotations("f", 1280, 720, ())) == ""


def test_serialize_ball():
    frame = FrameAnnotations(
        "f", 1280, 720, (GroundTruthObject(ClassLabel.BALL, NormalizedBox(0.5, 0.5, 0.01, 0.01)),)
    )
    assert serialize_label_file(frame) == "0 0.500000 0.500000 0.010000 0.010000\n"


def test_round_trip_random_frames():
    rng = np.random.default_rng(0)
    for i in range(100):
        objects = tuple(
            GroundTruthObject(ClassLabel(int(rng.integers(0, 2))), random_box(rng))
            for _ in range(rng.integers(0, 30))
        )
        frame = FrameAnnotations(f"f{i}", 1920, 1080, objects)
        back = parse_label_file(serialize_label_file(frame), 1920, 1080, frame.frame_id)
        assert [o.label for o in back.objects] == [o.label for o in objects]
        for a, b in zip(back.objects, objects):
            assert np.max(np.abs(np.subtract(a.box, b.box))) <= 1e-6


def test_parse_detection_line():
    fd = parse_detection_file("0 0.5 0.5 0.01 0.01 0.930000", 1280, 720, "f")
    (d,) = fd.detections
    assert d.label is ClassLabel.BALL
    assert d.confidence == 0.93


def test_confidence_out_of_range():
    with pytest.raises(ConfidenceOutOfRange) as exc:
        parse_detection_file("0 0.5 0.5 0.01 0.01 0.9\n0 0.5 0.5 0.01 0.01 1.5", 1280, 720, "f")
    assert exc.value.line_number == 2


def test_detection_file_order_preserved_on_ties():
    text = "1 0.2 0.2 0.1 0.1 0.5\n1 0.7 0.7 0.1 0.1 0.5\n0 0.5 0.5 0.01 0.01 0.9\n"
    fd = parse_detection_file(text, 1280, 720, "f")
    assert [d.box.cx for d in fd.detections] == [0.2, 0.7, 0.5]


def test_detection_file_needs_six_fields():
    with pytest.raises(MalformedLine):
        parse_detection_file("0 0.5 0.5 0.01 0.01", 1280, 720, "f")


def test_detection_round_trip():
    _, dets = synthetic_scenario(3, n_frames=5)
    for fd in dets:
        back = parse_detection_file(serialize_detection_file(fd), 1280, 720, fd.frame_id)
        assert len(back.detections) == len(fd.detections)
        for a, b in zip(back.detections, fd.detections):
            assert a.label == b.label
            assert abs(a.confidence - b.confidence) <= 5e-7
            assert np.max(np.abs(np.subtract(a.box, b.box))) <= 1e-6


def test_full_image_box():
    assert normalized_to_pixel(NormalizedBox(0.5, 0.5, 1.0, 1.0), 100, 100) == (0, 0, 100, 100)


def test_left_half_box():
    b = normalized_to_pixel(NormalizedBox(0.25, 0.5, 0.5, 0.5), 1280, 720)
    assert (b.x_min, b.x_max) == (0.0, 640.0)


def test_pixel_box_properties():
    b = PixelBox(10, 20, 30, 60)
    assert b.area == 800
    assert b.center == (20, 40)


def test_frame_validation():
    with pytest.raises(ValueError):
        FrameAnnotations("", 10, 10)
    with pytest.raises(InvalidDims):
        FrameAnnotations("f", 10, 0)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0.001, 0.999),
    st.floats(0.001, 0.999),
    st.floats(0.001, 1.0),
    st.floats(0.001, 1.0),
    st.integers(1, 8000),
    st.integers(1, 8000),
)
def test_pixel_round_trip_property(cx, cy, w, h, width, height):
    box = NormalizedBox(cx, cy, w, h)
    back = pixel_to_normalized(normalized_to_pixel(box, width, height), width, height)
    assert np.max(np.abs(np.subtract(back, box))) <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.floats(0.01, 0.99), st.floats(0.01, 0.99),
                          st.floats(0.001, 0.02), st.floats(0.001, 0.02)), max_size=20))
def test_serialize_parse_identity_property(rows):
    objects = tuple(GroundTruthObject(ClassLabel(c), NormalizedBox(cx, cy, w, h)) for c, cx, cy, w, h in rows)
    frame = FrameAnnotations("f", 1280, 720, objects)
    back = parse_label_file(serialize_label_file(frame), 1280, 720, "f")
    assert len(back.objects) == len(objects)
    for a, b in zip(back.objects, objects):
        assert a.label == b.label
        assert np.max(np.abs(np.subtract(a.box, b.box))) <= 1e-6


# A leading comment forces the line-by-line parser, so these compare the
# whole-file fast path against it.

raw_row = st.tuples(
    st.sampled_from(["0", "1"]),
    st.floats(-0.01, 1.01),
    st.floats(-0.01, 1.01),
    st.floats(0.0, 1.01),
    st.floats(0.0, 1.01),
    st.floats(0.0, 1.0),
)


def _outcome(fn, text):
    try:
        return fn(text, 1920, 1080, "f")
    except Exception as exc:
        return type(exc)


@settings(max_examples=300, deadline=None)
@given(st.lists(raw_row, max_size=8), st.sampled_from(["\n", "\r\n", "\n\n"]))
def test_fast_path_agrees_with_line_parser(rows, newline):
    det_text = newline.join(f"{c} {x!r} {y!r} {w!r} {h!r} {p!r}" for c, x, y, w, h, p in rows)
    lbl_text = newline.join(f"{c} {x!r} {y!r} {w!r} {h!r}" for c, x, y, w, h, _ in rows)
    assert _outcome(parse_detection_file, det_text) == _outcome(parse_detection_file, "# x\n" + det_text)
    assert _outcome(parse_label_file, lbl_text) == _outcome(parse_label_file, "# x\n" + lbl_text)


@pytest.mark.parametrize(
    "text",
    [
        "1 0.5 0.5 0.1\n0 0.5 0.5 0.1 0.1 0.1",  # field counts that only add up overall
        "01 0.5 0.5 0.1 0.1",
        "1 0.5 0.5 0.1 0.1\n2 0.5 0.5 0.1 0.1",
        "1 nan 0.5 0.1 0.1",
    ],
)
def test_fast_path_falls_back_on_odd_input(text):
    assert _outcome(parse_label_file, text) == _outcome(parse_label_file, "# x\n" + text)
