import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longshot_bench.annotation_io import ClassLabel, PixelBox, boxes_to_xyxy
from longshot_bench.exceptions import MixedClasses
from longshot_bench.matching import (
    ConfusionCounts,
    ball_center_match,
    greedy_match_batched,
    iou,
    iou_matrix,
    match_ball_centers,
    match_frame,
)

from conftest import det, person, synthetic_scenario
from oracles import exact_iou

W, H = 1000, 1000


def test_iou_identical():
    assert iou(PixelBox(0, 0, 10, 10), PixelBox(0, 0, 10, 10)) == 1.0


def test_iou_disjoint():
    assert iou(PixelBox(0, 0, 1, 1), PixelBox(2, 2, 3, 3)) == 0.0
    # touching edges share no area
    assert iou(PixelBox(0, 0, 1, 1), PixelBox(1, 0, 2, 1)) == 0.0


def test_iou_half_overlap():
    # intersection 2, union 4 + 4 - 2 = 6
    assert iou(PixelBox(0, 0, 2, 2), PixelBox(1, 0, 3, 2)) == pytest.approx(1 / 3, abs=1e-15)


def test_iou_matrix_matches_scalar():
    rng = np.random.default_rng(1)
    a = np.sort(rng.uniform(0, 100, (7, 2, 2)), axis=1).transpose(0, 2, 1).reshape(7, 4)[:, [0, 2, 1, 3]]
    b = np.sort(rng.uniform(0, 100, (5, 2, 2)), axis=1).transpose(0, 2, 1).reshape(5, 4)[:, [0, 2, 1, 3]]
    m = iou_matrix(a, b)
    for i in range(7):
        for j in range(5):
            assert m[i, j] == pytest.approx(float(exact_iou(a[i], b[j])), abs=1e-12)


box_strategy = st.tuples(
    st.floats(0, 100), st.floats(0, 100), st.floats(0.1, 50), st.floats(0.1, 50)
).map(lambda t: PixelBox(t[0], t[1], t[0] + t[2], t[1] + t[3]))


@settings(max_examples=300, deadline=None)
@given(box_strategy, box_strategy, st.floats(0.01, 100))
def test_iou_symmetric_and_scale_invariant(a, b, s):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    scaled = iou(PixelBox(*(x * s for x in a)), PixelBox(*(x * s for x in b)))
    assert scaled == pytest.approx(v, abs=1e-12)


def _outcome(dets, gts, thr=0.5):
    return match_frame(dets, gts, W, H, thr)


def test_single_exact_detection():
    out = _outcome([det(1, (0.5, 0.5, 0.1, 0.2), 0.9)], [person(0.5, 0.5, 0.1, 0.2)])
    assert out.is_tp.tolist() == [True]
    assert out.fn_count == 0


def test_hand_traced_tp_fp_fn():
    gts = [person(0.3, 0.3, 0.1, 0.1), person(0.7, 0.7, 0.1, 0.1)]
    # shifted by 0.01 in x: overlap 0.09*0.1 / (0.02 - 0.009) = 0.818
    hit = det(1, (0.31, 0.3, 0.1, 0.1), 0.9)
    miss = det(1, (0.1, 0.9, 0.05, 0.05), 0.6)
    out = _outcome([miss, hit], gts)
    assert out.order.tolist() == [1, 0]
    assert out.is_tp.tolist() == [True, False]
    assert out.matched_gt.tolist() == [0, -1]
    assert out.counts() == ConfusionCounts(1, 1, 1)


def test_duplicate_detections_only_higher_confidence_wins():
    gt = [person(0.5, 0.5, 0.1, 0.1)]
    a = det(1, (0.5, 0.5, 0.1, 0.1), 0.6)
    b = det(1, (0.505, 0.5, 0.1, 0.1), 0.8)
    out = _outcome([a, b], gt)
    assert out.order.tolist() == [1, 0]
    assert out.is_tp.tolist() == [True, False]


def test_ties_use_file_order_then_lowest_gt_index():
    gts = [person(0.5, 0.5, 0.1, 0.1), person(0.5, 0.5, 0.1, 0.1)]
    d = [det(1, (0.5, 0.5, 0.1, 0.1), 0.7), det(1, (0.5, 0.5, 0.1, 0.1), 0.7)]
    out = _outcome(d, gts)
    assert out.order.tolist() == [0, 1]
    assert out.matched_gt.tolist() == [0, 1]


def test_highest_iou_gt_is_taken():
    gts = [person(0.5, 0.5, 0.1, 0.1), person(0.52, 0.5, 0.1, 0.1)]
    out = _outcome([det(1, (0.519, 0.5, 0.1, 0.1), 0.9)], gts)
    assert out.matched_gt.tolist() == [1]


def test_mixed_classes_rejected():
    with pytest.raises(MixedClasses):
        _outcome([det(0, (0.5, 0.5, 0.01, 0.01), 0.9)], [person(0.5, 0.5, 0.1, 0.1)])
    with pytest.raises(MixedClasses):
        _outcome([det(0, (0.5, 0.5, 0.01, 0.01), 0.9), det(1, (0.5, 0.5, 0.1, 0.1), 0.9)], [])


def test_empty_inputs():
    out = _outcome([], [person(0.5, 0.5, 0.1, 0.1)])
    assert out.fn_count == 1 and out.tp_count == 0
    out = _outcome([det(1, (0.5, 0.5, 0.1, 0.1), 0.3)], [])
    assert out.fp_count == 1


def test_bad_threshold():
    with pytest.raises(ValueError):
        _outcome([], [], 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_match_outcome_invariants(seed):
    frames, dets = synthetic_scenario(seed, n_frames=15)
    for f, d in zip(frames, dets):
        for label in ClassLabel:
            gts = f.of_class(label)
            ds = [x for x in d.detections if x.label == label]
            prev_tp = None
            for thr in (0.95, 0.75, 0.5, 0.3, 0.1):
                out = match_frame(ds, gts, f.image_width, f.image_height, thr)
                matched = out.matched_gt[out.matched_gt >= 0].tolist()
                assert len(matched) == len(set(matched))
                assert out.tp_count <= min(len(ds), len(gts))
                assert out.tp_count + out.fp_count == len(ds)
                assert out.fn_count == len(gts) - out.tp_count
                if prev_tp is not None:
                    assert out.tp_count >= prev_tp
                prev_tp = out.tp_count


def test_permutation_of_distinct_confidences_gives_same_outcome():
    frames, dets = synthetic_scenario(11, n_frames=10)
    rng = np.random.default_rng(0)
    for f, d in zip(frames, dets):
        ds = [x for x in d.detections if x.label == ClassLabel.PERSON]
        gts = f.of_class(ClassLabel.PERSON)
        base = match_frame(ds, gts, W, H, 0.5)
        perm = rng.permutation(len(ds))
        shuffled = match_frame([ds[i] for i in perm], gts, W, H, 0.5)
        assert shuffled.is_tp.tolist() == base.is_tp.tolist()
        assert shuffled.matched_gt.tolist() == base.matched_gt.tolist()
        assert shuffled.confidences.tolist() == base.confidences.tolist()


@pytest.mark.parametrize("seed", range(4))
def test_batched_engine_equals_reference(seed):
    frames, dets = synthetic_scenario(seed, n_frames=25, persons=(0, 10), conf_levels=[0.3, 0.5, 0.9])
    thresholds = np.array([0.01, 0.1, 0.5, 0.75, 0.95])
    for label in ClassLabel:
        per_frame = []
        for f, d in zip(frames, dets):
            ds = [x for x in d.detections if x.label == label]
            gts = f.of_class(label)
            per_frame.append((f, ds, gts))
        n_d = max(len(ds) for _, ds, _ in per_frame)
        n_g = max(len(g) for _, _, g in per_frame)
        d_pad = np.full((len(per_frame), n_d, 4), np.nan)
        g_pad = np.full((len(per_frame), n_g, 4), np.nan)
        scale = np.array([1280, 720, 1280, 720], dtype=float)
        refs = []
        for i, (f, ds, gts) in enumerate(per_frame):
            ref = [match_frame(ds, gts, f.image_width, f.image_height, t) for t in thresholds]
            refs.append(ref)
            if ds:
                order = ref[0].order
                d_pad[i, : len(ds)] = boxes_to_xyxy([ds[k].box for k in order]) * scale
            if gts:
                g_pad[i, : len(gts)] = boxes_to_xyxy([g.box for g in gts]) * scale
        tp = greedy_match_batched(d_pad, g_pad, thresholds)
        for i, (f, ds, _) in enumerate(per_frame):
            for t in range(len(thresholds)):
                assert tp[t, i, : len(ds)].tolist() == refs[i][t].is_tp.tolist()
                assert not tp[t, i, len(ds):].any()


def test_batched_engine_without_overlaps():
    det = np.array([[[0, 0, 10, 10], [20, 20, 30, 30]]], dtype=float)
    gt = np.array([[[50, 50, 60, 60], [np.nan] * 4]])
    tp = greedy_match_batched(det, gt, np.array([0.5]))
    assert tp.shape == (1, 1, 2) and not tp.any()


def test_ball_center_distance_zero():
    assert ball_center_match((10, 10), (10, 10), 5)


def test_ball_center_inclusive_boundary():
    assert ball_center_match((103, 104), (100, 100), 5)
    assert not ball_center_match((104, 104), (100, 100), 5)


def test_ball_center_radius_must_be_positive():
    with pytest.raises(ValueError):
        ball_center_match((0, 0), (0, 0), 0)


@settings(max_examples=200, deadline=None)
@given(
    st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
    st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
    st.floats(0.1, 50),
    st.floats(0, 50),
)
def test_ball_center_symmetric_and_monotone(p, q, r, extra):
    assert ball_center_match(p, q, r) == ball_center_match(q, p, r)
    if ball_center_match(p, q, r):
        assert ball_center_match(p, q, r + extra)


def test_match_ball_centers_takes_nearest_unmatched():
    gts = [(100, 100), (106, 100)]
    assert match_ball_centers([(104, 100), (103, 100)], gts, 5) == [1, 0]
    assert match_ball_centers([(104, 100), (104, 100), (104, 100)], gts, 5) == [1, 0, -1]


def test_confusion_counts_zero_denominators():
    c = ConfusionCounts(0, 0, 0)
    assert c.precision == 0.0 and c.recall == 0.0
    assert ConfusionCounts(2, 1, 1).precision == pytest.approx(2 / 3)
    assert (ConfusionCounts(1, 2, 3) + ConfusionCounts(1, 1, 1)) == ConfusionCounts(2, 3, 4)

