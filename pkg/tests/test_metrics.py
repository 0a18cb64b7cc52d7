import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import pair_counting_scores

from planeformer.metrics import (
    DEPTH_THRESHOLDS,
    NORMAL_THRESHOLDS,
    MetricInputError,
    aggregate_recall,
    depth_scores,
    plane_pixel_recall,
    seg_scores,
)
from planeformer.scene_synth import SceneConfig, generate_scene
from planeformer.segmentation import KeptInstance, SegmentationResult, ground_truth_result


@pytest.fixture(scope="module")
def scenes():
    cfg = SceneConfig(width=96, height=72)
    return [generate_scene(s, cfg) for s in range(5)]


def test_thresholds():
    assert DEPTH_THRESHOLDS[0] == 0.0 and DEPTH_THRESHOLDS[-1] == 0.6 and len(DEPTH_THRESHOLDS) == 13
    assert NORMAL_THRESHOLDS == (5.0, 30.0)


def test_gt_prediction_recall_one(scenes):
    for s in scenes:
        res = ground_truth_result(s)
        c = plane_pixel_recall(res, s)
        assert all(r == 1.0 for t, r in zip(c.thresholds, c.plane_recall) if t > 0)
        assert all(r == 1.0 for t, r in zip(c.thresholds, c.pixel_recall) if t > 0)
        assert c.plane_recall[0] == 0.0  # strict inequality at a zero threshold
        n = plane_pixel_recall(res, s, NORMAL_THRESHOLDS, "normal")
        assert n.plane_recall == [1.0, 1.0]


def test_iou_gate():
    # GT: one 10x10 plane; prediction covers 4 of its columns plus 6 outside columns -> IOU 40/160
    from planeformer.geometry import CameraIntrinsics, PlaneParam, plane_depth_map

    K = CameraIntrinsics.default(20, 10)
    plane = PlaneParam((0, 0, 0.5))
    gt_mask = np.zeros((10, 20), np.int32)
    gt_mask[:, :10] = 1
    pred_mask = np.zeros((10, 20), np.int32)
    pred_mask[:, 6:16] = 1
    depth = plane_depth_map(plane, K)

    class GT:
        mask, planes = gt_mask, [plane]

    GT.depth = depth
    pred = SegmentationResult(pred_mask, [KeptInstance(1.0, plane, np.zeros(8))], depth.copy())
    c = plane_pixel_recall(pred, GT)
    assert max(c.plane_recall) == 0.0


def perturbed(scene, plane_index, offset):
    res = ground_truth_result(scene)
    res.assembled_depth = res.assembled_depth.copy()
    res.assembled_depth[scene.mask == plane_index] += offset
    return res


def test_perturbation_flips_at_threshold(scenes):
    for s in scenes:
        res = perturbed(s, 1, 0.2)
        c = plane_pixel_recall(res, s, (0.15, 0.2 - 1e-9, 0.2 + 1e-9, 0.25))
        M = s.num_planes
        assert c.plane_recall == [(M - 1) / M, (M - 1) / M, 1.0, 1.0]


def test_recall_flags():
    s = generate_scene(0, SceneConfig(width=96, height=72))
    res = ground_truth_result(s)
    greedy = plane_pixel_recall(res, s, matching="greedy")
    optimal = plane_pixel_recall(res, s, matching="optimal")
    assert greedy.plane_recall == optimal.plane_recall
    image = plane_pixel_recall(res, s, pixel_denominator="image")
    assert image.pixel_recall[-1] == pytest.approx((s.mask > 0).mean())
    with pytest.raises(MetricInputError):
        plane_pixel_recall(res, s, matching="nearest")


def test_empty_gt_is_skipped():
    s = generate_scene(0, SceneConfig(width=96, height=72))

    class Empty:
        mask = np.zeros_like(s.mask)
        planes = []
        depth = s.depth

    assert plane_pixel_recall(ground_truth_result(s), Empty) is None


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_recall_monotone(seed):
    s = generate_scene(seed % 50, SceneConfig(width=64, height=48))
    rng = np.random.default_rng(seed)
    res = ground_truth_result(s)
    res.assembled_depth = res.assembled_depth + rng.uniform(0, 0.6, size=s.depth.shape)
    c = plane_pixel_recall(res, s)
    assert all(np.diff(c.plane_recall) >= 0) and all(np.diff(c.pixel_recall) >= 0)


def test_aggregate_pools_counts(scenes):
    curves = [plane_pixel_recall(perturbed(s, 1, 0.3), s) for s in scenes] + [None]
    agg = aggregate_recall(curves)
    total = sum(s.num_planes for s in scenes)
    assert agg.num_gt_planes == total
    assert agg.at(0.25)[0] == pytest.approx((total - len(scenes)) / total)
    assert agg.at(0.35)[0] == pytest.approx(1.0)


def test_seg_scores_identity():
    rng = np.random.default_rng(0)
    m = rng.integers(0, 5, (9, 7))
    sc = seg_scores(m, m)
    assert (sc.VI, sc.RI, sc.SC) == (0.0, 1.0, 1.0)


def test_seg_scores_oracle_random_small_masks():
    rng = np.random.default_rng(1)
    for _ in range(100):
        h, w = rng.integers(1, 5, size=2)
        a = rng.integers(0, rng.integers(1, 5), (h, w))
        b = rng.integers(0, rng.integers(1, 5), (h, w))
        got = seg_scores(b, a)
        vi, ri, sc = pair_counting_scores(b, a)
        assert got.VI == pytest.approx(vi, abs=1e-12)
        assert got.RI == pytest.approx(ri, abs=1e-12)
        assert got.SC == pytest.approx(sc, abs=1e-12)


def test_checkerboard_rand_index():
    gt = np.array([[0, 1], [1, 0]])
    pred = np.ones((2, 2), int)
    # 6 pairs, the 2 same-label gt pairs agree with the one-segment prediction
    assert seg_scores(pred, gt).RI == pytest.approx(2 / 6)


def test_split_region_covering():
    gt = np.ones((4, 4), int)
    pred = np.zeros((4, 4), int)
    pred[:, 2:] = 1
    assert seg_scores(pred, gt).SC == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_seg_scores_label_permutation_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 4, (6, 5))
    b = rng.integers(0, 3, (6, 5))
    perm = rng.permutation(10)
    base = seg_scores(b, a)
    moved = seg_scores(perm[b], perm[a])
    assert moved.RI == pytest.approx(base.RI, abs=1e-12) and moved.SC == pytest.approx(base.SC, abs=1e-12)
    assert seg_scores(a, b).VI == pytest.approx(base.VI, abs=1e-12)
    assert base.VI >= 0 and 0 <= base.RI <= 1 and 0 <= base.SC <= 1


def test_depth_scores_examples():
    rng = np.random.default_rng(3)
    gt = rng.uniform(0.5, 5, (10, 12))
    same = depth_scores(gt, gt)
    assert (same.Rel, same.RMSE, same.delta1, same.delta2, same.delta3) == (0.0, 0.0, 1.0, 1.0, 1.0)
    scaled = depth_scores(gt * 1.25, gt)
    # the ratio lands on 1.25 up to rounding either side, so check only that no pixel is well inside
    assert scaled.delta2 == 1.0
    exact = depth_scores(np.full((2, 2), 1.25), np.ones((2, 2)))
    assert exact.delta1 == 0.0 and exact.delta2 == 1.0


def test_depth_scores_reference():
    rng = np.random.default_rng(4)
    gt = rng.uniform(0.5, 5, (9, 11))
    pred = gt * rng.uniform(0.6, 1.6, gt.shape)
    valid = rng.uniform(size=gt.shape) < 0.8
    got = depth_scores(pred, gt, valid)
    rel = log = sq = 0.0
    d = [0, 0, 0]
    n = 0
    for v in range(9):
        for u in range(11):
            if not valid[v, u]:
                continue
            p, g = pred[v, u], gt[v, u]
            n += 1
            rel += abs(p - g) / g
            log += abs(math.log10(p) - math.log10(g))
            sq += (p - g) ** 2
            r = max(p / g, g / p)
            for i in range(3):
                d[i] += r < 1.25 ** (i + 1)
    assert got.Rel == pytest.approx(rel / n, rel=1e-12)
    assert got.log10 == pytest.approx(log / n, rel=1e-12)
    assert got.RMSE == pytest.approx(math.sqrt(sq / n), rel=1e-12)
    assert [got.delta1, got.delta2, got.delta3] == [x / n for x in d]
    assert got.delta1 <= got.delta2 <= got.delta3


def test_depth_scores_errors():
    with pytest.raises(MetricInputError):
        depth_scores(np.ones((2, 2)), np.ones((2, 2)), np.zeros((2, 2), bool))
    with pytest.raises(MetricInputError):
        depth_scores(np.zeros((2, 2)), np.ones((2, 2)))
    with pytest.raises(MetricInputError):
        seg_scores(np.zeros((2, 2)), np.zeros((2, 3)))
