"""Pixel AuPRC and component-level sIoU/PPV/F1 against brute-force references."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import (oracle_average_precision, oracle_component_report,
                     oracle_components, oracle_ppv, oracle_siou)
from roadscale.metrics import (DEFAULT_TAUS, DEFAULT_THRESHOLD,
                               MetricAccumulator, ScoreMap, auprc,
                               component_f1, components, ppv, siou)


def random_instances(rng, h, w, max_instances=4):
    """Random rectangle instances; guaranteed at least one background pixel."""
    gt = np.zeros((h, w), dtype=np.int64)
    for k in range(int(rng.integers(0, max_instances + 1))):
        rh, rw = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        r0, c0 = int(rng.integers(0, h)), int(rng.integers(0, w))
        gt[r0:r0 + rh, c0:c0 + rw] = k + 1
    if gt.all():
        gt[0, 0] = 0
    return gt


def quantized_scores(rng, h, w, levels=64):
    return rng.integers(0, levels + 1, size=(h, w)).astype(np.float64) / levels


# ---------------------------------------------------------------------------
# auprc

def test_auprc_perfect_scores():
    gt = np.array([[1, 0], [1, 0]])
    assert auprc(gt.astype(float), gt) == pytest.approx(1.0, abs=1e-12)


def test_auprc_two_step_example():
    gt = np.array([[1, 0, 1, 0]])
    scores = np.array([[0.9, 0.8, 0.7, 0.1]])
    expected = 0.5 * 1.0 + 0.5 * (2.0 / 3.0)
    assert auprc(scores, gt) == pytest.approx(expected, abs=1e-12)
    assert auprc(scores, gt) == pytest.approx(
        oracle_average_precision(scores, gt > 0), abs=1e-12)


def test_auprc_inverted_scores_match_oracle():
    gt = np.array([[1, 0, 1, 0, 0, 1]])
    scores = 1.0 - gt.astype(float)
    assert auprc(scores, gt) == pytest.approx(
        oracle_average_precision(scores, gt > 0), abs=1e-12)


def test_auprc_all_ties_equals_prevalence():
    gt = np.zeros((4, 4), dtype=int)
    gt[:2, :2] = 1
    scores = np.full((4, 4), 0.5)
    assert auprc(scores, gt) == pytest.approx(4 / 16, abs=1e-12)


def test_auprc_degenerate_gt_raises():
    with pytest.raises(ValueError):
        auprc(np.zeros((3, 3)), np.zeros((3, 3), dtype=int))
    with pytest.raises(ValueError):
        auprc(np.ones((3, 3)), np.ones((3, 3), dtype=int))


def test_auprc_respects_eval_mask():
    gt = np.array([[1, 0], [0, 0]])
    scores = np.array([[1.0, 0.0], [1.0, 0.0]])
    # the confidently wrong pixel at (1, 0) sits outside the mask
    mask = np.array([[True, True], [False, True]])
    assert auprc(ScoreMap(scores, mask), gt) == pytest.approx(1.0, abs=1e-12)
    assert auprc(scores, gt) < 1.0


def test_auprc_shape_mismatch_raises():
    with pytest.raises(ValueError):
        auprc(np.zeros((2, 3)), np.zeros((3, 2), dtype=int))


@given(st.integers(0, 2 ** 32 - 1))
def test_auprc_matches_oracle_on_random_maps(seed):
    rng = np.random.default_rng(seed)
    h, w = int(rng.integers(2, 17)), int(rng.integers(2, 17))
    gt = random_instances(rng, h, w)
    if not (gt > 0).any():
        gt[0, 0] = 1
    scores = quantized_scores(rng, h, w)
    assert auprc(scores, gt) == pytest.approx(
        oracle_average_precision(scores, gt > 0), abs=1e-9)


@given(st.integers(0, 2 ** 32 - 1))
def test_auprc_invariant_to_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    gt = random_instances(rng, 8, 8)
    if not (gt > 0).any():
        gt[0, 0] = 1
    scores = quantized_scores(rng, 8, 8)
    base = auprc(scores, gt)
    assert auprc(scores / 2.0, gt) == pytest.approx(base, abs=1e-12)
    assert auprc(scores ** 2, gt) == pytest.approx(base, abs=1e-12)


# ---------------------------------------------------------------------------
# ScoreMap validation

def test_scoremap_rejects_out_of_range():
    with pytest.raises(ValueError):
        ScoreMap(np.array([[1.5]]))
    with pytest.raises(ValueError):
        ScoreMap(np.array([[-0.1]]))
    with pytest.raises(ValueError):
        ScoreMap(np.array([[np.nan]]))


def test_scoremap_rejects_mask_shape_mismatch():
    with pytest.raises(ValueError):
        ScoreMap(np.zeros((2, 2)), np.ones((3, 3), dtype=bool))


# ---------------------------------------------------------------------------
# components

def test_components_diagonal_pixels_connect():
    mask = np.array([[1, 0], [0, 1]], dtype=bool)
    labels = components(mask)
    assert labels.max() == 1
    assert labels[0, 0] == labels[1, 1] == 1


def test_components_empty_mask():
    assert components(np.zeros((5, 5), dtype=bool)).max() == 0


def test_components_ids_in_scan_order():
    mask = np.zeros((5, 7), dtype=bool)
    mask[4, 0] = True     # encountered last in raster order
    mask[0, 5] = True     # encountered first
    mask[2, 2] = True
    labels = components(mask)
    assert labels[0, 5] == 1
    assert labels[2, 2] == 2
    assert labels[4, 0] == 3


@given(st.integers(0, 2 ** 32 - 1))
def test_components_match_flood_fill_oracle(seed):
    rng = np.random.default_rng(seed)
    h, w = int(rng.integers(1, 20)), int(rng.integers(1, 20))
    mask = rng.random((h, w)) < 0.4
    np.testing.assert_array_equal(components(mask), oracle_components(mask))


# ---------------------------------------------------------------------------
# siou / ppv

def _siou_fixture():
    k = np.zeros((10, 10), dtype=bool)
    k[0:2, 0:5] = True                      # 10-px ground-truth component
    p = np.zeros((10, 10), dtype=bool)
    p[0, 0:5] = True                        # 5 px inside K
    p[5, 0:5] = True                        # 5 px outside
    return k, p


def test_siou_reduces_to_iou_without_other_gt():
    k, p = _siou_fixture()
    other = np.zeros_like(k)
    assert siou(k, p, other) == pytest.approx(5 / 15, abs=1e-12)


def test_siou_discounts_pixels_on_other_gt():
    k, p = _siou_fixture()
    other = np.zeros_like(k)
    other[5, 0:5] = True                    # the stray pixels sit on another component
    assert siou(k, p, other) == pytest.approx(5 / 10, abs=1e-12)
    assert siou(k, p, other) == oracle_siou(k, p, other)


def test_siou_perfect_match():
    k, _ = _siou_fixture()
    assert siou(k, k, np.zeros_like(k)) == 1.0


def test_siou_empty_gt_component_raises():
    with pytest.raises(ValueError):
        siou(np.zeros((3, 3), dtype=bool), np.ones((3, 3), dtype=bool),
             np.zeros((3, 3), dtype=bool))


def test_ppv_examples():
    gt = np.zeros((4, 4), dtype=bool)
    gt[0] = True
    pred = np.zeros((4, 4), dtype=bool)
    pred[0, :2] = True
    assert ppv(pred, gt) == 1.0

    pred8 = np.zeros((4, 4), dtype=bool)
    pred8[1:3, :] = True                    # 8 px, 2 of them on gt
    gt2 = np.zeros((4, 4), dtype=bool)
    gt2[1, :2] = True
    assert ppv(pred8, gt2) == pytest.approx(0.25, abs=1e-12)
    assert ppv(pred8, gt2) == oracle_ppv(pred8, gt2)


def test_ppv_empty_component_raises():
    with pytest.raises(ValueError):
        ppv(np.zeros((3, 3), dtype=bool), np.ones((3, 3), dtype=bool))


# ---------------------------------------------------------------------------
# component_f1

def test_component_f1_perfect_prediction():
    rng = np.random.default_rng(5)
    gt = random_instances(rng, 16, 16)
    if not (gt > 0).any():
        gt[2:4, 2:4] = 1
    report = component_f1((gt > 0).astype(float), gt)
    assert report.mean_f1 == 1.0
    assert report.mean_siou == 1.0
    assert report.mean_ppv == 1.0
    assert report.auprc == pytest.approx(1.0, abs=1e-12)


def test_component_f1_empty_prediction():
    gt = np.zeros((8, 8), dtype=int)
    gt[2:4, 2:4] = 1
    report = component_f1(np.zeros((8, 8)), gt)
    assert all(v == 0.0 for v in report.f1_at_tau.values())
    assert report.mean_f1 == 0.0
    assert report.ppv_per_pred == []


def test_component_f1_default_taus():
    assert DEFAULT_TAUS == tuple(round(0.25 + 0.05 * i, 2) for i in range(11))
    assert DEFAULT_TAUS[0] == 0.25 and DEFAULT_TAUS[-1] == 0.75
    assert DEFAULT_THRESHOLD == 0.5


def test_component_f1_rejects_bad_taus():
    gt = np.zeros((4, 4), dtype=int)
    gt[0, 0] = 1
    with pytest.raises(ValueError):
        component_f1(np.zeros((4, 4)), gt, taus=())
    with pytest.raises(ValueError):
        component_f1(np.zeros((4, 4)), gt, taus=(0.0, 0.5))


def test_component_f1_mean_is_exact_mean_of_taus():
    rng = np.random.default_rng(12)
    gt = random_instances(rng, 20, 20)
    report = component_f1(quantized_scores(rng, 20, 20), gt)
    assert report.mean_f1 == float(np.mean(list(report.f1_at_tau.values())))
    for value in report.f1_at_tau.values():
        assert 0.0 <= value <= 1.0


def test_component_f1_no_gt_no_pred_is_perfect():
    report = component_f1(np.zeros((6, 6)), np.zeros((6, 6), dtype=int))
    assert report.mean_f1 == 1.0
    assert report.auprc is None
    assert report.mean_siou is None and report.mean_ppv is None


def test_false_positive_component_never_raises_f1():
    gt = np.zeros((12, 12), dtype=int)
    gt[2:5, 2:5] = 1
    base_scores = np.zeros((12, 12))
    base_scores[2:5, 2:5] = 1.0
    with_fp = base_scores.copy()
    with_fp[8:10, 8:10] = 1.0               # extra component on background
    base = component_f1(base_scores, gt)
    worse = component_f1(with_fp, gt)
    for tau in DEFAULT_TAUS:
        assert worse.f1_at_tau[tau] <= base.f1_at_tau[tau]


@given(st.integers(0, 2 ** 32 - 1))
def test_component_f1_matches_set_arithmetic_oracle(seed):
    rng = np.random.default_rng(seed)
    h, w = int(rng.integers(4, 25)), int(rng.integers(4, 25))
    gt = random_instances(rng, h, w)
    scores = quantized_scores(rng, h, w)
    report = component_f1(scores, gt)
    expected = oracle_component_report(scores, gt, DEFAULT_TAUS, DEFAULT_THRESHOLD)
    assert report.siou_per_gt == expected["sious"]
    assert report.ppv_per_pred == expected["ppvs"]
    assert report.f1_at_tau == expected["f1_at_tau"]


def test_component_f1_respects_eval_mask():
    gt = np.zeros((8, 8), dtype=int)
    gt[1:3, 1:3] = 1
    scores = np.zeros((8, 8))
    scores[1:3, 1:3] = 1.0
    scores[6:8, 6:8] = 1.0                  # would be a false positive...
    mask = np.ones((8, 8), dtype=bool)
    mask[6:8, 6:8] = False                  # ...but sits outside the mask
    masked = component_f1(ScoreMap(scores, mask), gt)
    assert masked.mean_f1 == 1.0
    unmasked = component_f1(scores, gt)
    assert unmasked.mean_f1 < 1.0


# ---------------------------------------------------------------------------
# accumulator

def _two_frames(seed=77):
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(2):
        gt = random_instances(rng, 16, 16)
        if not (gt > 0).any():
            gt[0:2, 0:2] = 1
        frames.append((quantized_scores(rng, 16, 16), gt))
    return frames


def test_accumulator_pools_frames():
    frames = _two_frames()
    acc = MetricAccumulator()
    for scores, gt in frames:
        acc.add_frame(scores, gt)
    pooled = acc.report()

    all_scores = np.concatenate([s.ravel() for s, _ in frames])
    all_gt = np.concatenate([(g > 0).ravel().astype(int) for _, g in frames])
    assert pooled.auprc == pytest.approx(
        oracle_average_precision(all_scores, all_gt > 0), abs=1e-9)

    per_frame = [component_f1(s, g) for s, g in frames]
    assert pooled.siou_per_gt == sum((r.siou_per_gt for r in per_frame), [])
    assert pooled.ppv_per_pred == sum((r.ppv_per_pred for r in per_frame), [])


def test_accumulator_merge_is_order_independent():
    frames = _two_frames(123)
    left, right = MetricAccumulator(), MetricAccumulator()
    left.add_frame(*frames[0])
    right.add_frame(*frames[1])

    sequential = MetricAccumulator()
    for scores, gt in frames:
        sequential.add_frame(scores, gt)

    left.merge(right)
    merged = left.report()
    expected = sequential.report()
    assert merged.auprc == pytest.approx(expected.auprc, abs=1e-12)
    assert sorted(merged.siou_per_gt) == sorted(expected.siou_per_gt)
    assert merged.f1_at_tau == expected.f1_at_tau


def test_accumulator_rejects_mismatched_settings():
    a = MetricAccumulator(threshold=0.5)
    b = MetricAccumulator(threshold=0.4)
    with pytest.raises(ValueError):
        a.merge(b)


def test_pr_curve_endpoints():
    gt = np.zeros((8, 8), dtype=int)
    gt[0:3, 0:3] = 1
    rng = np.random.default_rng(3)
    acc = MetricAccumulator()
    acc.add_frame(quantized_scores(rng, 8, 8), gt)
    thresholds, precision, recall = acc.pr_curve()
    assert np.all(np.diff(thresholds) < 0)
    assert recall[-1] == pytest.approx(1.0)
    assert np.all((precision >= 0) & (precision <= 1))
    assert np.all(np.diff(recall) >= 0)
