"""
Tests for nested targets, the training losses and the evaluation scores.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshcast import tensor as tt
from meshcast.metrics import (
    LossConfig,
    MetricsReport,
    TargetMask,
    aggregate,
    bce_loss,
    compose_targets,
    dice_loss,
    dice_score,
    hausdorff95,
    joint_loss,
    labels_from_masks,
    score_case,
)
from meshcast.tensor import Tensor
from meshcast.utils.errors import DataError, ShapeError


def test_compose_targets_nesting():
    labels = np.array([[0, 1, 2, 4]])
    mask = compose_targets(labels)
    assert mask.wt.tolist() == [[False, True, True, True]]
    assert mask.tc.tolist() == [[False, True, False, True]]
    assert mask.et.tolist() == [[False, False, False, True]]


def test_compose_targets_rejects_unknown_labels():
    with pytest.raises(DataError):
        compose_targets(np.array([0, 3]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([0, 1, 2, 4]), min_size=1, max_size=40))
def test_labels_round_trip_through_masks(values):
    labels = np.array(values, dtype=np.uint8)
    mask = compose_targets(labels)
    assert (mask.et <= mask.tc).all() and (mask.tc <= mask.wt).all()
    np.testing.assert_array_equal(labels_from_masks(mask), labels)


@pytest.mark.parametrize("pred,truth,expected", [
    ([0, 0, 0], [0, 0, 0], 1.0),
    ([1, 1, 0], [0, 0, 0], 0.0),
    ([1, 1, 0], [1, 0, 0], 2 / 3),
    ([1, 0, 1, 0], [1, 0, 1, 0], 1.0),
])
def test_dice_score(pred, truth, expected):
    assert dice_score(np.array(pred), np.array(truth)) == pytest.approx(expected)


def _all_pairs_hd(pred, truth, percentile=95.0):
    def boundary(mask):
        padded = np.pad(mask, 1)
        points = []
        for y, x in np.argwhere(mask):
            neighbours = [padded[y, x + 1], padded[y + 2, x + 1], padded[y + 1, x], padded[y + 1, x + 2]]
            if not all(neighbours):
                points.append((y, x))
        return np.array(points, dtype=float)

    def directed(src, dst):
        d = np.sqrt(((src[:, None, :] - dst[None, :, :]) ** 2).sum(-1)).min(axis=1)
        d = np.sort(d)
        return d[max(1, math.ceil(percentile / 100 * d.size)) - 1]

    a, b = boundary(pred), boundary(truth)
    return max(directed(a, b), directed(b, a))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_hausdorff95_matches_all_pairs_oracle(seed):
    rng = np.random.default_rng(seed)
    pred = rng.random((12, 12)) < 0.3
    truth = rng.random((12, 12)) < 0.3
    pred[0, 0] = truth[5, 5] = True
    assert hausdorff95(pred, truth) == pytest.approx(_all_pairs_hd(pred, truth), abs=1e-12)


def test_hausdorff_edge_cases():
    mask = np.zeros((6, 6), dtype=bool)
    mask[1:4, 1:4] = True
    assert hausdorff95(mask, mask) == 0.0
    assert math.isnan(hausdorff95(mask, np.zeros_like(mask)))
    shifted = np.roll(mask, 2, axis=1)
    assert hausdorff95(mask, shifted, percentile=100) == pytest.approx(2.0)
    assert hausdorff95(mask, shifted, spacing=(1.0, 0.5), percentile=100) == pytest.approx(1.0)


def test_hausdorff_shape_mismatch():
    with pytest.raises(ShapeError):
        hausdorff95(np.ones((2, 2)), np.ones((3, 3)))


def _bce_oracle(p, t, eps=1e-7):
    total = 0.0
    for pv, tv in zip(p.ravel(), t.ravel()):
        pv = min(max(pv, eps), 1 - eps)
        total -= tv * math.log(pv) + (1 - tv) * math.log(1 - pv)
    return total


def _dice_oracle(p, t, tau):
    overlap = sum(pv * tv for pv, tv in zip(p.ravel(), t.ravel()))
    return 1 - 2 * (overlap + tau) / (p.sum() + t.sum() + tau)


def test_losses_match_scalar_oracles(rng):
    p = rng.uniform(0.01, 0.99, size=(3, 4, 4))
    t = (rng.random((3, 4, 4)) < 0.4).astype(float)
    with tt.default_dtype(np.float64):
        assert bce_loss(Tensor(p), t).item() == pytest.approx(_bce_oracle(p, t), rel=1e-10)
        assert dice_loss(Tensor(p), t, 1e-5).item() == pytest.approx(_dice_oracle(p, t, 1e-5), rel=1e-10)


def test_bce_clamps_saturated_probabilities():
    loss = bce_loss(Tensor(np.array([0.0, 1.0])), np.array([1.0, 0.0]))
    assert np.isfinite(loss.item())


def test_joint_loss_combines_regions(rng):
    logits = rng.normal(size=(2, 3, 4, 4))
    labels = rng.choice([0, 1, 2, 4], size=(2, 4, 4))
    targets = compose_targets(labels)
    cfg = LossConfig(lam=0.3)
    prob = 1 / (1 + np.exp(-logits))
    stacked = targets.stacked(axis=1).astype(np.float64)
    expected = sum(0.3 * _dice_oracle(prob[:, c], stacked[:, c], cfg.tau)
                   + 0.7 * _bce_oracle(prob[:, c], stacked[:, c]) for c in range(3))
    with tt.default_dtype(np.float64):
        assert joint_loss(Tensor(logits), targets, cfg).item() == pytest.approx(expected, rel=1e-8)


def test_joint_loss_gradient(gradcheck, rng):
    targets = compose_targets(rng.choice([0, 1, 2, 4], size=(2, 3, 3)))
    gradcheck(lambda logits: joint_loss(logits, targets), [rng.normal(size=(2, 3, 3, 3))], samples=8)


def test_joint_loss_shape_checks():
    targets = compose_targets(np.zeros((2, 3, 3), dtype=np.uint8))
    with pytest.raises(ShapeError):
        joint_loss(Tensor(np.zeros((2, 2, 3, 3))), targets)
    with pytest.raises(ShapeError):
        joint_loss(Tensor(np.zeros((2, 3, 4, 4))), targets)


def test_loss_config_bounds():
    with pytest.raises(ValueError):
        LossConfig(lam=1.0)


def test_ground_truth_scores_perfectly():
    labels = np.zeros((4, 8, 8), dtype=np.uint8)
    labels[1:3, 2:6, 2:6] = 2
    labels[1:3, 3:5, 3:5] = 4
    truth = compose_targets(labels)
    case = score_case("c0", truth, truth)
    assert case.dice == {"WT": 1.0, "TC": 1.0, "ET": 1.0}
    assert case.hd95 == {"WT": 0.0, "TC": 0.0, "ET": 0.0}
    edema_only = compose_targets(np.where(labels == 2, 2, 0).astype(np.uint8))
    assert score_case("c1", edema_only, edema_only).hd95["TC"] is None


def test_aggregate_means_and_empty_counts():
    truth = compose_targets(np.array([[[0, 2], [4, 1]]], dtype=np.uint8))
    empty = TargetMask.from_channels(np.zeros((1, 3, 2, 2), dtype=bool), axis=1)
    cases = [score_case("a", truth, truth), score_case("b", empty, truth)]
    report = aggregate(cases, threshold=0.5)
    assert report.mean_dice["WT"] == pytest.approx(np.mean([c.dice["WT"] for c in cases]))
    assert report.mean_dice["WT"] == pytest.approx(0.5)
    assert report.empty_counts == {"WT": 1, "TC": 1, "ET": 1}
    assert report.mean_hd95["WT"] == 0.0


def test_report_json_round_trip():
    truth = compose_targets(np.array([[[0, 2], [4, 0]]], dtype=np.uint8))
    report = aggregate([score_case("a", truth, truth)], missing_modalities=["t1"], inference_seconds=0.5)
    again = MetricsReport.model_validate_json(report.model_dump_json())
    assert again == report


def test_slice_granularity_averages_frames():
    truth = compose_targets(np.array([[[2, 0]], [[0, 0]]], dtype=np.uint8))
    pred = compose_targets(np.array([[[2, 0]], [[2, 0]]], dtype=np.uint8))
    assert score_case("a", pred, truth).dice["WT"] == pytest.approx(2 / 3)
    assert score_case("a", pred, truth, granularity="slice").dice["WT"] == pytest.approx(0.5)
