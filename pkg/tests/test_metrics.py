import math

import numpy as np
import pytest

from nsb.metrics import (
    ConfusionCounts,
    EmptyBoundaryError,
    ImageResult,
    accuracy,
    aggregate_results,
    bde,
    bde_directed,
    confusion_counts,
    dice,
    mean_confidence_interval,
    write_results_csv,
)
from nsb.rng import DeterministicRng


def fixture_10x10():
    """pred rows 0-4, gt rows 2-6 on a 10x10 grid."""
    pred = np.zeros((10, 10), dtype=bool)
    gt = np.zeros((10, 10), dtype=bool)
    pred[0:5] = True
    gt[2:7] = True
    return pred, gt


# --------------------------------------------------------------- confusion


def test_confusion_identical_masks():
    m = np.zeros((10, 10), dtype=bool)
    m.flat[:30] = True
    c = confusion_counts(m, m)
    assert (c.tp, c.tn, c.fp, c.fn) == (30, 70, 0, 0)


def test_confusion_empty_prediction():
    gt = np.zeros((10, 10), dtype=bool)
    gt.flat[:30] = True
    c = confusion_counts(np.zeros_like(gt), gt)
    assert (c.tp, c.fp, c.fn, c.tn) == (0, 0, 30, 70)


def test_confusion_matches_pixel_loop_oracle():
    rng = DeterministicRng(1)
    for _ in range(20):
        pred = (rng.u64(32 * 32) % np.uint64(2)).astype(bool).reshape(32, 32)
        gt = (rng.u64(32 * 32) % np.uint64(2)).astype(bool).reshape(32, 32)
        c = confusion_counts(pred, gt)
        tp = fp = fn = tn = 0
        for p, g in zip(pred.ravel(), gt.ravel()):
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif not p and g:
                fn += 1
            else:
                tn += 1
        assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)


def test_confusion_conservation():
    rng = DeterministicRng(2)
    pred = (rng.u64(17 * 23) % np.uint64(2)).astype(bool).reshape(17, 23)
    gt = (rng.u64(17 * 23) % np.uint64(2)).astype(bool).reshape(17, 23)
    assert confusion_counts(pred, gt).total == 17 * 23


def test_confusion_rejects_shape_mismatch():
    with pytest.raises(ValueError, match="shapes"):
        confusion_counts(np.zeros((2, 2), bool), np.zeros((3, 3), bool))


# ------------------------------------------------------------ dice/accuracy


def test_dice_identical_nonempty():
    m = np.ones((4, 4), dtype=bool)
    assert dice(confusion_counts(m, m)) == 1.0


def test_dice_disjoint():
    a = np.zeros((4, 4), dtype=bool)
    b = np.zeros((4, 4), dtype=bool)
    a[0, 0] = True
    b[3, 3] = True
    assert dice(confusion_counts(a, b)) == 0.0


def test_dice_10x10_fixture_exact():
    pred, gt = fixture_10x10()
    c = confusion_counts(pred, gt)
    assert (c.tp, c.fp, c.fn) == (30, 20, 20)
    assert dice(c) == 0.6
    assert accuracy(c) == 0.6


def test_dice_empty_vs_empty_convention():
    c = confusion_counts(np.zeros((3, 3), bool), np.zeros((3, 3), bool))
    assert c.both_empty
    assert dice(c) == 1.0


def test_dice_symmetric_in_mask_swap():
    rng = DeterministicRng(3)
    a = (rng.u64(64) % np.uint64(2)).astype(bool).reshape(8, 8)
    b = (rng.u64(64) % np.uint64(2)).astype(bool).reshape(8, 8)
    assert dice(confusion_counts(a, b)) == dice(confusion_counts(b, a))


def test_dice_is_harmonic_mean_of_precision_recall():
    rng = DeterministicRng(4)
    for _ in range(30):
        a = (rng.u64(100) % np.uint64(2)).astype(bool).reshape(10, 10)
        b = (rng.u64(100) % np.uint64(2)).astype(bool).reshape(10, 10)
        c = confusion_counts(a, b)
        if c.tp + c.fp == 0 or c.tp + c.fn == 0:
            continue
        precision = c.tp / (c.tp + c.fp)
        recall = c.tp / (c.tp + c.fn)
        if precision + recall == 0:
            continue
        assert dice(c) == pytest.approx(
            2 * precision * recall / (precision + recall), abs=1e-12
        )


def test_accuracy_complement_is_zero():
    gt = (DeterministicRng(5).u64(36) % np.uint64(2)).astype(bool).reshape(6, 6)
    assert accuracy(confusion_counts(~gt, gt)) == 0.0


def test_accuracy_invariant_under_joint_complement():
    rng = DeterministicRng(6)
    a = (rng.u64(49) % np.uint64(2)).astype(bool).reshape(7, 7)
    b = (rng.u64(49) % np.uint64(2)).astype(bool).reshape(7, 7)
    assert accuracy(confusion_counts(a, b)) == accuracy(confusion_counts(~a, ~b))


# -------------------------------------------------------------------- BDE


def test_bde_identical_boundaries_zero():
    pts = np.array([[0, 0], [0, 1], [1, 0]])
    assert bde(pts, pts) == 0.0


def test_bde_three_four_five():
    a = np.array([[0, 0]])
    b = np.array([[3, 4]])
    assert bde(a, b) == 5.0


def test_bde_offset_squares_match_brute_force():
    def square_boundary(r0, c0, side):
        pts = []
        for r in range(r0, r0 + side):
            for c in range(c0, c0 + side):
                if r in (r0, r0 + side - 1) or c in (c0, c0 + side - 1):
                    pts.append((r, c))
        return np.array(pts)

    a = square_boundary(0, 0, 6)
    b = square_boundary(0, 2, 6)
    d_ab = np.mean([min(np.hypot(p[0] - q[0], p[1] - q[1]) for q in b) for p in a])
    d_ba = np.mean([min(np.hypot(p[0] - q[0], p[1] - q[1]) for q in a) for p in b])
    expected = (d_ab + d_ba) / 2
    assert bde(a, b) == pytest.approx(expected, abs=1e-12)
    assert bde_directed(a, b) == (pytest.approx(d_ab), pytest.approx(d_ba))


def test_bde_symmetric():
    rng = DeterministicRng(7)
    a = (rng.u64(20) % np.uint64(30)).reshape(10, 2).astype(float)
    b = (rng.u64(16) % np.uint64(30)).reshape(8, 2).astype(float)
    assert bde(a, b) == pytest.approx(bde(b, a), abs=1e-12)


def test_bde_zero_iff_equal_sets():
    rng = DeterministicRng(8)
    pts = np.unique((rng.u64(40) % np.uint64(20)).reshape(20, 2), axis=0)
    shuffled = pts[::-1].copy()
    assert bde(pts, shuffled) == 0.0
    moved = pts.copy().astype(float)
    moved[0] += 0.5
    assert bde(pts, moved) > 0.0


def test_bde_empty_boundary_undefined():
    with pytest.raises(EmptyBoundaryError):
        bde(np.empty((0, 2)), np.array([[1, 1]]))


# ------------------------------------------------------ confidence interval


def test_ci_all_equal_zero_width():
    mean, half = mean_confidence_interval([2.0, 2.0, 2.0])
    assert (mean, half) == (2.0, 0.0)


def test_ci_formula_oracle():
    values = [1.0, 2.0, 3.0, 4.0]
    mean, half = mean_confidence_interval(values)
    s = math.sqrt(sum((v - 2.5) ** 2 for v in values) / 3)
    assert mean == 2.5
    assert half == pytest.approx(1.96 * s / 2.0, abs=1e-12)


def test_ci_replication_scaling():
    base = [1.0, 2.0, 3.0, 4.0]
    _, half1 = mean_confidence_interval(base)
    _, half4 = mean_confidence_interval(base * 4)
    # std-dev of the replicated sample shrinks slightly (same spread,
    # larger n in the ddof denominator); compare via explicit formula
    arr = np.array(base * 4)
    expected = 1.96 * arr.std(ddof=1) / math.sqrt(16)
    assert half4 == pytest.approx(expected, abs=1e-12)
    assert half4 < half1 / 1.8  # close to the 1/sqrt(4) shrink


def test_ci_requires_two_values():
    with pytest.raises(ValueError):
        mean_confidence_interval([1.0])


# ------------------------------------------------------------- aggregation


def make_row(i, **kw):
    base = dict(
        image_id=f"img{i:03d}", class_true="glioma", class_pred="glioma",
        confidence=0.8, iou_box=0.7, dice=0.9, accuracy=0.95, bde=1.5,
    )
    base.update(kw)
    return ImageResult(**base)


def test_aggregate_means_equal_hand_sums():
    rng = DeterministicRng(9)
    rows = [
        make_row(
            i,
            confidence=float(rng.uniform(1, 0.2, 1.0)[0]),
            dice=float(rng.uniform(1)[0]),
            accuracy=float(rng.uniform(1)[0]),
            bde=float(rng.uniform(1, 0, 5)[0]),
        )
        for i in range(20)
    ]
    report = aggregate_results(rows)
    assert report.dice == pytest.approx(np.mean([r.dice for r in rows]))
    assert report.accuracy == pytest.approx(np.mean([r.accuracy for r in rows]))
    assert report.bde == pytest.approx(np.mean([r.bde for r in rows]))
    assert report.n_images == 20
    assert report.mean_confidence == pytest.approx(
        np.mean([r.confidence for r in rows])
    )


def test_aggregate_skips_undefined_bde():
    rows = [make_row(0, bde=2.0), make_row(1, bde=float("nan")), make_row(2, bde=4.0)]
    report = aggregate_results(rows)
    assert report.bde == 3.0
    assert report.n_bde_defined == 2


def test_csv_row_count_and_header(tmp_path):
    rows = [make_row(i) for i in range(7)]
    out = tmp_path / "rows.csv"
    write_results_csv(rows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "image_id,class_true,class_pred,confidence,iou_box,dice,accuracy,bde"
    assert len(lines) == 8


def test_csv_deterministic(tmp_path):
    rows = [make_row(i, confidence=0.123456789) for i in range(3)]
    write_results_csv(rows, tmp_path / "a.csv")
    write_results_csv(rows, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_counts_must_be_nonnegative():
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)
