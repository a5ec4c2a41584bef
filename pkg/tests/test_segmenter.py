import numpy as np
import pytest

from nsb import metrics, phantom, segmenter
from nsb.boxes import BBox, tight_bbox
from nsb.cnn import TumorClass
from nsb.imagecore import GrayImage, read_image
from nsb.rng import DeterministicRng
from nsb.segmenter import (
    EmptyRegionError,
    extract_boundary,
    image_to_mask,
    mask_to_image,
    otsu_level,
    prewitt_gradient,
    segment_roi,
    threshold_mask,
)


def prewitt_oracle(px):
    """Nested-loop correlation with the two 3x3 kernels."""
    kx = np.array([[-1, 0, 1], [-1, 0, 1], [-1, 0, 1]], dtype=float)
    ky = kx.T
    h, w = px.shape
    mag = np.zeros((h, w))
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            win = px[i - 1 : i + 2, j - 1 : j + 2]
            gx = (win * kx).sum()
            gy = (win * ky).sum()
            mag[i, j] = np.hypot(gx, gy)
    return mag


# ---------------------------------------------------------------- prewitt


def test_prewitt_constant_image_zero():
    img = GrayImage(np.full((10, 10), 137, dtype=np.uint8))
    assert (prewitt_gradient(img) == 0).all()


def test_prewitt_vertical_step_closed_form():
    px = np.zeros((8, 10), dtype=np.uint8)
    px[:, 5:] = 100  # step between columns 4 and 5
    mag = prewitt_gradient(GrayImage(px))
    # interior pixels adjacent to the step see |Gx| = 300, Gy = 0
    for col in (4, 5):
        assert np.allclose(mag[1:-1, col], 300.0)
    assert (mag[:, :3] == 0).all()
    assert (mag[:, 7:] == 0).all()


def test_prewitt_matches_brute_force():
    rng = DeterministicRng(1)
    px = (rng.u64(16 * 16) % np.uint64(256)).astype(np.uint8).reshape(16, 16)
    got = prewitt_gradient(GrayImage(px))
    want = prewitt_oracle(px.astype(float))
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


def test_prewitt_border_pixels_zero():
    rng = DeterministicRng(2)
    px = (rng.u64(12 * 12) % np.uint64(256)).astype(np.uint8).reshape(12, 12)
    mag = prewitt_gradient(GrayImage(px))
    assert (mag[0, :] == 0).all() and (mag[-1, :] == 0).all()
    assert (mag[:, 0] == 0).all() and (mag[:, -1] == 0).all()


def test_prewitt_shift_invariance_exact():
    rng = DeterministicRng(3)
    base = (rng.u64(10 * 10) % np.uint64(200)).astype(np.uint8).reshape(10, 10)
    shifted = (base + 40).astype(np.uint8)  # stays within range
    assert np.array_equal(
        prewitt_gradient(GrayImage(base)), prewitt_gradient(GrayImage(shifted))
    )


def test_prewitt_gain_linearity_exact():
    rng = DeterministicRng(4)
    base = (rng.u64(10 * 10) % np.uint64(127)).astype(np.uint8).reshape(10, 10)
    doubled = (base * 2).astype(np.uint8)
    assert np.array_equal(
        prewitt_gradient(GrayImage(doubled)), 2.0 * prewitt_gradient(GrayImage(base))
    )


def test_prewitt_rejects_tiny_images():
    with pytest.raises(ValueError, match="3x3"):
        prewitt_gradient(GrayImage(np.zeros((2, 5), dtype=np.uint8)))


# ------------------------------------------------------------------- otsu


def test_otsu_separates_bimodal():
    vals = np.concatenate([np.full(500, 10.0), np.full(500, 200.0)])
    level = otsu_level(vals)
    scaled = np.minimum((vals * (255.0 / vals.max())).astype(np.int64), 255)
    selected = scaled > level
    assert selected.sum() == 500
    assert (vals[selected] == 200.0).all()


def test_otsu_rejects_all_zero():
    with pytest.raises(ValueError):
        otsu_level(np.zeros(10))


# --------------------------------------------------------- threshold_mask


def test_threshold_mask_all_zero_gradient_empty():
    grad = np.zeros((20, 20))
    mask = threshold_mask(grad, BBox(2, 2, 18, 18))
    assert not mask.any()


def test_threshold_mask_empty_region_error():
    grad = np.ones((20, 20))
    with pytest.raises(Exception):
        threshold_mask(grad, BBox(30, 30, 40, 40))


def test_threshold_mask_recovers_disc():
    # high-contrast filled circle -> mask within Dice 0.95 of the disc
    size = 128
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    disc = (np.hypot(xx - 64, yy - 64) <= 40).astype(np.uint8) * 200
    img = GrayImage(disc + 20)
    grad = prewitt_gradient(img)
    mask = threshold_mask(grad, BBox(14, 14, 114, 114))
    true_mask = disc > 0
    c = metrics.confusion_counts(mask, true_mask)
    assert metrics.dice(c) >= 0.95


def test_threshold_mask_containment_fuzz():
    rng = DeterministicRng(5)
    for _ in range(20):
        grad = rng.uniform(30 * 30, 0, 50).reshape(30, 30)
        x0, y0 = rng.uniform(2, 0, 18)
        w, h = rng.uniform(2, 4, 10)
        region = BBox(x0, y0, x0 + w, y0 + h)
        mask = threshold_mask(grad, region)
        on = np.argwhere(mask)
        for r, c in on:
            assert region.x_min - 1 <= c <= region.x_max + 1
            assert region.y_min - 1 <= r <= region.y_max + 1


# -------------------------------------------------------- extract_boundary


def test_boundary_single_pixel():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 3] = True
    assert extract_boundary(mask).tolist() == [[2, 3]]


def test_boundary_filled_square_perimeter():
    mask = np.zeros((8, 8), dtype=bool)
    mask[2:6, 2:6] = True  # 4x4 square
    boundary = extract_boundary(mask)
    assert len(boundary) == 12  # 16 pixels minus 4 interior
    interior = {(3, 3), (3, 4), (4, 3), (4, 4)}
    assert interior.isdisjoint({tuple(p) for p in boundary.tolist()})


def test_boundary_touching_raster_border():
    # all-on 3x3: the center has four on-neighbors and is off the raster
    # border, so only the other eight qualify
    mask = np.ones((3, 3), dtype=bool)
    boundary = {tuple(p) for p in extract_boundary(mask).tolist()}
    assert len(boundary) == 8
    assert (1, 1) not in boundary


def test_boundary_matches_neighbor_scan_oracle():
    rng = DeterministicRng(6)
    for _ in range(20):
        mask = (rng.u64(15 * 15) % np.uint64(2)).astype(bool).reshape(15, 15)
        got = {tuple(p) for p in extract_boundary(mask).tolist()}
        want = set()
        h, w = mask.shape
        for r in range(h):
            for c in range(w):
                if not mask[r, c]:
                    continue
                if r in (0, h - 1) or c in (0, w - 1):
                    want.add((r, c))
                    continue
                if not (mask[r - 1, c] and mask[r + 1, c]
                        and mask[r, c - 1] and mask[r, c + 1]):
                    want.add((r, c))
        assert got == want


def test_boundary_subset_of_mask_and_interior_full():
    rng = DeterministicRng(7)
    mask = (rng.u64(20 * 20) % np.uint64(3) == 0).reshape(20, 20)
    boundary = {tuple(p) for p in extract_boundary(mask).tolist()}
    on = {tuple(p) for p in np.argwhere(mask).tolist()}
    assert boundary <= on
    for r, c in on - boundary:  # interior pixels have all 4 neighbors on
        assert mask[r - 1, c] and mask[r + 1, c]
        assert mask[r, c - 1] and mask[r, c + 1]


# ------------------------------------------------------------- segment_roi


def test_segment_roi_phantom_gt_box_dice(phantom_dataset):
    for entry in list(phantom_dataset.entries)[:4]:
        img = read_image(phantom_dataset.abspath(entry.image_path))
        gt_mask = phantom.load_entry_mask(phantom_dataset, entry)
        mask, boundary = segment_roi(img, entry.box)
        c = metrics.confusion_counts(mask, gt_mask)
        assert metrics.dice(c) >= 0.75
        assert len(boundary) > 0


def test_segment_roi_background_box_empty(phantom_dataset):
    for entry in list(phantom_dataset.entries)[:4]:
        img = read_image(phantom_dataset.abspath(entry.image_path))
        # a corner far from the brain disc: plain noise, no structure
        mask, boundary = segment_roi(img, BBox(2, 2, 40, 40))
        assert not mask.any()
        assert len(boundary) == 0


def test_segment_roi_output_inside_box(phantom_dataset):
    entry = phantom_dataset.entries[1]
    img = read_image(phantom_dataset.abspath(entry.image_path))
    box = entry.box
    mask, _ = segment_roi(img, box)
    on = np.argwhere(mask)
    assert (on[:, 1] >= np.floor(box.x_min)).all()
    assert (on[:, 1] <= np.ceil(box.x_max)).all()
    assert (on[:, 0] >= np.floor(box.y_min)).all()
    assert (on[:, 0] <= np.ceil(box.y_max)).all()


# -------------------------------------------------------------- mask <-> image


def test_mask_image_roundtrip():
    rng = DeterministicRng(8)
    mask = (rng.u64(9 * 9) % np.uint64(2)).astype(bool).reshape(9, 9)
    img = mask_to_image(mask)
    assert set(np.unique(img.pixels)) <= {0, 255}
    assert np.array_equal(image_to_mask(img), mask)
