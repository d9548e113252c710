"""Raster helper tests: boxes, masks, dilation, compositing, PNG codecs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bodyanon.raster import (BoundingBox, EmptyMaskError, box_mask, composite,
                             crop, decode_mask_png, decode_png,
                             default_dilation_radius, dilate, encode_mask_png,
                             encode_png, grid_keypoints, mask_to_bbox, paste,
                             render_pose_map, union_masks, validate_image,
                             validate_mask, zero_masked)


def naive_dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Pixel-by-pixel max over a (2r+1)x(2r+1) window."""
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            y0, y1 = max(0, y - radius), min(h, y + radius + 1)
            x0, x1 = max(0, x - radius), min(w, x + radius + 1)
            out[y, x] = mask[y0:y1, x0:x1].any()
    return out


def naive_iou(a: BoundingBox, b: BoundingBox) -> float:
    ax = set(range(a.x, a.x + a.w))
    ay = set(range(a.y, a.y + a.h))
    bx = set(range(b.x, b.x + b.w))
    by = set(range(b.y, b.y + b.h))
    inter = len(ax & bx) * len(ay & by)
    union = a.area + b.area - inter
    return inter / union


class TestBoundingBox:
    def test_rejects_non_positive_size(self):
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 0, 5)
        with pytest.raises(ValueError):
            BoundingBox(0, 0, 5, -1)

    def test_slices_cover_area(self):
        box = BoundingBox(3, 2, 4, 5)
        canvas = np.zeros((10, 10), dtype=bool)
        canvas[box.slices] = True
        assert int(canvas.sum()) == box.area == 20

    def test_inside(self):
        assert BoundingBox(0, 0, 10, 10).inside(10, 10)
        assert not BoundingBox(1, 0, 10, 10).inside(10, 10)
        assert not BoundingBox(0, 5, 3, 6).inside(10, 10)

    def test_iou_disjoint_is_zero(self):
        assert BoundingBox(0, 0, 3, 3).iou(BoundingBox(5, 5, 3, 3)) == 0.0

    def test_iou_identical_is_one(self):
        box = BoundingBox(2, 3, 4, 5)
        assert box.iou(box) == pytest.approx(1.0)

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_iou_matches_set_oracle(self, data):
        def rand_box():
            return BoundingBox(data.draw(st.integers(0, 12)),
                               data.draw(st.integers(0, 12)),
                               data.draw(st.integers(1, 8)),
                               data.draw(st.integers(1, 8)))

        a, b = rand_box(), rand_box()
        assert a.iou(b) == pytest.approx(naive_iou(a, b), abs=1e-12)
        assert a.iou(b) == pytest.approx(b.iou(a), abs=1e-12)

    def test_as_list_roundtrip(self):
        box = BoundingBox(1, 2, 3, 4)
        assert box.as_list() == [1, 2, 3, 4]
        assert BoundingBox(*box.as_list()) == box


class TestValidation:
    def test_validate_image_shape(self):
        with pytest.raises(ValueError):
            validate_image(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            validate_image(np.zeros((4, 4, 3), dtype=np.float32))
        ok = validate_image(np.zeros((4, 4, 3), dtype=np.uint8))
        assert ok.shape == (4, 4, 3)

    def test_validate_mask_shape_match(self):
        mask = np.zeros((4, 4), dtype=bool)
        validate_mask(mask, shape=(4, 4))
        with pytest.raises(ValueError):
            validate_mask(mask, shape=(4, 5))

    def test_validate_mask_rejects_non_bool(self):
        # thresholding happens in decode_mask_png; validation stays strict
        raw = np.zeros((3, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            validate_mask(raw)


class TestDilate:
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
    @settings(max_examples=40, deadline=None)
    def test_matches_naive_window_oracle(self, seed, radius):
        rng = np.random.default_rng(seed)
        mask = rng.random((12, 15)) < 0.15
        assert np.array_equal(dilate(mask, radius), naive_dilate(mask, radius))

    def test_radius_below_one_raises(self):
        mask = np.zeros((6, 6), dtype=bool)
        mask[2, 3] = True
        with pytest.raises(ValueError, match="radius"):
            dilate(mask, 0)

    def test_single_pixel_becomes_square(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[4, 4] = True
        grown = dilate(mask, 2)
        assert int(grown.sum()) == 25
        assert grown[2:7, 2:7].all()

    def test_monotone_growth(self):
        rng = np.random.default_rng(9)
        mask = rng.random((10, 10)) < 0.2
        assert np.all(dilate(mask, 1) | mask == dilate(mask, 1))
        assert np.all(dilate(mask, 2) | dilate(mask, 1) == dilate(mask, 2))

    def test_default_radius_floor_and_scale(self):
        assert default_dilation_radius(BoundingBox(0, 0, 10, 10)) == 3
        assert default_dilation_radius(BoundingBox(0, 0, 400, 100)) == 8
        assert default_dilation_radius(BoundingBox(0, 0, 100, 500)) == 10


class TestMaskOps:
    def test_mask_to_bbox_tight(self):
        mask = np.zeros((10, 12), dtype=bool)
        mask[3:7, 4:9] = True
        assert mask_to_bbox(mask) == BoundingBox(4, 3, 5, 4)

    def test_mask_to_bbox_empty_raises(self):
        with pytest.raises(EmptyMaskError):
            mask_to_bbox(np.zeros((5, 5), dtype=bool))

    def test_union_masks(self):
        a = np.zeros((4, 4), dtype=bool)
        b = np.zeros((4, 4), dtype=bool)
        a[0, 0] = True
        b[3, 3] = True
        merged = union_masks([a, b])
        assert merged[0, 0] and merged[3, 3] and int(merged.sum()) == 2

    def test_union_masks_empty_list_raises(self):
        with pytest.raises(ValueError):
            union_masks([])

    def test_box_mask(self):
        mask = box_mask((6, 8), BoundingBox(2, 1, 3, 4))
        assert mask.shape == (6, 8)
        assert int(mask.sum()) == 12
        assert mask_to_bbox(mask) == BoundingBox(2, 1, 3, 4)

    def test_zero_masked(self):
        img = np.full((4, 4, 3), 200, dtype=np.uint8)
        mask = np.zeros((4, 4), dtype=bool)
        mask[1:3, 1:3] = True
        out = zero_masked(img, mask)
        assert np.all(out[mask] == 0)
        assert np.all(out[~mask] == 200)
        assert np.all(img == 200)  # input untouched


class TestCropPaste:
    def test_crop_then_paste_is_identity(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (12, 14, 3), dtype=np.uint8)
        box = BoundingBox(3, 2, 6, 7)
        patched = paste(img, crop(img, box), box)
        assert np.array_equal(patched, img)

    def test_paste_does_not_mutate(self):
        img = np.zeros((8, 8, 3), dtype=np.uint8)
        patch = np.full((2, 2, 3), 9, dtype=np.uint8)
        out = paste(img, patch, BoundingBox(1, 1, 2, 2))
        assert img.sum() == 0 and out.sum() == 9 * 12

    def test_crop_out_of_bounds_raises(self):
        img = np.zeros((8, 8, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            crop(img, BoundingBox(6, 6, 5, 5))

    def test_paste_shape_mismatch_raises(self):
        img = np.zeros((8, 8, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            paste(img, np.zeros((3, 3, 3), dtype=np.uint8),
                  BoundingBox(0, 0, 2, 2))


class TestComposite:
    def test_hard_composite_selects_by_mask(self):
        base = np.zeros((5, 5, 3), dtype=np.uint8)
        patch = np.full((5, 5, 3), 250, dtype=np.uint8)
        mask = np.zeros((5, 5), dtype=bool)
        mask[2, 2] = True
        out = composite(base, patch, mask)
        assert np.all(out[2, 2] == 250)
        assert int((out != 0).sum()) == 3

    def test_feathered_interior_is_patch(self):
        base = np.zeros((20, 20, 3), dtype=np.uint8)
        patch = np.full((20, 20, 3), 200, dtype=np.uint8)
        mask = np.zeros((20, 20), dtype=bool)
        mask[4:16, 4:16] = True
        out = composite(base, patch, mask, feather=2)
        assert np.all(out[9:11, 9:11] == 200)  # deep interior
        assert np.all(out[0, 0] == 0)          # far exterior

    def test_feathered_values_between_sources(self):
        base = np.full((16, 16, 3), 40, dtype=np.uint8)
        patch = np.full((16, 16, 3), 200, dtype=np.uint8)
        mask = np.zeros((16, 16), dtype=bool)
        mask[4:12, 4:12] = True
        out = composite(base, patch, mask, feather=3)
        assert out.min() >= 40 and out.max() <= 200

    def test_empty_mask_returns_base(self):
        rng = np.random.default_rng(2)
        base = rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)
        patch = rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)
        out = composite(base, patch, np.zeros((6, 6), dtype=bool))
        assert np.array_equal(out, base)


class TestPngCodecs:
    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_image_roundtrip_lossless(self, seed):
        rng = np.random.default_rng(seed)
        h, w = int(rng.integers(1, 24)), int(rng.integers(1, 24))
        img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
        assert np.array_equal(decode_png(encode_png(img)), img)

    def test_image_encoding_deterministic(self):
        img = np.arange(4 * 5 * 3, dtype=np.uint8).reshape(4, 5, 3)
        assert encode_png(img) == encode_png(img)

    def test_mask_roundtrip(self):
        rng = np.random.default_rng(5)
        mask = rng.random((17, 11)) < 0.4
        assert np.array_equal(decode_mask_png(encode_mask_png(mask)), mask)

    def test_decode_garbage_raises(self):
        with pytest.raises(ValueError):
            decode_png(b"definitely not a png")

    def test_decode_png_converts_to_rgb(self):
        import io

        from PIL import Image
        gray = Image.new("L", (4, 4), 77)
        buf = io.BytesIO()
        gray.save(buf, format="PNG")
        out = decode_png(buf.getvalue())
        assert out.shape == (4, 4, 3)
        assert np.all(out == 77)


class TestPoseMap:
    def test_grid_keypoints_shape_and_bounds(self):
        box = BoundingBox(10, 20, 40, 60)
        pts = grid_keypoints(box)
        assert pts.shape == (18, 3)
        assert np.all(pts[:, 2] == 1.0)
        assert np.all(pts[:, 0] >= box.x) and np.all(pts[:, 0] < box.x + box.w)
        assert np.all(pts[:, 1] >= box.y) and np.all(pts[:, 1] < box.y + box.h)

    def test_render_is_deterministic(self):
        box = BoundingBox(5, 5, 30, 50)
        pts = grid_keypoints(box)
        a = render_pose_map((64, 64), [pts])
        b = render_pose_map((64, 64), [pts])
        assert np.array_equal(a, b)
        assert a.shape == (64, 64, 3)
        assert a.dtype == np.uint8

    def test_render_no_keypoints_is_black(self):
        out = render_pose_map((16, 16), [])
        assert out.sum() == 0

    def test_zero_confidence_points_skipped(self):
        pts = grid_keypoints(BoundingBox(2, 2, 12, 12)).copy()
        pts[:, 2] = 0.0
        out = render_pose_map((20, 20), [pts])
        assert out.sum() == 0

    def test_marks_stay_near_keypoints(self):
        box = BoundingBox(8, 8, 16, 16)
        out = render_pose_map((48, 48), [grid_keypoints(box)])
        ys, xs = np.nonzero(out.any(axis=2))
        # everything drawn lies within the box plus the 1px dot halo
        assert xs.min() >= box.x - 1 and xs.max() <= box.x + box.w
        assert ys.min() >= box.y - 1 and ys.max() <= box.y + box.h

    def test_two_bodies_drawn_apart(self):
        left = grid_keypoints(BoundingBox(2, 2, 10, 20))
        right = grid_keypoints(BoundingBox(30, 2, 10, 20))
        out = render_pose_map((32, 48), [left, right])
        cols = np.nonzero(out.any(axis=(0, 2)))[0]
        assert cols.min() < 16 and cols.max() >= 30
