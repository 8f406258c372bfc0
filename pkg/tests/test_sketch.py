"""Stylization, joint composition, masks, and the PNG pixel mapping."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sketchgan.pngio import load_image, save_image, u8_to_unit, unit_to_u8
from sketchgan.sketch import (IMAGE_TO_SKETCH, SKETCH_TO_IMAGE, Mask, SketchStyle,
                              STYLE_PRESETS, gaussian_blur, make_joint, make_mask,
                              split_joint, xdog)


def dog_response_loops(lum, sigma, ratio):
    """Direct dense difference-of-Gaussians, independent of gaussian_blur."""
    def blur(img, s):
        radius = max(1, int(np.ceil(3.0 * s)))
        xs = np.arange(-radius, radius + 1)
        k1 = np.exp(-0.5 * (xs / s) ** 2)
        k1 /= k1.sum()
        h, w = img.shape
        padded = np.pad(img, radius, mode="edge")
        out = np.zeros_like(img, dtype=np.float64)
        for i in range(h):
            for j in range(w):
                window = padded[i:i + 2 * radius + 1, j:j + 2 * radius + 1]
                out[i, j] = k1 @ window @ k1
        return out
    return blur(lum, sigma) - blur(lum, sigma * ratio)


def square_photo(size=40, lo=12, hi=28):
    photo = np.ones((size, size, 3), dtype=np.float32)
    photo[lo:hi, lo:hi, :] = -1.0
    return photo


class TestXdog:
    @pytest.mark.parametrize("level", [-1.0, -0.25, 0.4, 1.0])
    @pytest.mark.parametrize("style", sorted(STYLE_PRESETS))
    def test_constant_photo_is_all_background(self, level, style):
        photo = np.full((24, 24, 3), level, dtype=np.float32)
        out = xdog(photo, STYLE_PRESETS[style])
        assert np.all(out == 1.0)

    @pytest.mark.parametrize("style", sorted(STYLE_PRESETS))
    def test_square_strokes_hug_the_boundary(self, style):
        """Strokes stay within twice the wide-Gaussian scale of the edge;
        the deep interior is background. Cross-checked against a direct
        DoG oracle: strokes sit where the oracle response is negative."""
        preset = STYLE_PRESETS[style]
        size, lo, hi = 40, 12, 28
        photo = square_photo(size, lo, hi)
        out = xdog(photo, preset)[..., 0]
        band = 2.0 * preset.sigma * preset.sigma_ratio

        def boundary_distance(i, j):
            inside = lo <= i < hi and lo <= j < hi
            if inside:
                return min(i - lo, hi - 1 - i, j - lo, hi - 1 - j)
            di = max(lo - i, i - (hi - 1), 0)
            dj = max(lo - j, j - (hi - 1), 0)
            return np.hypot(di, dj)

        stroke_pixels = np.argwhere(out < 0.0)
        assert stroke_pixels.size > 0
        for i, j in stroke_pixels:
            assert boundary_distance(i, j) <= band, (i, j)

        lum = (photo[..., 0] + 1.0) / 2.0 * 0.299 + \
              (photo[..., 1] + 1.0) / 2.0 * 0.587 + (photo[..., 2] + 1.0) / 2.0 * 0.114
        oracle = dog_response_loops(lum, preset.sigma, preset.sigma_ratio)
        for i, j in stroke_pixels:
            assert oracle[i, j] < 0.0, f"stroke at ({i},{j}) where oracle response >= 0"

        deep = int(np.ceil(band)) + 1
        interior = out[lo + deep:hi - deep, lo + deep:hi - deep]
        assert interior.size > 0 and np.all(interior == 1.0)

    def test_output_range(self, rng):
        photo = rng.uniform(-1, 1, (16, 16, 3)).astype(np.float32)
        for preset in STYLE_PRESETS.values():
            out = xdog(photo, preset)
            assert out.shape == (16, 16, 1)
            assert out.min() >= -1.0 and out.max() <= 1.0

    def test_resketching_stays_near_binary(self):
        photo = square_photo()
        style = STYLE_PRESETS["xdog-fine"]
        once = xdog(photo, style)
        twice = xdog(np.repeat(once, 3, axis=2), style)
        near = np.minimum(np.abs(twice - 1.0), np.abs(twice + 1.0)) <= 0.2
        assert near.mean() >= 0.9

    def test_invert_flips_polarity(self):
        photo = square_photo()
        style = STYLE_PRESETS["xdog-fine"]
        inverted = SketchStyle("inv", style.sigma, style.sigma_ratio, style.phi,
                               style.epsilon, invert=True)
        np.testing.assert_array_equal(xdog(photo, inverted), -xdog(photo, style))

    def test_bad_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma"):
            SketchStyle("bad", sigma=0.0)
        with pytest.raises(ValueError, match="sigma_ratio"):
            SketchStyle("bad", sigma=1.0, sigma_ratio=1.0)

    def test_blur_preserves_constants(self):
        img = np.full((9, 9), 0.37, dtype=np.float32)
        np.testing.assert_allclose(gaussian_blur(img, 1.3), 0.37, atol=1e-6)


class TestJointImage:
    def test_roundtrip_exact(self, rng):
        sketch = rng.uniform(-1, 1, (8, 8, 1)).astype(np.float32)
        photo = rng.uniform(-1, 1, (8, 8, 3)).astype(np.float32)
        joint = make_joint(sketch, photo)
        s2, p2 = split_joint(joint)
        assert np.array_equal(s2, sketch)
        assert np.array_equal(p2, photo)

    def test_width_doubles(self, rng):
        joint = make_joint(np.ones((8, 8, 1), np.float32), np.zeros((8, 8, 3), np.float32))
        assert joint.pixels.shape == (8, 16, 3)
        assert joint.image_size == 8

    def test_sketch_half_replicated(self, rng):
        sketch = rng.uniform(-1, 1, (8, 8, 1)).astype(np.float32)
        joint = make_joint(sketch, rng.uniform(-1, 1, (8, 8, 3)).astype(np.float32))
        left = joint.sketch_half
        assert np.array_equal(left[..., 0], left[..., 1])
        assert np.array_equal(left[..., 0], left[..., 2])

    def test_size_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="sizes differ"):
            make_joint(np.zeros((8, 8, 1), np.float32), np.zeros((6, 6, 3), np.float32))


class TestMask:
    def test_sketch_to_image_ones_on_left(self):
        m = make_mask(SKETCH_TO_IMAGE, 4, 4)
        assert m.values.shape == (4, 8, 1)
        assert np.all(m.values[:, :4] == 1.0) and np.all(m.values[:, 4:] == 0.0)
        assert m.context_columns() == (0, 4)

    def test_directions_are_complements(self):
        a = make_mask(SKETCH_TO_IMAGE, 6, 6)
        b = make_mask(IMAGE_TO_SKETCH, 6, 6)
        np.testing.assert_array_equal(a.values + b.values, np.ones_like(a.values))

    def test_hadamard_selects_context(self, rng):
        joint = rng.uniform(-1, 1, (4, 8, 3)).astype(np.float32)
        m = make_mask(SKETCH_TO_IMAGE, 4, 4)
        shifted = (joint + 1.0) / 2.0          # strictly positive scale
        masked = m.values * shifted
        assert np.all(masked[:, 4:] == 0.0)
        assert np.array_equal(masked[:, :4], shifted[:, :4])

    def test_non_half_mask_rejected(self):
        bad = np.zeros((4, 8, 1), dtype=np.float32)
        bad[:, 2:6] = 1.0
        with pytest.raises(ValueError, match="half"):
            Mask(bad).context_columns()

    def test_unknown_direction_rejected(self):
        with pytest.raises(ValueError, match="direction"):
            make_mask("sideways", 4, 4)


class TestPngMapping:
    @given(st.integers(0, 255))
    def test_u8_unit_u8_identity(self, u):
        arr = np.array([[u]], dtype=np.uint8)
        assert unit_to_u8(u8_to_unit(arr))[0, 0] == u

    def test_mapping_definition(self):
        np.testing.assert_allclose(u8_to_unit(np.array([0, 255], dtype=np.uint8)),
                                   [-1.0, 1.0])
        # round half away from zero: 127.5/255 maps to exactly 0 -> u8 128
        assert unit_to_u8(np.array([0.0]))[0] == 128

    def test_file_roundtrip(self, tmp_path, rng):
        photo = u8_to_unit(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
        path = tmp_path / "photo.png"
        save_image(path, photo)
        back = load_image(path)
        assert np.array_equal(back, photo)

    def test_grayscale_roundtrip(self, tmp_path, rng):
        sketch = u8_to_unit(rng.integers(0, 256, (8, 8, 1), dtype=np.uint8))
        path = tmp_path / "sketch.png"
        save_image(path, sketch)
        back = load_image(path, grayscale=True)
        assert np.array_equal(back, sketch)
