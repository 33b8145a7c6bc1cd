import numpy as np
import pytest
from PIL import Image as PILImage

from marlow.image import (
    Image,
    Mask,
    apply_mask,
    load_image,
    load_mask,
    quantize_u8,
    save_image,
    save_mask,
)


def write_gray_png(path, rows):
    arr = np.asarray(rows, dtype=np.uint8)
    PILImage.fromarray(arr, mode="L").save(path)


def write_rgb_png(path, rows):
    arr = np.asarray(rows, dtype=np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(path)


class TestLoad:
    def test_gray_bytes_scale_to_unit_range(self, tmp_path):
        p = tmp_path / "g.png"
        write_gray_png(p, [[0, 255], [128, 64]])
        img = load_image(p)
        assert img.channels == 1
        assert img.height == 2 and img.width == 2
        expect = np.array([[0.0, 1.0], [128 / 255, 64 / 255]])
        assert np.array_equal(img.data[:, :, 0], expect)

    def test_rgb_sample_order(self, tmp_path):
        p = tmp_path / "c.png"
        write_rgb_png(p, [[[10, 20, 30], [40, 50, 60], [70, 80, 90]]])
        img = load_image(p)
        assert img.channels == 3
        assert img.height == 1 and img.width == 3
        assert img.data.size == 9
        assert np.array_equal(img.data[0, 0] * 255, [10, 20, 30])

    def test_sixteen_bit_png_rejected(self, tmp_path):
        p = tmp_path / "deep.png"
        PILImage.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(p)
        with pytest.raises(ValueError):
            load_image(p)

    def test_alpha_channel_rejected(self, tmp_path):
        p = tmp_path / "a.png"
        PILImage.fromarray(np.zeros((4, 4, 4), dtype=np.uint8), mode="RGBA").save(p)
        with pytest.raises(ValueError):
            load_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_image(tmp_path / "nope.png")


class TestSave:
    def test_round_trip_identity(self, tmp_path):
        p = tmp_path / "g.png"
        write_gray_png(p, [[0, 255, 7], [128, 64, 200]])
        img = load_image(p)
        q = tmp_path / "g2.png"
        save_image(img, q)
        again = load_image(q)
        assert np.array_equal(img.data, again.data)

    def test_round_trip_identity_color(self, tmp_path):
        rng = np.random.default_rng(5)
        p = tmp_path / "c.png"
        write_rgb_png(p, rng.integers(0, 256, size=(6, 5, 3)))
        img = load_image(p)
        q = tmp_path / "c2.png"
        save_image(img, q)
        assert np.array_equal(img.data, load_image(q).data)

    def test_pnm_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        p = tmp_path / "g.png"
        write_gray_png(p, rng.integers(0, 256, size=(4, 4)))
        img = load_image(p)
        q = tmp_path / "g.pgm"
        save_image(img, q)
        assert np.array_equal(img.data, load_image(q).data)

        c = tmp_path / "c.png"
        write_rgb_png(c, rng.integers(0, 256, size=(4, 4, 3)))
        cimg = load_image(c)
        d = tmp_path / "c.ppm"
        save_image(cimg, d)
        assert np.array_equal(cimg.data, load_image(d).data)

    def test_half_byte_rounds_up(self):
        # 0.5 * 255 = 127.5, stored as 128
        assert quantize_u8(np.array([[0.5]]))[0, 0] == 128

    def test_out_of_range_samples_clamp(self):
        assert quantize_u8(np.array([[1.2]]))[0, 0] == 255
        assert quantize_u8(np.array([[-0.3]]))[0, 0] == 0

    def test_saved_bytes_match_quantize(self, tmp_path):
        data = np.linspace(0.0, 1.0, 16).reshape(4, 4, 1)
        img = Image(data)
        p = tmp_path / "q.png"
        save_image(img, p)
        raw = np.asarray(PILImage.open(p))
        assert np.array_equal(raw, quantize_u8(data[:, :, 0]))


class TestMask:
    def test_load_mask_zero_is_missing(self, tmp_path):
        p = tmp_path / "m.png"
        write_gray_png(p, [[0, 1], [255, 0]])
        m = load_mask(p)
        expect = np.array([[False, True], [True, False]])
        assert np.array_equal(m.known, expect)
        assert m.known_count == 2
        assert m.missing_count == 2

    def test_mask_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        m = Mask(rng.random((8, 8)) < 0.5)
        p = tmp_path / "m.png"
        save_mask(m, p)
        assert np.array_equal(load_mask(p).known, m.known)

    def test_mask_requires_bool(self):
        with pytest.raises(ValueError):
            Mask(np.zeros((4, 4), dtype=np.uint8))

    def test_mask_requires_2d(self):
        with pytest.raises(ValueError):
            Mask(np.zeros((4, 4, 1), dtype=bool))


class TestApplyMask:
    def test_all_known_is_identity(self):
        img = Image(np.full((3, 3, 1), 0.25))
        m = Mask(np.ones((3, 3), dtype=bool))
        out = apply_mask(img, m)
        assert np.array_equal(out.data, img.data)

    def test_all_missing_fills_zero(self):
        img = Image(np.full((3, 3, 1), 0.25))
        m = Mask(np.zeros((3, 3), dtype=bool))
        out = apply_mask(img, m)
        assert np.all(out.data == 0.0)

    def test_checkerboard_keeps_half(self):
        data = np.arange(16, dtype=np.float64).reshape(4, 4, 1) / 15
        img = Image(data)
        yy, xx = np.indices((4, 4))
        m = Mask((yy + xx) % 2 == 0)
        out = apply_mask(img, m)
        assert np.array_equal(out.data[m.known], img.data[m.known])
        assert np.all(out.data[~m.known] == 0.0)

    def test_fill_value(self):
        img = Image(np.ones((2, 2, 1)))
        m = Mask(np.zeros((2, 2), dtype=bool))
        out = apply_mask(img, m, fill=0.5)
        assert np.all(out.data == 0.5)

    def test_idempotent(self, rng):
        img = Image(rng.random((6, 6, 3)))
        m = Mask(rng.random((6, 6)) < 0.5)
        once = apply_mask(img, m)
        twice = apply_mask(once, m)
        assert np.array_equal(once.data, twice.data)

    def test_shape_mismatch(self):
        img = Image(np.zeros((4, 4, 1)))
        m = Mask(np.ones((4, 5), dtype=bool))
        with pytest.raises(ValueError):
            apply_mask(img, m)


class TestValidation:
    def test_image_requires_unit_range(self):
        with pytest.raises(ValueError):
            Image(np.full((2, 2, 1), 1.5))
        with pytest.raises(ValueError):
            Image(np.full((2, 2, 1), -0.1))

    def test_image_rejects_nan(self):
        data = np.zeros((2, 2, 1))
        data[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            Image(data)

    def test_image_channel_count(self):
        with pytest.raises(ValueError):
            Image(np.zeros((2, 2, 2)))

    def test_gray_2d_promoted(self):
        img = Image(np.zeros((3, 4)))
        assert img.data.shape == (3, 4, 1)
        assert img.channels == 1

    def test_data_is_read_only(self):
        img = Image(np.zeros((2, 2, 1)))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0
        m = Mask(np.ones((2, 2), dtype=bool))
        with pytest.raises(ValueError):
            m.known[0, 0] = False
