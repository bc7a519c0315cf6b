import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from varenn.cube import ScalingStats, variable
from varenn.encode import (Knockout, VarennImage, apply_knockout,
                           columns_constant, compose_rgb, export_png,
                           knockout_interannual, knockout_seasonal, quantize,
                           rasterize, read_image_cache, rows_constant, scale01,
                           write_image_cache)
from varenn.errors import (ConfigurationError, FormatError, LengthError,
                           ValidationError)

STATS = ScalingStats({"tmp": (0.0, 10.0), "pre": (50.0, 50.0)})


class TestScale01:
    def test_min_maps_to_zero(self):
        assert scale01(0.0, STATS, "tmp") == 0.0

    def test_midpoint_maps_to_half(self):
        assert scale01(5.0, STATS, "tmp") == 0.5

    def test_above_max_clamps(self):
        assert scale01(12.0, STATS, "tmp") == 1.0

    def test_below_min_clamps(self):
        assert scale01(-3.0, STATS, "tmp") == 0.0

    def test_degenerate_range_maps_to_half(self):
        assert scale01(50.0, STATS, "pre") == 0.5
        assert scale01(49.0, STATS, "pre") == 0.5

    def test_array_input(self):
        out = scale01(np.array([0.0, 5.0, 10.0]), STATS, "tmp")
        assert np.allclose(out, [0.0, 0.5, 1.0])


class TestRasterize:
    def test_constant_input_uniform_image(self):
        img = rasterize(np.full((12, 30), 0.3))
        assert img.shape == (60, 60)
        assert np.all(img == 0.3)

    def test_single_hot_cell_thirty_years(self):
        data = np.zeros((12, 30))
        data[0, 0] = 1.0
        img = rasterize(data)
        # exhaustive pixel scan: only rows 0..4 x cols 0..1 may be lit
        for r in range(60):
            for c in range(60):
                expected = 1.0 if (r < 5 and c < 2) else 0.0
                assert img[r, c] == expected

    def test_ten_year_blocks_are_six_wide(self):
        data = np.zeros((12, 10))
        data[3, 4] = 1.0
        img = rasterize(data)
        lit = np.argwhere(img == 1.0)
        rows = {r for r, _ in lit}
        cols = {c for _, c in lit}
        assert rows == set(range(15, 20))
        assert cols == set(range(24, 30))

    def test_readback_equals_source(self, rng):
        data = rng.random((12, 30))
        img = rasterize(data)
        for m in range(12):
            for y in range(30):
                block = img[5 * m:5 * m + 5, 2 * y:2 * y + 2]
                assert np.all(block == data[m, y])

    def test_bad_year_count(self):
        with pytest.raises(ConfigurationError):
            rasterize(np.zeros((12, 7)))

    def test_bad_month_count(self):
        with pytest.raises(ConfigurationError):
            rasterize(np.zeros((11, 30)))


class TestComposeRgb:
    def test_one_variable_fills_r_only(self, rng):
        data = rng.random((12, 30))
        img = compose_rgb([data], (variable("tmp"),))
        assert np.array_equal(img.pixels[:, :, 0], rasterize(data).astype(np.float32))
        assert np.all(img.pixels[:, :, 1] == 0)
        assert np.all(img.pixels[:, :, 2] == 0)

    def test_two_variables_r_and_g(self, rng):
        a, b = rng.random((12, 30)), rng.random((12, 30))
        img = compose_rgb([a, b], (variable("cld"), variable("pre")))
        assert np.array_equal(img.pixels[:, :, 0], rasterize(a).astype(np.float32))
        assert np.array_equal(img.pixels[:, :, 1], rasterize(b).astype(np.float32))
        assert np.all(img.pixels[:, :, 2] == 0)

    def test_three_variables_in_canonical_order(self, rng):
        data = [rng.random((12, 30)) for _ in range(3)]
        img = compose_rgb(data, (variable("pet"), variable("tmp"), variable("vap")))
        for ch in range(3):
            assert np.array_equal(img.pixels[:, :, ch], rasterize(data[ch]).astype(np.float32))

    def test_unsorted_variables_rejected(self, rng):
        data = [rng.random((12, 30))] * 2
        with pytest.raises(ValidationError):
            compose_rgb(data, (variable("tmp"), variable("cld")))

    def test_duplicate_variables_rejected(self, rng):
        data = [rng.random((12, 30))] * 2
        with pytest.raises(ValidationError):
            compose_rgb(data, (variable("tmp"), variable("tmp")))

    def test_vacant_channel_enforced(self):
        pixels = np.zeros((60, 60, 3), dtype=np.float32)
        pixels[:, :, 2] = 0.5
        img = VarennImage(pixels, (variable("tmp"),))
        with pytest.raises(ValidationError):
            img.validate()


class TestKnockouts:
    def test_interannual_fixed_point(self):
        data = np.tile(np.arange(12.0)[:, None], (1, 30))  # already year-constant
        assert np.array_equal(knockout_interannual(data), data)

    def test_interannual_mean_over_years(self):
        data = np.tile(np.arange(30.0)[None, :], (12, 1))  # value(m, y) = y
        out = knockout_interannual(data)
        assert np.all(out == 14.5)

    def test_seasonal_fixed_point(self):
        data = np.tile(np.arange(30.0)[None, :], (12, 1))  # already month-constant
        assert np.array_equal(knockout_seasonal(data), data)

    def test_seasonal_mean_over_months(self):
        data = np.tile(np.arange(12.0)[:, None], (1, 30))  # value(m, y) = m
        out = knockout_seasonal(data)
        assert np.all(out == 5.5)

    @given(arrays(np.float64, (12, 30), elements=st.floats(0, 1)))
    def test_idempotence(self, data):
        ki = knockout_interannual(data)
        ks = knockout_seasonal(data)
        assert np.allclose(knockout_interannual(ki), ki)
        assert np.allclose(knockout_seasonal(ks), ks)

    @given(arrays(np.float64, (12, 30), elements=st.floats(0, 1)))
    def test_composition_gives_window_mean(self, data):
        both1 = knockout_seasonal(knockout_interannual(data))
        both2 = knockout_interannual(knockout_seasonal(data))
        assert np.allclose(both1, data.mean())
        assert np.allclose(both2, data.mean())

    def test_interannual_raster_has_horizontal_stripes(self, rng):
        data = apply_knockout(rng.random((12, 30)), Knockout.INTERANNUAL)
        img = rasterize(data)
        assert rows_constant(img[:, :, None])
        # each 5-row month band is uniform across all 60 columns
        for m in range(12):
            band = img[5 * m:5 * m + 5, :]
            assert np.all(band == band[0, 0])

    def test_seasonal_raster_has_vertical_stripes(self, rng):
        data = apply_knockout(rng.random((12, 30)), Knockout.SEASONAL)
        img = rasterize(data)
        assert columns_constant(img[:, :, None])
        for y in range(30):
            band = img[:, 2 * y:2 * y + 2]
            assert np.all(band == band[0, 0])

    def test_image_invariants_validated(self, rng):
        data = rng.random((12, 30))
        img = compose_rgb([apply_knockout(data, Knockout.INTERANNUAL)],
                          (variable("tmp"),), Knockout.INTERANNUAL)
        img.validate()
        bad = VarennImage(compose_rgb([data], (variable("tmp"),)).pixels,
                          (variable("tmp"),), Knockout.INTERANNUAL)
        with pytest.raises(ValidationError):
            bad.validate()


class TestDeterminism:
    def test_identical_inputs_identical_images(self, rng):
        data = rng.random((12, 30))
        a = compose_rgb([data], (variable("tmp"),))
        b = compose_rgb([data.copy()], (variable("tmp"),))
        assert np.array_equal(a.pixels, b.pixels)


class TestExportPng:
    @pytest.mark.parametrize("value,byte", [(1.0, 255), (0.0, 0), (0.5, 128)])
    def test_byte_mapping(self, tmp_path, value, byte):
        pixels = np.zeros((60, 60, 3), dtype=np.float32)
        pixels[:, :, 0] = value
        img = VarennImage(pixels, (variable("tmp"),))
        path = tmp_path / "img.png"
        export_png(img, path)
        loaded = np.asarray(Image.open(path))
        assert loaded.shape == (60, 60, 3)
        assert int(loaded[0, 0, 0]) == byte

    def test_quantize_rounds_half_up(self):
        assert quantize(np.array([0.5]))[0] == 128
        assert quantize(np.array([127.4 / 255.0]))[0] == 127


class TestImageCache:
    def test_round_trip(self, tmp_path, rng):
        images = rng.random((5, 60, 60, 3)).astype(np.float32)
        path = tmp_path / "imgs.vimg"
        write_image_cache(images, path)
        assert np.array_equal(read_image_cache(path), images)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.vimg"
        path.write_bytes(b"NOPE!" + b"\x00" * 20)
        with pytest.raises(FormatError):
            read_image_cache(path)

    def test_truncated(self, tmp_path, rng):
        images = rng.random((2, 60, 60, 3)).astype(np.float32)
        path = tmp_path / "imgs.vimg"
        write_image_cache(images, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(LengthError):
            read_image_cache(path)
