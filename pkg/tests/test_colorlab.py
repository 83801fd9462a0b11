import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colorwai import colorlab as cl

UNIT = st.floats(0.0, 1.0, allow_nan=False)


class TestConversions:
    def test_pure_red_hsv(self):
        hsv = cl.convert_rgb_hsv(cl.RgbColor(1, 0, 0))
        assert hsv.h == pytest.approx(0.0) and hsv.s == 1.0 and hsv.v == 1.0

    def test_achromatic_hue_zero(self):
        hsv = cl.convert_rgb_hsv(cl.RgbColor(0.5, 0.5, 0.5))
        assert (hsv.h, hsv.s, hsv.v) == (0.0, 0.0, 0.5)

    def test_hexcone_formula_case(self):
        # hand evaluation: max=b -> h = 60*(4 + (r-g)/delta) = 210
        hsv = cl.convert_rgb_hsv(cl.RgbColor(0.2, 0.4, 0.6))
        assert hsv.h == pytest.approx(210.0, abs=1e-9)
        assert hsv.s == pytest.approx(2.0 / 3.0)
        assert hsv.v == pytest.approx(0.6)

    def test_lab_white_black(self):
        white = cl.convert_rgb_lab(cl.RgbColor(1, 1, 1))
        assert white.l == pytest.approx(100.0, abs=1e-9)
        assert abs(white.a) < 1e-9 and abs(white.b) < 1e-9
        black = cl.convert_rgb_lab(cl.RgbColor(0, 0, 0))
        assert (black.l, black.a, black.b) == (0.0, 0.0, 0.0)

    def test_lab_red_reference(self):
        lab = cl.convert_rgb_lab(cl.RgbColor(1, 0, 0))
        assert lab.l == pytest.approx(53.24, abs=0.01)
        assert lab.a == pytest.approx(80.09, abs=0.01)
        assert lab.b == pytest.approx(67.20, abs=0.01)

    def test_round_trips_bulk(self):
        rng = np.random.default_rng(0)
        rgb = rng.random((10_000, 3))
        assert np.abs(cl.hsv_to_rgb_array(cl.rgb_to_hsv_array(rgb)) - rgb).max() < 1e-6
        back, clamped = cl.lab_to_rgb_array(cl.rgb_to_lab_array(rgb))
        assert np.abs(back - rgb).max() < 1e-4
        assert not clamped.any()

    def test_out_of_gamut_clamps_and_flags(self):
        rgb, clamped = cl.convert_lab_rgb(cl.LabColor(50, 120, -120))
        assert clamped
        assert 0.0 <= min(rgb.r, rgb.g, rgb.b) and max(rgb.r, rgb.g, rgb.b) <= 1.0

    @given(UNIT, UNIT, UNIT)
    @settings(max_examples=200, deadline=None)
    def test_hsv_round_trip_property(self, r, g, b):
        c = cl.RgbColor(r, g, b)
        hsv = cl.convert_rgb_hsv(c)
        back = cl.convert_hsv_rgb(hsv)
        assert abs(back.r - r) < 1e-6
        assert abs(back.g - g) < 1e-6
        assert abs(back.b - b) < 1e-6


class TestHueDistance:
    def test_identity(self):
        assert cl.hue_distance(10, 10) == 0.0

    def test_wraparound(self):
        assert cl.hue_distance(358, 2) == pytest.approx(4.0)

    def test_hand_case(self):
        assert cl.hue_distance(90, 300) == pytest.approx(150.0)

    @given(st.floats(-720, 720), st.floats(-720, 720), st.floats(-720, 720))
    @settings(max_examples=300, deadline=None)
    def test_circle_metric(self, a, b, c):
        assert cl.hue_distance(a, b) == pytest.approx(cl.hue_distance(b, a))
        assert 0.0 <= cl.hue_distance(a, b) <= 180.0
        assert cl.hue_distance(a, c) <= cl.hue_distance(a, b) + cl.hue_distance(b, c) + 1e-9


class TestWeightedDistance:
    def test_identical_zero(self):
        c = cl.HsvColor(120, 0.5, 0.5)
        assert cl.weighted_hsv_distance(c, c) == 0.0

    def test_max_hue_term(self):
        d = cl.weighted_hsv_distance(cl.HsvColor(0, 1, 1), cl.HsvColor(180, 1, 1))
        assert d == pytest.approx(0.8)

    def test_saturation_term_only(self):
        d = cl.weighted_hsv_distance(cl.HsvColor(0, 1, 1), cl.HsvColor(0, 0, 1))
        assert d == pytest.approx(0.1)

    def test_hue_only_weights_ignore_sv(self):
        cfg = cl.AnnotationConfig(hue_weight=1.0, sat_weight=0.0, val_weight=0.0)
        a = cl.weighted_hsv_distance(cl.HsvColor(10, 0.9, 0.1), cl.HsvColor(50, 0.2, 0.8), cfg)
        b = cl.weighted_hsv_distance(cl.HsvColor(10, 0.4, 0.6), cl.HsvColor(50, 0.7, 0.3), cfg)
        assert a == pytest.approx(b)

    def test_achromatic_rule_zeroes_hue(self):
        a = cl.HsvColor(0, 0.05, 0.5)
        b = cl.HsvColor(180, 0.5, 0.5)
        with_rule = cl.weighted_hsv_distance(a, b, achromatic_rule=True)
        without = cl.weighted_hsv_distance(a, b)
        assert with_rule == pytest.approx(0.1 * 0.45)
        assert without > with_rule

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            cl.AnnotationConfig(hue_weight=0.5, sat_weight=0.1, val_weight=0.1)


class TestPalette:
    def test_uniform_image_single_entry(self):
        img = np.full((16, 16, 3), [1.0, 0.0, 0.0])
        palette = cl.extract_palette(img)
        assert len(palette.entries) == 1
        assert palette.entries[0][1] == pytest.approx(1.0)

    def test_half_half_shares(self):
        img = np.zeros((16, 16, 3))
        img[:8] = [1.0, 0.0, 0.0]
        img[8:] = [0.0, 0.0, 1.0]
        palette = cl.extract_palette(img)
        assert len(palette.entries) == 2
        shares = sorted(s for _, s in palette.entries)
        assert shares == pytest.approx([0.5, 0.5])

    def test_small_contrasting_region_survives(self):
        # 5% yellow dots on red: adaptive clustering must keep the yellow
        img = np.full((20, 20, 3), [0.8, 0.05, 0.05])
        img[:4, :5] = [1.0, 0.9, 0.1]
        palette = cl.extract_palette(img)
        assert len(palette.entries) == 2
        minor = palette.entries[-1]
        assert minor[1] == pytest.approx(0.05, abs=0.01)
        hsv = cl.lab_to_hsv(minor[0])
        assert cl.hue_distance(hsv.h, 54) < 15  # yellow-ish

    def test_empty_image_rejected(self):
        with pytest.raises(ValueError, match="empty input"):
            cl.extract_palette(np.zeros((0, 4, 3)))

    def test_shares_nonincreasing_bounded(self, generator):
        from colorwai import texgen

        for seed in range(40, 60):
            img = texgen.synthesize(generator, texgen.sample_latent(generator, seed))
            palette = cl.extract_palette(img)
            shares = [s for _, s in palette.entries]
            assert all(shares[i] >= shares[i + 1] for i in range(len(shares) - 1))
            assert sum(shares) <= 1.0 + 1e-6

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        img = rng.random((24, 24, 3))
        p1 = cl.extract_palette(img)
        p2 = cl.extract_palette(img)
        assert p1 == p2


class TestCodebook:
    def test_default_corpus_gives_19(self, codebook):
        assert len(codebook) == 19
        assert [e.id for e in codebook.entries] == list(range(19))

    def test_three_separated_colors(self):
        labs = [cl.LabColor(50, 60, 0), cl.LabColor(70, -50, 40), cl.LabColor(30, 10, -60)]
        palettes = [cl.Palette(entries=((lab, 1.0),)) for lab in labs for _ in range(5)]
        book = cl.build_codebook(palettes, 3)
        got = sorted((e.lab.l, e.lab.a, e.lab.b) for e in book.entries)
        want = sorted((lab.l, lab.a, lab.b) for lab in labs)
        assert np.allclose(got, want, atol=1e-9)

    def test_k_one_is_weighted_mean(self):
        p1 = cl.Palette(entries=((cl.LabColor(20, 0, 0), 0.75), (cl.LabColor(60, 0, 0), 0.25)))
        p2 = cl.Palette(entries=((cl.LabColor(40, 0, 0), 1.0),))
        book = cl.build_codebook([p1, p2], 1)
        mean_l = (20 * 0.75 + 60 * 0.25 + 40 * 1.0) / 2.0
        assert book.entries[0].lab.l == pytest.approx(mean_l, abs=1e-6)

    def test_degenerate_corpus(self):
        palettes = [cl.Palette(entries=((cl.LabColor(50, 0, 0), 1.0),))] * 10
        with pytest.raises(ValueError, match="degenerate corpus"):
            cl.build_codebook(palettes, 3)

    def test_json_round_trip(self, codebook, tmp_path):
        path = tmp_path / "book.json"
        codebook.save(path)
        loaded = cl.ColorCodebook.load(path)
        assert loaded == codebook


class TestAnnotation:
    def test_uniform_codebook_color(self, codebook):
        entry = codebook.entries[7]
        rgb, _ = cl.convert_lab_rgb(entry.lab)
        img = np.full((12, 12, 3), [rgb.r, rgb.g, rgb.b])
        assert cl.annotate_main_color(img, codebook) == 7

    def test_tie_breaks_to_lower_id(self):
        entries = (
            cl.CodebookEntry(0, "a", cl.LabColor(50, 10, 0), cl.HsvColor(20, 0.8, 0.6)),
            cl.CodebookEntry(1, "b", cl.LabColor(50, 0, 10), cl.HsvColor(60, 0.8, 0.6)),
        )
        book = cl.ColorCodebook(entries=entries)
        # query hue exactly midway, same s and v: equal distance to both
        assert cl.quantize_color(cl.HsvColor(40, 0.8, 0.6), book) == 0

    def test_brute_force_agreement(self, codebook, generator):
        from colorwai import texgen

        cfg = cl.AnnotationConfig()
        for seed in range(70, 85):
            img = texgen.synthesize(generator, texgen.sample_latent(generator, seed))
            got = cl.annotate_main_color(img, codebook, cfg)
            first = cl.lab_to_hsv(cl.extract_palette(img, cfg).first)
            dists = [cl.weighted_hsv_distance(first, e.hsv, cfg, achromatic_rule=True)
                     for e in codebook.entries]
            assert got == int(np.argmin(dists))

    def test_deterministic(self, codebook, generator):
        from colorwai import texgen

        img = texgen.synthesize(generator, texgen.sample_latent(generator, 123))
        assert cl.annotate_main_color(img, codebook) == cl.annotate_main_color(img, codebook)


class TestHueRange:
    def _book(self, hues, sat=0.8):
        entries = tuple(
            cl.CodebookEntry(i, f"c{i}", cl.LabColor(50, 10, 10 + i), cl.HsvColor(h, sat, 0.5))
            for i, h in enumerate(hues)
        )
        return cl.ColorCodebook(entries=entries)

    def test_symmetric_three(self):
        book = self._book([0, 120, 240])
        assert cl.hue_range(book, 0) == ((300.0, 360.0), (0.0, 60.0))

    def test_single_chromatic_full_circle(self):
        book = self._book([77])
        assert cl.hue_range(book, 0) == ((0.0, 360.0),)

    def test_achromatic_empty(self):
        entries = (
            cl.CodebookEntry(0, "gray", cl.LabColor(50, 0, 0), cl.HsvColor(0, 0.02, 0.5)),
            cl.CodebookEntry(1, "red", cl.LabColor(50, 60, 40), cl.HsvColor(10, 0.9, 0.6)),
        )
        book = cl.ColorCodebook(entries=entries)
        assert cl.hue_range(book, 0) == ()
        assert cl.hue_range(book, 1) == ((0.0, 360.0),)

    def test_partition_of_circle(self, codebook):
        total = 0.0
        for e in codebook.entries:
            for start, end in cl.hue_range(codebook, e.id):
                total += end - start
        assert total == pytest.approx(360.0, abs=1e-6)

    def test_invalid_id(self, codebook):
        with pytest.raises(ValueError):
            cl.hue_range(codebook, 99)

    def test_distance_to_border(self):
        ranges = ((300.0, 360.0), (0.0, 60.0))
        assert cl.hue_distance_to_ranges(30, ranges) == 0.0
        assert cl.hue_distance_to_ranges(70, ranges) == pytest.approx(10.0)
        assert cl.hue_distance_to_ranges(180, ranges) == pytest.approx(120.0)


class TestPngBoundary:
    def test_round_half_up_and_io(self, tmp_path):
        img = np.array([[[0.0, 0.5, 1.0], [1 / 255 / 2, 0.999, 0.25]]])
        path = tmp_path / "x.png"
        cl.save_image_png(path, img)
        back = cl.load_image_png(path)
        expect = np.floor(img * 255 + 0.5) / 255.0
        assert np.abs(back - expect).max() < 1e-12

    def test_bytes_match_file(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.random((8, 8, 3))
        path = tmp_path / "y.png"
        cl.save_image_png(path, img)
        assert path.read_bytes() == cl.image_png_bytes(img)
