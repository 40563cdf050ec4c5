import numpy as np
import pytest

from illumine.digits import (CANVAS, DigitGenome, feat_luminosity, feat_moves,
                             feat_orientation, genome_from_json, genome_to_json,
                             genome_to_svg, mutate_digit, rasterize)
from illumine.errors import FeatureUndefinedError, MutationError, ValidityError
from illumine.mnist import synth_digit
from illumine.tracing import trace_bitmap


def square_genome(x0, y0, x1, y1, label=0):
    """Axis-aligned rectangle as four straight cubic segments."""
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    segs = []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        a = np.array(a, float)
        b = np.array(b, float)
        segs.append([a, a + (b - a) / 3, a + 2 * (b - a) / 3, b])
    return DigitGenome(label, [np.array(segs)])


def lit_diff(a, b):
    return int(np.count_nonzero((a > 127) != (b > 127)))


class TestRasterize:
    def test_empty_genome_all_zero(self):
        r = rasterize(DigitGenome(0, []))
        assert r.shape == (28, 28)
        assert not r.any()

    def test_square_covers_exact_pixels(self):
        r = rasterize(square_genome(5, 5, 11, 11))
        expected = np.zeros((28, 28), dtype=np.uint8)
        expected[5:11, 5:11] = 255
        assert np.array_equal(r, expected)

    def test_pure_function(self):
        g = square_genome(3, 4, 20, 22)
        assert np.array_equal(rasterize(g), rasterize(DigitGenome(0, [p.copy() for p in g.paths])))

    def test_even_odd_hole(self):
        outer = square_genome(4, 4, 24, 24).paths[0]
        inner = square_genome(10, 10, 18, 18).paths[0]
        r = rasterize(DigitGenome(0, [outer, inner]))
        assert r[6, 6] == 255
        assert r[14, 14] == 0  # inside the hole

    def test_values_bounded(self):
        rng = np.random.default_rng(0)
        img = synth_digit(3, rng)
        g = trace_bitmap(img, 3)
        r = rasterize(g)
        assert r.dtype == np.uint8
        assert r.min() >= 0 and r.max() <= 255


class TestTrace:
    def test_solid_square_one_subpath_low_diff(self):
        img = np.zeros((28, 28), dtype=np.uint8)
        img[8:18, 8:18] = 255
        g = trace_bitmap(img)
        assert len(g.paths) == 1
        rr = rasterize(g)
        assert lit_diff(img, rr) <= 0.08 * img.size

    def test_blank_image_errors(self):
        with pytest.raises(ValidityError, match="no shape"):
            trace_bitmap(np.zeros((28, 28), dtype=np.uint8))

    def test_annulus_two_subpaths(self):
        img = np.zeros((28, 28), dtype=np.uint8)
        yy, xx = np.mgrid[0:28, 0:28]
        d = np.hypot(xx - 14, yy - 14)
        img[(d <= 9) & (d >= 4.5)] = 255
        # oracle: one filled component, one hole
        from scipy import ndimage
        n_comp = ndimage.label(img > 127)[1]
        n_holes = ndimage.label((img <= 127))[1] - 1  # minus the outside
        assert (n_comp, n_holes) == (1, 1)
        g = trace_bitmap(img)
        assert len(g.paths) == 2

    def test_trace_rasterize_stability(self):
        rng = np.random.default_rng(2)
        for d in [0, 3, 5, 8]:
            img = synth_digit(d, rng)
            g = trace_bitmap(img, d)
            r1 = rasterize(g)
            g2 = trace_bitmap(r1, d)
            r2 = rasterize(g2)
            lit = int(np.count_nonzero(r1 > 127))
            assert lit_diff(r1, r2) <= 0.10 * lit

    def test_closure_invariants(self):
        img = synth_digit(8, np.random.default_rng(4))
        g = trace_bitmap(img, 8)
        g.validate()  # raises on broken closure or out-of-canvas points


class TestMutation:
    def setup_method(self):
        self.rng = np.random.default_rng(11)
        self.genome = trace_bitmap(synth_digit(5, np.random.default_rng(0)), 5)

    def test_displacement_within_bounds(self):
        lb, ub = 0.01, 0.6
        for _ in range(40):
            child = mutate_digit(self.genome, lb, ub, self.rng)
            deltas = []
            for pp, cp in zip(self.genome.paths, child.paths):
                diff = np.abs(cp - pp)
                deltas.extend(diff[diff > 0].ravel().tolist())
            assert deltas, "mutation must move something"
            assert all(lb - 1e-12 <= d <= ub + 1e-12 for d in deltas)

    def test_exactly_one_point_moves(self):
        child = mutate_digit(self.genome, 0.01, 0.6, self.rng)
        moved = 0
        for pp, cp in zip(self.genome.paths, child.paths):
            for k in range(len(pp)):
                for role in range(4):
                    if not np.array_equal(pp[k, role], cp[k, role]):
                        moved += 1
        # an anchor move touches two stored slots (segment end + next start)
        assert moved in (1, 2)

    def test_raster_differs_from_parent(self):
        for _ in range(20):
            child = mutate_digit(self.genome, 0.01, 0.6, self.rng)
            assert not np.array_equal(rasterize(child), rasterize(self.genome))

    def test_label_preserved(self):
        child = mutate_digit(self.genome, 0.01, 0.6, self.rng)
        assert child.expected_label == 5

    def test_canvas_bound_respected(self):
        g = square_genome(0.05, 0.05, 27.95, 27.95)
        for _ in range(30):
            child = mutate_digit(g, 0.01, 0.6, self.rng)
            assert all(p.min() >= 0 and p.max() <= CANVAS for p in child.paths)

    def test_retry_exhaustion_raises(self):
        # an all-canvas square: every displacement leaves the canvas
        g = square_genome(0.0, 0.0, 28.0, 28.0)
        with pytest.raises(MutationError):
            mutate_digit(g, 5.0, 28.0, self.rng, max_attempts=10)

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            mutate_digit(self.genome, 0.6, 0.01, self.rng)


class TestFeatures:
    def test_luminosity_extremes(self):
        assert feat_luminosity(np.zeros((28, 28), dtype=np.uint8)) == 0
        assert feat_luminosity(np.full((28, 28), 255, dtype=np.uint8)) == 784

    def test_luminosity_strict_threshold(self):
        r = np.zeros((28, 28), dtype=np.uint8)
        r[0, 0] = 127
        assert feat_luminosity(r) == 0
        r[0, 0] = 128
        assert feat_luminosity(r) == 1

    def test_moves_single_subpath_zero(self):
        assert feat_moves(square_genome(5, 5, 10, 10)) == 0.0

    def test_moves_three_four_five(self):
        a = square_genome(0, 0, 3, 3).paths[0]
        b = square_genome(0, 0, 5, 5).paths[0] + np.array([3.0, 4.0])
        # subpath a ends at its closing anchor (0,0); b starts at (3,4)
        g = DigitGenome(0, [a, b])
        assert feat_moves(g) == pytest.approx(5.0)

    def test_moves_sums_gaps(self):
        a = square_genome(0, 0, 2, 2).paths[0]
        b = square_genome(5, 0, 7, 2).paths[0]
        c = square_genome(5, 2, 7, 4).paths[0]
        g = DigitGenome(0, [a, b, c])
        assert feat_moves(g) == pytest.approx(5.0 + 2.0)

    def test_moves_empty_genome_errors(self):
        with pytest.raises(FeatureUndefinedError):
            feat_moves(DigitGenome(0, []))

    def test_orientation_diagonal(self):
        r = np.zeros((28, 28), dtype=np.uint8)
        for i in range(28):
            r[i, i] = 200
        assert feat_orientation(r) == pytest.approx(1.0)

    def test_orientation_horizontal(self):
        r = np.zeros((28, 28), dtype=np.uint8)
        r[10, 3:25] = 200
        assert feat_orientation(r) == pytest.approx(0.0)

    def test_orientation_vertical_undefined(self):
        r = np.zeros((28, 28), dtype=np.uint8)
        r[3:25, 10] = 200
        with pytest.raises(FeatureUndefinedError):
            feat_orientation(r)

    def test_luminosity_invariant_under_subpath_order(self):
        a = square_genome(2, 2, 8, 8).paths[0]
        b = square_genome(12, 12, 20, 20).paths[0]
        r1 = rasterize(DigitGenome(0, [a, b]))
        r2 = rasterize(DigitGenome(0, [b, a]))
        assert feat_luminosity(r1) == feat_luminosity(r2)


class TestSerialization:
    def test_genome_json_roundtrip(self):
        g = trace_bitmap(synth_digit(7, np.random.default_rng(1)), 7)
        g2 = genome_from_json(genome_to_json(g))
        assert g2.expected_label == 7
        assert all(np.array_equal(a, b) for a, b in zip(g.paths, g2.paths))

    def test_svg_export_contains_paths(self):
        g = square_genome(5, 5, 10, 10)
        svg = genome_to_svg(g)
        assert svg.startswith("<svg") and "path" in svg and "evenodd" in svg
