import numpy as np
import pytest

from illumine.analytics import (RescaleSpec, agreement_within_one, compare_groups,
                                coverage_sparseness, filled_cells,
                                mann_whitney_u, map_metrics, mapped_misbehaviours,
                                merge_maps, misbehaviour_sparseness, pearson,
                                probability_map, rescale_archive, sparseness,
                                vargha_delaney_a12, wilson_interval)
from illumine.errors import IllumineError
from illumine.mapelites import EvalRecord


class FakeArchive:
    """Just enough of RunArchive for rescaling: mapped evaluation records."""

    def __init__(self, rows, feature_pair=("Mov", "Lum")):
        self.feature_pair = feature_pair
        self._records = [
            EvalRecord(i, None, tuple(map(float, feats)), fit, (0, 0), fit < 0, f"d{i}", True)
            for i, (feats, fit) in enumerate(rows)
        ]

    def mapped_records(self):
        return self._records


class TestRescale:
    def test_boundary_bins(self):
        spec = RescaleSpec(25, (0.0,), (10.0,))
        assert spec.bin_of((10.0,)) == (24,)  # max clamps into the last bin
        assert spec.bin_of((0.0,)) == (0,)
        assert spec.bin_of((5.0,)) == (12,)

    def test_degenerate_range_rejected(self):
        with pytest.raises(IllumineError, match="degenerate"):
            RescaleSpec(25, (3.0,), (3.0,))

    def test_counters_preserved(self):
        rows = [((float(i % 7), float(i % 11)), (-1.0 if i % 3 == 0 else 1.0)) for i in range(200)]
        archive = FakeArchive(rows)
        spec = RescaleSpec(5, (0.0, 0.0), (6.0, 10.0))
        m = rescale_archive(archive, spec)
        assert sum(c.total_evals for c in m.cells.values()) == 200
        n_mis = sum(1 for _, f in rows if f < 0)
        assert sum(c.misbehaving_evals for c in m.cells.values()) == n_mis

    def test_elite_is_rebinned_minimum(self):
        rows = [((1.0, 1.0), 0.5), ((1.2, 1.1), -0.8), ((1.1, 0.9), 0.1)]
        archive = FakeArchive(rows)
        spec = RescaleSpec(2, (0.0, 0.0), (4.0, 4.0))
        m = rescale_archive(archive, spec)
        (cell,) = m.cells.values()
        assert cell.elite_fitness == -0.8

    def test_out_of_range_rejected(self):
        spec = RescaleSpec(25, (0.0,), (10.0,))
        with pytest.raises(IllumineError, match="outside"):
            spec.bin_of((11.0,))

    def test_merge_pools_counters(self):
        a = rescale_archive(FakeArchive([((1.0, 1.0), -1.0)]), RescaleSpec(5, (0, 0), (2, 2)))
        b = rescale_archive(FakeArchive([((1.0, 1.0), 0.3)]), RescaleSpec(5, (0, 0), (2, 2)))
        merged = merge_maps([a, b])
        (cell,) = merged.cells.values()
        assert cell.total_evals == 2
        assert cell.misbehaving_evals == 1
        assert cell.elite_fitness == -1.0


class TestMapCounts:
    def build(self, rows):
        return rescale_archive(FakeArchive(rows), RescaleSpec(10, (0.0, 0.0), (10.0, 10.0)))

    def test_empty_map(self):
        m = self.build([])
        assert filled_cells(m) == 0
        assert mapped_misbehaviours(m) == 0

    def test_counter_based_not_elite_based(self):
        # one cell: an early misbehaviour then a better-behaving elite
        m = self.build([((1.0, 1.0), -0.5), ((1.0, 1.0), -0.9), ((1.0, 1.0), 0.2)])
        assert filled_cells(m) == 1
        assert mapped_misbehaviours(m) == 1
        (cell,) = m.cells.values()
        assert cell.elite_fitness == -0.9

    def test_range_is_not_occupancy(self):
        m = self.build([((0.0, 0.0), 1.0), ((9.0, 9.0), 1.0)])
        assert filled_cells(m) == 2
        assert mapped_misbehaviours(m) == 0


class TestSparseness:
    def test_singleton_zero(self):
        assert sparseness([(3, 3)]) == 0.0

    def test_two_cells(self):
        assert sparseness([(0, 0), (2, 3)]) == pytest.approx(5.0)

    def test_empty_errors(self):
        with pytest.raises(IllumineError):
            sparseness([])

    def test_matches_bruteforce_on_random_sets(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            n = int(rng.integers(1, 60))
            cells = [tuple(int(v) for v in rng.integers(-20, 20, 2)) for _ in range(n)]
            got = sparseness(cells)
            oracle = sum(
                max(abs(a[0] - b[0]) + abs(a[1] - b[1]) for b in cells) for a in cells
            ) / len(cells)
            assert got == pytest.approx(oracle, abs=1e-12)

    def test_translation_invariant(self):
        cells = [(0, 0), (1, 5), (7, 2)]
        moved = [(x + 100, y - 40) for x, y in cells]
        assert sparseness(cells) == sparseness(moved)


class TestWilson:
    # frozen from a 50-digit evaluation of the score interval formula
    FROZEN = {
        (0, 10): (0.0, 0.27754016876661658),
        (8, 10): (0.49015684672072339, 0.94331905201930666),
        (50, 100): (0.40382982859014715, 0.59617017140985285),
    }

    @pytest.mark.parametrize("kn", sorted(FROZEN))
    def test_frozen_values(self, kn):
        lo, hi = wilson_interval(*kn, z=1.96)
        assert lo == pytest.approx(self.FROZEN[kn][0], abs=1e-9)
        assert hi == pytest.approx(self.FROZEN[kn][1], abs=1e-9)

    def test_extremes(self):
        lo, hi = wilson_interval(0, 10)
        assert lo == pytest.approx(0.0, abs=1e-12)
        lo, hi = wilson_interval(10, 10)
        assert hi == pytest.approx(1.0, abs=1e-12)

    def test_interval_contains_estimate(self):
        for n in (1, 5, 30):
            for k in range(n + 1):
                lo, hi = wilson_interval(k, n)
                assert 0.0 <= lo <= k / n <= hi <= 1.0

    def test_width_shrinks_with_n(self):
        widths = []
        for n in (10, 40, 160, 640):
            lo, hi = wilson_interval(int(0.3 * n), n)
            widths.append(hi - lo)
        assert all(a > b for a, b in zip(widths, widths[1:]))

    def test_monte_carlo_coverage_at_point_eight(self):
        rng = np.random.default_rng(0)
        n = 10
        intervals = [wilson_interval(k, n) for k in range(n + 1)]
        ks = rng.binomial(n, 0.8, size=100_000)
        cover = np.mean([(intervals[k][0] <= 0.8 <= intervals[k][1]) for k in ks])
        assert 0.93 <= cover <= 0.97


class TestProbabilityMap:
    def test_highlight_rule(self):
        rows = ([((1.0, 1.0), -1.0)] * 9          # 9/9 misbehaving: highlighted
                + [((5.0, 5.0), -1.0)] * 3        # 3/4: MP 0.75, not highlighted
                + [((5.0, 5.0), 1.0)]
                + [((9.0, 9.0), 1.0)] * 5)        # 0/5
        m = rescale_archive(FakeArchive(rows), RescaleSpec(10, (0.0, 0.0), (10.0, 10.0)))
        cells = {c.coords: c for c in probability_map(m)}
        assert len(cells) == 3
        flags = sorted((c.mp, c.highlighted) for c in cells.values())
        assert flags == [(0.0, False), (0.75, False), (1.0, True)]
        for c in cells.values():
            assert c.highlighted == (c.mp > 0.8 and c.ci_low > 0.65)
            assert c.ci_low <= c.mp <= c.ci_high

    def test_eight_of_nine_not_enough_low_bound(self):
        lo, _ = wilson_interval(8, 9)
        assert lo < 0.65  # MP 0.889 > 0.8 but the interval is too wide


class TestPearson:
    def test_perfect_linear(self):
        xs = [1.0, 2.0, 3.0, 4.0, 5.0]
        ys = [2 * x + 1 for x in xs]
        res = pearson(xs, ys)
        assert res["r"] == pytest.approx(1.0)
        assert res["p"] == pytest.approx(0.002)

    def test_perfect_negative(self):
        xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        res = pearson(xs, [-x for x in xs])
        assert res["r"] == pytest.approx(-1.0)
        assert res["p"] == pytest.approx(0.002)

    def test_constant_errors(self):
        with pytest.raises(IllumineError):
            pearson([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_r_bounded(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            res = pearson(rng.normal(size=12), rng.normal(size=12), permutations=49)
            assert -1.0 <= res["r"] <= 1.0
            assert 0.02 <= res["p"] <= 1.0

    def test_matches_numpy_corrcoef(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=40)
        y = 0.5 * x + rng.normal(size=40)
        res = pearson(x, y, permutations=9)
        assert res["r"] == pytest.approx(float(np.corrcoef(x, y)[0, 1]), abs=1e-12)

    def test_independent_data_large_p(self):
        rng = np.random.default_rng(3)
        res = pearson(rng.normal(size=100), rng.normal(size=100))
        assert res["p"] > 0.05


class TestRankStats:
    def test_a12_identical_samples(self):
        a = [1.0, 2.0, 2.0, 3.0]
        assert vargha_delaney_a12(a, list(a)) == pytest.approx(0.5)

    def test_a12_full_separation(self):
        assert vargha_delaney_a12([3.0, 4.0], [1.0, 2.0]) == pytest.approx(1.0)
        assert vargha_delaney_a12([1.0, 2.0], [3.0, 4.0]) == pytest.approx(0.0)

    def test_u_consistent_with_pair_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            a = rng.integers(0, 8, size=int(rng.integers(2, 10))).astype(float)
            b = rng.integers(0, 8, size=int(rng.integers(2, 10))).astype(float)
            wins = sum((x > y) + 0.5 * (x == y) for x in a for y in b)
            res = mann_whitney_u(a, b)
            assert res["U"] == pytest.approx(wins)
            assert vargha_delaney_a12(a, b) == pytest.approx(wins / (len(a) * len(b)))

    def test_p_small_for_separated_samples(self):
        a = [10.0, 11.0, 12.0, 13.0, 14.0]
        b = [1.0, 2.0, 3.0, 4.0, 5.0]
        res = mann_whitney_u(a, b)
        assert res["p"] < 0.05

    def test_p_large_for_identical_samples(self):
        a = [1.0, 2.0, 3.0, 4.0, 5.0]
        res = mann_whitney_u(a, list(a))
        assert res["p"] > 0.9

    def test_compare_groups_identical(self):
        g = [dict(MM=3, MS=1.0, FC=10, CS=4.0), dict(MM=4, MS=2.0, FC=12, CS=5.0)]
        rep = compare_groups(g, [dict(r) for r in g])
        for metric in ("MM", "MS", "FC", "CS"):
            assert rep[metric]["A12"] == pytest.approx(0.5)

    def test_agreement_within_one(self):
        assert agreement_within_one([1, 2, 3], [2, 2, 5]) == pytest.approx(2 / 3)


class TestMapMetrics:
    def test_ms_cs_zero_iff_singleton(self):
        rows = [((1.0, 1.0), -1.0)]
        m = rescale_archive(FakeArchive(rows), RescaleSpec(10, (0.0, 0.0), (2.0, 2.0)))
        metrics = map_metrics(m)
        assert metrics["MS"] == 0.0 and metrics["CS"] == 0.0
        assert metrics["MM"] == 1 and metrics["FC"] == 1

    def test_mm_le_fc(self):
        rng = np.random.default_rng(11)
        rows = [((float(rng.integers(10)), float(rng.integers(10))),
                 float(rng.normal())) for _ in range(300)]
        m = rescale_archive(FakeArchive(rows), RescaleSpec(10, (0.0, 0.0), (9.0, 9.0)))
        metrics = map_metrics(m)
        assert metrics["MM"] <= metrics["FC"]
