import numpy as np
import pytest

from illumine.archive import archive_digest, read_archive, write_archive
from illumine.domains import default_alphas
from illumine.mapelites import Budget, SearchConfig, run_search


def small_config(features=("Mov", "Lum"), budget=60, seed=1, **kw):
    defaults = dict(
        feature_pair=tuple(features),
        grid_scale_factors=default_alphas(tuple(features)),
        seed_pool_size=12,
        population_size=6,
        budget=Budget(evaluations=budget),
        mutation_lower_bound=0.01,
        mutation_upper_bound=0.6,
        rng_seed=seed,
    )
    defaults.update(kw)
    return SearchConfig(**defaults)


class TestRunSearch:
    def test_zero_budget_maps_initial_population_only(self, digit_domain):
        result = run_search(small_config(budget=0), digit_domain())
        assert len(result.log) == 12  # every seed evaluation is logged
        assert sum(rec.mapped for rec in result.log) == 6
        total = sum(c.total_evals for c in result.fmap.cells.values())
        assert total == 6

    def test_budget_counts_loop_evaluations(self, digit_domain):
        result = run_search(small_config(budget=25), digit_domain())
        mutants = [r for r in result.log if r.parent_id is not None]
        assert len(mutants) == 25
        assert all(r.mapped for r in mutants)

    def test_counter_consistency(self, digit_domain):
        result = run_search(small_config(budget=40), digit_domain())
        mapped = sum(1 for r in result.log if r.mapped)
        assert sum(c.total_evals for c in result.fmap.cells.values()) == mapped

    def test_elites_are_per_cell_minimum_of_log(self, digit_domain):
        result = run_search(small_config(budget=60), digit_domain())
        best = {}
        for rec in result.log:
            if rec.mapped:
                best[rec.coords] = min(best.get(rec.coords, np.inf), rec.fitness)
        assert set(best) == set(result.fmap.cells)
        for coords, cell in result.fmap.cells.items():
            assert cell.elite.fitness == best[coords]

    def test_misbehaviour_flag_matches_fitness(self, digit_domain):
        result = run_search(small_config(budget=40), digit_domain())
        for rec in result.log:
            assert rec.misbehaviour == (rec.fitness < 0)

    def test_parents_come_from_map(self, digit_domain):
        result = run_search(small_config(budget=40), digit_domain())
        eligible = set()
        for rec in result.log:
            if rec.mapped:
                eligible.add(rec.id)
        for rec in result.log:
            if rec.parent_id is not None:
                assert rec.parent_id in eligible

    def test_baseline_parents_are_seeds(self, digit_domain):
        result = run_search(small_config(budget=40), digit_domain(), mode="baseline")
        seed_ids = {r.id for r in result.log if r.parent_id is None}
        for rec in result.log:
            if rec.parent_id is not None:
                assert rec.parent_id in seed_ids

    def test_baseline_differs_from_illumination(self, digit_domain):
        a = run_search(small_config(budget=30), digit_domain())
        b = run_search(small_config(budget=30), digit_domain(), mode="baseline")
        sig_a = [(r.id, r.input_digest) for r in a.log]
        sig_b = [(r.id, r.input_digest) for r in b.log]
        assert sig_a != sig_b

    def test_road_domain_runs(self, road_domain):
        cfg = small_config(features=("MLP", "StdSA"), budget=15,
                           mutation_lower_bound=1.0, mutation_upper_bound=6.0,
                           seed_pool_size=8, population_size=4)
        result = run_search(cfg, road_domain())
        assert sum(1 for r in result.log if r.parent_id is not None) == 15
        assert len(result.fmap) >= 1


class TestDeterminism:
    def test_same_seed_same_log(self, digit_domain):
        a = run_search(small_config(budget=30, seed=7), digit_domain())
        b = run_search(small_config(budget=30, seed=7), digit_domain())
        assert [(r.id, r.fitness, r.coords, r.input_digest) for r in a.log] == \
               [(r.id, r.fitness, r.coords, r.input_digest) for r in b.log]

    def test_different_seed_different_log(self, digit_domain):
        a = run_search(small_config(budget=30, seed=7), digit_domain())
        b = run_search(small_config(budget=30, seed=8), digit_domain())
        assert [r.input_digest for r in a.log] != [r.input_digest for r in b.log]

    def test_worker_pool_does_not_change_results(self, digit_domain):
        a = run_search(small_config(budget=20, seed=3), digit_domain())
        b = run_search(small_config(budget=20, seed=3, workers=4), digit_domain())
        assert [(r.id, r.fitness, r.input_digest) for r in a.log] == \
               [(r.id, r.fitness, r.input_digest) for r in b.log]

    def test_archive_digest_identical(self, digit_domain, tmp_path):
        for name in ("a", "b"):
            result = run_search(small_config(budget=25, seed=9), digit_domain())
            write_archive(result, tmp_path / name, "sut-id")
        assert archive_digest(tmp_path / "a") == archive_digest(tmp_path / "b")


class TestArchiveRoundtrip:
    def test_replay_reproduces_final_map(self, digit_domain, tmp_path):
        result = run_search(small_config(budget=50), digit_domain())
        write_archive(result, tmp_path / "run", "sut-id")
        archive = read_archive(tmp_path / "run")
        replayed = archive.rebuild_map()
        assert set(replayed.cells) == set(result.fmap.cells)
        for coords, cell in result.fmap.cells.items():
            rcell = replayed.cells[coords]
            assert rcell.elite.id == cell.elite.id
            assert rcell.elite.fitness == cell.elite.fitness
            assert rcell.total_evals == cell.total_evals
            assert rcell.misbehaving_evals == cell.misbehaving_evals
        for entry in archive.map_doc["cells"]:
            coords = tuple(entry["coords"])
            assert replayed.cells[coords].elite.id == entry["elite_id"]

    def test_inputs_written_per_individual(self, digit_domain, tmp_path):
        result = run_search(small_config(budget=10), digit_domain())
        write_archive(result, tmp_path / "run", "sut-id")
        archive = read_archive(tmp_path / "run")
        for rec in archive.records:
            p = archive.input_path(rec.id)
            assert p.exists()
            assert p.stat().st_size == 784  # raw 28x28 grayscale

    def test_road_inputs_are_json_point_lists(self, road_domain, tmp_path):
        cfg = small_config(features=("MLP", "StdSA"), budget=5,
                           mutation_lower_bound=1.0, mutation_upper_bound=6.0,
                           seed_pool_size=6, population_size=3)
        result = run_search(cfg, road_domain())
        write_archive(result, tmp_path / "run", "sut-id")
        archive = read_archive(tmp_path / "run")
        import json
        doc = json.loads(archive.input_path(0).read_text())
        assert "points" in doc and len(doc["points"]) >= 2

    def test_config_snapshot_preserved(self, digit_domain, tmp_path):
        cfg = small_config(budget=5)
        result = run_search(cfg, digit_domain())
        write_archive(result, tmp_path / "run", "sut-x")
        archive = read_archive(tmp_path / "run")
        assert archive.config["search"]["rng_seed"] == cfg.rng_seed
        assert archive.config["sut"] == "sut-x"
        assert archive.feature_pair == ("Mov", "Lum")
