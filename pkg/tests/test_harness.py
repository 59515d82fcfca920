"""Experiment driver: grids, seeds, archive, resume, aggregation."""

import json
import shutil

import numpy as np
import pytest

from prefsim.harness import (
    MODEL_ORDER,
    ExperimentConfig,
    aggregate,
    desk_profile,
    full_profile,
    read_results,
    run_experiment,
    run_single,
    scenario_grid,
)
from prefsim.inference import InferenceConfig
from prefsim.metrics import ScenarioResult
from prefsim.models import ModelKind
from prefsim.scenarios import STREAMS, derive_seed

TINY = ExperimentConfig(
    ranges=(0.4,),
    prop_random=(0.5,),
    n_totals=(12,),
    n_replicates=2,
    grid_nx=5,
    grid_ny=5,
    n_test=8,
    waic_draws=20,
    inference=InferenceConfig(n_starts=1, outer_maxfev=30),
)


class TestConfigAndGrid:
    def test_full_profile_has_240_specs(self):
        specs = scenario_grid(full_profile())
        assert len(specs) == 3 * 5 * 4 * 4 == 240
        assert len({s.scenario_id for s in specs}) == 240

    def test_desk_profile_has_32_specs(self):
        specs = scenario_grid(desk_profile())
        assert len(specs) == 32

    def test_grid_order_is_stable(self):
        cfg = full_profile()
        a = scenario_grid(cfg)
        b = scenario_grid(cfg)
        assert a == b
        assert a[0].spatial_range == cfg.ranges[0]
        assert a[0].replicate == 0
        assert a[-1].replicate == cfg.n_replicates - 1

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ranges=())
        with pytest.raises(ValueError):
            ExperimentConfig(n_replicates=0)
        with pytest.raises(ValueError):
            ExperimentConfig(waic_draws=1)

    def test_config_hash_stable_and_sensitive(self):
        assert full_profile().config_hash() == full_profile().config_hash()
        assert full_profile().config_hash() != desk_profile().config_hash()
        assert (
            full_profile(master_seed=1).config_hash()
            != full_profile(master_seed=2).config_hash()
        )


class TestSeedDerivation:
    def test_no_collisions_across_full_design(self):
        cfg = full_profile()
        streams = (
            STREAMS
            + tuple(f"fit-{k.value}" for k in MODEL_ORDER)
            + tuple(f"draws-{k.value}" for k in MODEL_ORDER)
        )
        specs = scenario_grid(cfg)
        seeds = {
            derive_seed(cfg.master_seed, spec, stream)
            for spec in specs
            for stream in streams
        }
        assert len(seeds) == len(specs) * len(streams)

    def test_master_seed_changes_streams(self):
        spec = scenario_grid(TINY)[0]
        assert derive_seed(0, spec, "field") != derive_seed(1, spec, "field")


class TestRunSingle:
    def test_row_fields(self):
        spec = scenario_grid(TINY)[0]
        row = run_single(TINY, spec, ModelKind.GEO)
        assert row.scenario_id == spec.scenario_id
        assert row.model == "geo"
        assert row.rmse > 0
        assert row.abundance_ratio > 0
        assert np.isfinite(row.log_evidence)
        assert isinstance(row.converged, bool)

    def test_shared_dataset_matches_fresh_simulation(self):
        from prefsim.sampling import make_dataset

        spec = scenario_grid(TINY)[0]
        d = make_dataset(spec, TINY.master_seed)
        a = run_single(TINY, spec, ModelKind.PREF, d=d)
        b = run_single(TINY, spec, ModelKind.PREF)
        assert a == b


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("exp")
    messages = []
    run_experiment(TINY, outdir, progress=messages.append)
    return outdir, messages


class TestRunExperiment:
    def test_complete_archive(self, tiny_run):
        outdir, messages = tiny_run
        rows = read_results(outdir)
        assert len(rows) == 2 * 3  # 2 specs x 3 model kinds
        assert {(r.scenario_id, r.model) for r in rows} == {
            (s.scenario_id, k.value)
            for s in scenario_grid(TINY)
            for k in MODEL_ORDER
        }
        assert len(messages) == 2
        assert not (outdir / "failures.jsonl").exists()

    def test_manifest_records_config(self, tiny_run):
        outdir, _ = tiny_run
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["config_hash"] == TINY.config_hash()
        assert manifest["config"]["n_totals"] == [12]

    def test_resume_is_idempotent(self, tiny_run):
        outdir, _ = tiny_run
        before = (outdir / "results.jsonl").read_bytes()
        run_experiment(TINY, outdir, resume=True)
        assert (outdir / "results.jsonl").read_bytes() == before

    def test_resume_tops_up_truncated_archive(self, tiny_run, tmp_path):
        outdir, _ = tiny_run
        work = tmp_path / "resumed"
        shutil.copytree(outdir, work)
        lines = (work / "results.jsonl").read_text().splitlines(keepends=True)
        kept = lines[:4]  # first spec complete, second spec one of three
        (work / "results.jsonl").write_text("".join(kept))

        run_experiment(TINY, work, resume=True)
        text = (work / "results.jsonl").read_text()
        assert text.startswith("".join(kept))  # earlier lines untouched
        rows = read_results(work)
        assert len(rows) == 6
        assert len({(r.scenario_id, r.model) for r in rows}) == 6

    def test_fresh_start_discards_archive(self, tiny_run, tmp_path):
        outdir, _ = tiny_run
        work = tmp_path / "fresh"
        shutil.copytree(outdir, work)
        (work / "results.jsonl").write_text("not json\n")
        run_experiment(TINY, work, resume=False)
        assert len(read_results(work)) == 6

    def test_rejects_mismatched_config_dir(self, tiny_run):
        outdir, _ = tiny_run
        other = ExperimentConfig(
            ranges=(0.3,),
            prop_random=(0.5,),
            n_totals=(12,),
            n_replicates=1,
            grid_nx=5,
            grid_ny=5,
            n_test=8,
            waic_draws=20,
        )
        with pytest.raises(ValueError):
            run_experiment(other, outdir)

    def test_failures_recorded_without_stopping(self, tmp_path, monkeypatch):
        import prefsim.harness as harness

        real_fit = harness.fit

        def flaky_fit(kind, d, grid, config=None, seed=0):
            if kind is ModelKind.PREF:
                raise RuntimeError("injected")
            return real_fit(kind, d, grid, config, seed)

        monkeypatch.setattr(harness, "fit", flaky_fit)
        outdir = tmp_path / "flaky"
        run_experiment(TINY, outdir)
        rows = read_results(outdir)
        assert {r.model for r in rows} == {"geo", "mix"}
        assert len(rows) == 4
        failures = [
            json.loads(line)
            for line in (outdir / "failures.jsonl").read_text().splitlines()
        ]
        assert len(failures) == 2
        assert all(f["model"] == "pref" for f in failures)
        assert all("injected" in f["error"] for f in failures)

    def test_parallel_jobs_produce_full_archive(self, tmp_path):
        outdir = tmp_path / "par"
        run_experiment(TINY, outdir, jobs=2)
        assert len(read_results(outdir)) == 6


def _row(scenario_id, model, n_total=60, rmse=1.0, ratio=1.0):
    return ScenarioResult(
        scenario_id=scenario_id,
        model=model,
        spatial_range=0.2,
        prop_random=0.1,
        n_total=n_total,
        replicate=0,
        waic=0.0,
        p_eff=1.0,
        rmse=rmse,
        abundance_ratio=ratio,
        log_evidence=-1.0,
        converged=True,
    )


class TestAggregate:
    def test_rmse_pairs_hand_means(self):
        rows = [
            _row("a", "geo", rmse=2.0),
            _row("a", "pref", rmse=1.0),
            _row("a", "mix", rmse=1.0),
            _row("b", "geo", rmse=4.0),
            _row("b", "pref", rmse=2.0),
            _row("b", "mix", rmse=2.0),
        ]
        table = aggregate(rows, "rmse_pairs", "n_total")
        assert table.levels == (60,)
        assert table.n_runs == (2,)
        np.testing.assert_allclose(table.means[0], [2.0, 2.0, 1.0])

    def test_abundance_means_by_level(self):
        rows = [
            _row("a", "geo", n_total=60, ratio=0.8),
            _row("b", "geo", n_total=60, ratio=1.2),
            _row("c", "geo", n_total=100, ratio=2.0),
            _row("c", "pref", n_total=100, ratio=1.5),
        ]
        table = aggregate(rows, "abundance_vs_sim", "n_total")
        assert table.levels == (60, 100)
        np.testing.assert_allclose(table.means[0, 0], 1.0)
        np.testing.assert_allclose(table.means[1, 0], 2.0)
        np.testing.assert_allclose(table.means[1, 1], 1.5)
        assert np.isnan(table.means[0, 1])  # no pref rows at n=60
        assert table.n_runs == (2, 1)

    def test_incomplete_runs_excluded_from_rmse_pairs(self):
        rows = [
            _row("a", "geo", rmse=2.0),
            _row("a", "pref", rmse=1.0),  # no mix: run dropped
        ]
        table = aggregate(rows, "rmse_pairs", "n_total")
        assert table.n_runs == (0,)
        assert np.isnan(table.means).all()

    def test_row_order_does_not_matter(self):
        rows = [
            _row("a", "geo", n_total=60, rmse=2.0, ratio=0.9),
            _row("a", "pref", n_total=60, rmse=1.0, ratio=1.1),
            _row("a", "mix", n_total=60, rmse=0.5, ratio=1.0),
            _row("b", "geo", n_total=100, rmse=3.0, ratio=1.3),
            _row("b", "pref", n_total=100, rmse=1.5, ratio=0.7),
            _row("b", "mix", n_total=100, rmse=1.0, ratio=1.0),
        ]
        rng = np.random.default_rng(0)
        for mode in ("rmse_pairs", "abundance_vs_sim"):
            base = aggregate(rows, mode, "n_total")
            shuffled = list(rows)
            rng.shuffle(shuffled)
            again = aggregate(shuffled, mode, "n_total")
            assert again.levels == base.levels
            np.testing.assert_array_equal(again.means, base.means)
            assert again.n_runs == base.n_runs

    def test_table_rows_layout(self):
        rows = [
            _row("a", "geo", ratio=0.5),
            _row("a", "pref", ratio=1.0),
            _row("a", "mix", ratio=1.5),
        ]
        table = aggregate(rows, "abundance_vs_sim", "range")
        out = table.to_rows()
        assert out == [[0.2, 0.5, 1.0, 1.5, 1]]

    def test_errors(self):
        with pytest.raises(ValueError):
            aggregate([], "rmse_pairs", "n_total")
        with pytest.raises(ValueError):
            aggregate([_row("a", "geo")], "rmse_pairs", "bogus")
        with pytest.raises(ValueError):
            aggregate([_row("a", "geo")], "bogus", "n_total")
