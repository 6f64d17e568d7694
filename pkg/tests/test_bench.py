import csv
import itertools
import json
import subprocess
import sys

import numpy as np
import pytest

from doakit import (
    ConfigError,
    DEConfig,
    DoaEstimate,
    ScenarioConfig,
    SourceSet,
    aggregate,
    complexity_cells,
    derive_seed,
    empirical_cdf,
    flops_music,
    flops_population,
    format_complexity_table,
    match_estimates,
    run_sweep,
    run_trial,
    run_trials,
)
from doakit.bench import SUMMARY_COLUMNS, write_errors_csv, write_summary_csv
from doakit.cli import main as cli_main

from conftest import TRUE_AZIMUTH_DEG, TRUE_ELEVATION_DEG


def estimates_from(azimuths, elevations):
    return [DoaEstimate(a, e, fitness=1.0) for a, e in zip(azimuths, elevations)]


FAST_DE = DEConfig(population_size=64, max_iterations=10, neighborhood_size=8)


class TestMatchEstimates:
    def test_exact_estimates_zero_error(self, truth_sources):
        result = match_estimates(truth_sources, estimates_from(TRUE_AZIMUTH_DEG, TRUE_ELEVATION_DEG))
        np.testing.assert_array_equal(result.theta_errors_deg, np.zeros(3))
        np.testing.assert_array_equal(result.phi_errors_deg, np.zeros(3))
        assert result.unmatched_truths.size == 0
        np.testing.assert_array_equal(result.truth_indices, result.estimate_indices)

    def test_azimuth_wraps_across_zero(self):
        truth = SourceSet(np.array([1.0]), np.array([45.0]))
        result = match_estimates(truth, estimates_from([359.0], [45.0]))
        np.testing.assert_allclose(result.theta_errors_deg, [2.0])

    def test_permuted_estimates_recovered(self, truth_sources):
        order = [2, 0, 1]
        estimates = estimates_from(
            [TRUE_AZIMUTH_DEG[i] for i in order], [TRUE_ELEVATION_DEG[i] for i in order]
        )
        result = match_estimates(truth_sources, estimates)
        np.testing.assert_allclose(result.theta_errors_deg, np.zeros(3), atol=1e-12)
        mapping = dict(zip(result.estimate_indices, result.truth_indices))
        assert [mapping[k] for k in range(3)] == order

    def test_matches_permutation_oracle(self):
        # exhaustive enumeration for up to 5 sources
        def cost(truth, estimates, perm):
            total = 0.0
            for t, e in enumerate(perm):
                d_theta = abs(truth.azimuth_deg[t] - estimates[e].azimuth_deg) % 360.0
                total += min(d_theta, 360.0 - d_theta) + abs(truth.elevation_deg[t] - estimates[e].elevation_deg)
            return total

        for seed in range(30):
            rng = np.random.default_rng(seed)
            count = int(rng.integers(1, 6))
            truth = SourceSet(
                np.sort(rng.uniform(0, 360, count)) % 360.0, np.linspace(5, 85, count) + rng.uniform(0, 1, count)
            )
            estimates = estimates_from(rng.uniform(0, 360, count), rng.uniform(0, 90, count))
            result = match_estimates(truth, estimates)
            got = float(np.sum(result.theta_errors_deg + result.phi_errors_deg))
            best = min(cost(truth, estimates, perm) for perm in itertools.permutations(range(count)))
            assert abs(got - best) < 1e-9

    def test_shortfall_leaves_unmatched_truths(self, truth_sources):
        result = match_estimates(truth_sources, estimates_from([30.42], [60.39]))
        assert result.unmatched_truths.size == 2
        assert result.theta_errors_deg.shape == (1,)

    def test_rejects_excess_estimates(self, truth_sources):
        with pytest.raises(ValueError):
            match_estimates(truth_sources, estimates_from([0, 1, 2, 3], [10, 20, 30, 40]))


class TestSeeds:
    def test_derivation_is_stable(self):
        assert derive_seed(0, 0, 0) == derive_seed(0, 0, 0)
        values = {derive_seed(5, trial, stream) for trial in range(10) for stream in range(3)}
        assert len(values) == 30  # distinct streams per trial

    def test_frozen_reference_values(self):
        # pin the derivation scheme itself: these change only if the hash does
        assert derive_seed(0, 0, 0) == 15793235383387715774
        assert derive_seed(1, 2, 3) == 12997252459554536576


class TestRunTrial:
    def test_noiseless_grid_trial_succeeds(self):
        config = ScenarioConfig(algorithm="grid", snr_db=np.inf, trials=1)
        report = run_trial(config, 0)
        assert report.success and not report.shortfall
        assert np.all(report.match.theta_errors_deg <= 0.5)
        assert np.all(report.match.phi_errors_deg <= 0.5)
        assert report.measured_evals == 32851
        assert report.model_flops == flops_music(config.flop_model())

    def test_trial_is_deterministic(self):
        config = ScenarioConfig(algorithm="denm", snr_db=5.0, trials=1, optimizer=FAST_DE)
        first = run_trial(config, 3)
        second = run_trial(config, 3)
        assert first.estimates == second.estimates
        np.testing.assert_array_equal(first.match.theta_errors_deg, second.match.theta_errors_deg)
        assert first.success == second.success
        assert first.measured_evals == second.measured_evals

    def test_denm_measured_evals_match_budget(self):
        config = ScenarioConfig(algorithm="denm", snr_db=10.0, trials=1)
        report = run_trial(config, 0)
        assert report.measured_evals == 256 * (20 + 1)
        assert report.model_flops == flops_population(config.flop_model())

    def test_all_population_algorithms_produce_reports(self):
        for algorithm in ("de", "denm", "dcde", "sharede", "sde"):
            config = ScenarioConfig(algorithm=algorithm, snr_db=20.0, trials=1, optimizer=FAST_DE)
            report = run_trial(config, 1)
            assert len(report.estimates) <= 3
            assert report.measured_evals == 64 * 11


class TestAggregate:
    def test_single_trial_aggregate_equals_trial(self):
        config = ScenarioConfig(algorithm="grid", snr_db=np.inf, trials=1)
        report = run_trial(config, 0)
        agg = aggregate(config, [report])
        assert agg.trials == 1
        np.testing.assert_allclose(agg.mae_theta_deg, report.match.theta_errors_deg.mean())
        np.testing.assert_allclose(agg.raw_mae_phi_deg, report.match.phi_errors_deg.mean())
        assert agg.success_rate == 1.0
        assert agg.extraction == ""  # grid bypasses extraction

    def test_failed_trials_excluded_from_conditioned_mae(self, truth_sources):
        config = ScenarioConfig(algorithm="grid", snr_db=np.inf, trials=1)
        good = run_trial(config, 0)
        # forge a divergent failed trial by rescoring shifted estimates
        from doakit.bench import _score

        bad = _score(config, 1, estimates_from([100.0, 200.0, 300.0], [10.0, 20.0, 30.0]), False, 1.0, 1, 0.0)
        assert not bad.success
        agg = aggregate(config, [good, bad])
        assert agg.success_rate == 0.5
        assert agg.mae_theta_deg <= 0.5  # conditioned on the good trial only
        assert agg.raw_mae_theta_deg > agg.mae_theta_deg

    def test_cdf_properties(self):
        config = ScenarioConfig(algorithm="denm", snr_db=10.0, trials=4, optimizer=FAST_DE)
        agg = aggregate(config, run_trials(config))
        values, fractions = empirical_cdf(agg.phi_error_samples)
        assert np.all(np.diff(values) >= 0)
        assert np.all(np.diff(fractions) > 0)
        assert fractions[-1] == 1.0
        assert fractions[0] > 0


class TestSweepAndCsv:
    def test_sweep_rows_and_files(self, tmp_path):
        config = ScenarioConfig(algorithm="denm", snr_db=0.0, trials=3, optimizer=FAST_DE)
        aggregates, reports = run_sweep(config, [0.0, 10.0])
        assert [a.snr_db for a in aggregates] == [0.0, 10.0]
        summary = tmp_path / "summary.csv"
        errors = tmp_path / "errors.csv"
        write_summary_csv(aggregates, summary)
        write_errors_csv(config, reports, errors)
        with summary.open() as handle:
            rows = list(csv.DictReader(handle))
        assert list(rows[0].keys()) == list(SUMMARY_COLUMNS)
        assert len(rows) == 2
        model = config.flop_model()
        for row in rows:
            assert float(row["model_mflops"]) == flops_population(model) / 1e6
            assert float(row["measured_evals"]) == 64 * 11
            assert row["algo"] == "denm" and row["extraction"] == "dbscan"
        with errors.open() as handle:
            error_rows = list(csv.DictReader(handle))
        assert all(0.0 <= float(r["theta_error_deg"]) <= 180.0 for r in error_rows)

    def test_parallel_matches_serial(self):
        config = ScenarioConfig(algorithm="denm", snr_db=5.0, trials=4, optimizer=FAST_DE)
        serial = run_trials(config, workers=1)
        parallel = run_trials(config, workers=2)
        for a, b in zip(serial, parallel):
            assert a.trial == b.trial
            assert a.estimates == b.estimates
            np.testing.assert_array_equal(a.match.theta_errors_deg, b.match.theta_errors_deg)
            assert a.success == b.success


class TestComplexityTable:
    def test_nine_cells_present(self):
        cells = complexity_cells()
        assert len(cells) == 9
        table = format_complexity_table(cells)
        assert "3.8/1.9" in table
        assert "538.2/85.2" in table and "(1:0.16)" in table
        assert "0.9/1.4" in table and "(1:1.68)" in table
        assert table.count("\n") == 3  # header + one row per source count

    def test_cells_follow_cost_model(self):
        from doakit import FlopModel

        for cell in complexity_cells():
            model = FlopModel(cell["M"], cell["L"])
            assert cell["music_mflops"] == flops_music(model) / 1e6
            assert cell["population_mflops"] == flops_population(model) / 1e6


class TestScenarioConfig:
    def test_defaults_encode_reference_scenario(self):
        config = ScenarioConfig()
        assert config.num_elements == 12
        assert config.source_azimuth_deg == TRUE_AZIMUTH_DEG
        assert config.source_elevation_deg == TRUE_ELEVATION_DEG
        assert config.snapshots == 100
        assert config.trials == 1000

    def test_from_dict_round_trip(self):
        config = ScenarioConfig.from_dict(
            {"algorithm": "sde", "trials": 7, "optimizer": {"population_size": 32, "neighborhood_size": 8}}
        )
        assert config.algorithm == "sde"
        assert config.optimizer.population_size == 32

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"algorthm": "denm"})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"optimizer": {"pop": 3}})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"trials": 0})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"extraction": "average"})


class TestCli:
    def test_run_writes_outputs(self, tmp_path):
        code = cli_main(
            [
                "run",
                "--trials", "2",
                "--snr", "10",
                "--seed", "1",
                "--out", str(tmp_path),
                "--config", str(_fast_config(tmp_path)),
            ]
        )
        assert code == 0
        assert (tmp_path / "summary.csv").exists()
        assert (tmp_path / "errors.csv").exists()

    def test_table3_prints(self, capsys):
        assert cli_main(["table3"]) == 0
        out = capsys.readouterr().out
        assert "3.8/1.9" in out

    def test_compare_extract(self, tmp_path):
        code = cli_main(
            [
                "compare-extract",
                "--trials", "2",
                "--snr", "10",
                "--out", str(tmp_path),
                "--config", str(_fast_config(tmp_path)),
            ]
        )
        assert code == 0
        assert (tmp_path / "extraction_comparison.csv").exists()

    def test_sweep_pop(self, tmp_path):
        code = cli_main(
            [
                "sweep-pop",
                "--trials", "2",
                "--snr", "10",
                "--sizes", "32", "64",
                "--out", str(tmp_path),
                "--config", str(_fast_config(tmp_path)),
            ]
        )
        assert code == 0
        assert (tmp_path / "population_sweep.csv").exists()

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"algorithm": "newton"}', encoding="utf-8")
        code = cli_main(["run", "--trials", "1", "--config", str(bad), "--out", str(tmp_path)])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_malformed_json_exits_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{не json", encoding="utf-8")
        code = cli_main(["run", "--trials", "1", "--config", str(bad), "--out", str(tmp_path)])
        assert code == 2

    def test_installed_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "doakit.cli", "table3"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "33.6/6.5" in proc.stdout


def _fast_config(tmp_path):
    path = tmp_path / "fast.json"
    path.write_text(
        json.dumps({"optimizer": {"population_size": 64, "max_iterations": 10, "neighborhood_size": 8}}),
        encoding="utf-8",
    )
    return path
