"""Monte Carlo benchmark harness: accuracy and cost of DOA estimators.

Runs seeded trials of synthesize -> covariance -> subspace -> projector ->
search (grid or population optimizer) -> extraction -> truth matching, and
aggregates MAE, error CDF samples, success rate, and model/measured cost.

Determinism contract: every statistical output is fixed by (master_seed,
config). Per-trial seeds derive from a documented stable hash,
SeedSequence([master_seed, trial_index, stream]) with streams 0 = data,
1 = optimizer, 2 = extraction. Wall-clock fields are measurements and sit
outside the contract.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .extract import DoaEstimate, extract_dbscan, extract_klocalmax, extract_kmeanspp
from .music import (
    FlopModel,
    GridSpec,
    NoiseProjector,
    flops_music,
    flops_population,
    grid_search,
    noise_projector,
    spectrum_objective,
)
from .optimizer import ALGORITHMS, CountingObjective, DEConfig, Population, SearchBox, run_population
from .signal_model import ArrayGeometry, SourceSet, sample_covariance, subspace_split, synthesize_snapshots

EXTRACTIONS = ("dbscan", "klocalmax", "kmeanspp")

SUMMARY_COLUMNS = (
    "algo",
    "extraction",
    "M",
    "L",
    "snr_db",
    "snapshots",
    "trials",
    "mae_theta_deg",
    "mae_phi_deg",
    "success_rate",
    "model_mflops",
    "measured_evals",
    "wall_ms",
    "raw_mae_theta_deg",
    "raw_mae_phi_deg",
    "flops_ratio_vs_grid",
)

ERROR_COLUMNS = ("algo", "extraction", "snr_db", "trial", "source", "theta_error_deg", "phi_error_deg")

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "MatchResult",
    "TrialReport",
    "AggregateReport",
    "derive_seed",
    "circular_difference_deg",
    "match_estimates",
    "run_trial",
    "run_trials",
    "aggregate",
    "run_sweep",
    "run_extraction_comparison",
    "run_population_sweep",
    "empirical_cdf",
    "complexity_cells",
    "format_complexity_table",
    "write_summary_csv",
    "write_errors_csv",
]


class ConfigError(ValueError):
    """Invalid benchmark configuration (CLI exits non-zero on this)."""


@dataclass(frozen=True)
class ScenarioConfig:
    """One benchmark scenario; defaults encode the reference setup of a
    12-element circular array receiving three sources at fixed directions."""

    num_elements: int = 12
    wavelength: float = 1.0
    radius: float | None = None  # None: one wavelength
    source_azimuth_deg: tuple[float, ...] = (30.42, 120.27, 240.51)
    source_elevation_deg: tuple[float, ...] = (60.39, 29.42, 45.55)
    source_power: tuple[float, ...] | None = None
    snapshots: int = 100
    snr_db: float = 10.0
    trials: int = 1000
    algorithm: str = "denm"
    extraction: str = "dbscan"
    optimizer: DEConfig = field(default_factory=DEConfig)
    share_radius_deg: float = 15.0
    species_radius_deg: float = 15.0
    dbscan_eps_deg: float = 3.0
    dbscan_min_pts: int = 4
    klocalmax_neighbors: int = 8
    grid_step_deg: float = 1.0
    success_threshold_deg: float = 2.0
    master_seed: int = 0

    def __post_init__(self):
        if self.algorithm != "grid" and self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.extraction not in EXTRACTIONS:
            raise ConfigError(f"unknown extraction {self.extraction!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be non-negative")
        if self.snapshots < 1:
            raise ConfigError("snapshots must be at least 1")
        if self.success_threshold_deg <= 0:
            raise ConfigError("success_threshold_deg must be positive")

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.uca(self.num_elements, self.wavelength, self.radius)

    def sources(self) -> SourceSet:
        power = None if self.source_power is None else np.asarray(self.source_power)
        return SourceSet(np.asarray(self.source_azimuth_deg), np.asarray(self.source_elevation_deg), power)

    def grid_spec(self) -> GridSpec:
        return GridSpec(azimuth_step=self.grid_step_deg, elevation_step=self.grid_step_deg)

    def flop_model(self) -> FlopModel:
        return FlopModel(
            num_sensors=self.num_elements,
            num_sources=len(self.source_azimuth_deg),
            grid_points=self.grid_spec().num_points,
            population_size=self.optimizer.population_size,
            max_iterations=self.optimizer.max_iterations,
        )

    @classmethod
    def from_dict(cls, mapping: dict) -> "ScenarioConfig":
        """Build from a plain mapping (the JSON config-file schema). Unknown
        keys are rejected; the ``optimizer`` entry is a nested mapping with
        DEConfig field names."""
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(mapping)
        if "optimizer" in kwargs and not isinstance(kwargs["optimizer"], DEConfig):
            opt = kwargs["optimizer"]
            opt_known = {f.name for f in fields(DEConfig)}
            opt_unknown = set(opt) - opt_known
            if opt_unknown:
                raise ConfigError(f"unknown optimizer keys: {sorted(opt_unknown)}")
            try:
                kwargs["optimizer"] = DEConfig(**opt)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        for key in ("source_azimuth_deg", "source_elevation_deg", "source_power"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        try:
            return cls(**kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc


def derive_seed(master_seed: int, trial_index: int, stream: int) -> int:
    """Stable per-trial seed: first word of SeedSequence([master, trial, stream])."""
    seq = np.random.SeedSequence([int(master_seed), int(trial_index), int(stream)])
    return int(seq.generate_state(1, np.uint64)[0])


def circular_difference_deg(a, b, period: float = 360.0) -> np.ndarray:
    """Shortest angular distance, in [0, period/2]."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % period
    return np.minimum(d, period - d)


@dataclass(frozen=True)
class MatchResult:
    """Minimum-total-cost one-to-one pairing of estimates to true sources.

    Cost per pair is circular azimuth distance plus absolute elevation
    distance. Truths left without an estimate appear in unmatched_truths
    and never contribute errors.
    """

    truth_indices: np.ndarray
    estimate_indices: np.ndarray
    theta_errors_deg: np.ndarray
    phi_errors_deg: np.ndarray
    unmatched_truths: np.ndarray


def match_estimates(truth: SourceSet, estimates: list[DoaEstimate] | tuple[DoaEstimate, ...]) -> MatchResult:
    """Optimal assignment (exact, via the Hungarian method) of estimates to truths."""
    if len(estimates) > truth.count:
        raise ValueError("cannot match more estimates than true sources")
    if len(estimates) == 0:
        return MatchResult(
            truth_indices=np.empty(0, dtype=int),
            estimate_indices=np.empty(0, dtype=int),
            theta_errors_deg=np.empty(0),
            phi_errors_deg=np.empty(0),
            unmatched_truths=np.arange(truth.count),
        )
    est_az = np.array([e.azimuth_deg for e in estimates])
    est_el = np.array([e.elevation_deg for e in estimates])
    theta_cost = circular_difference_deg(truth.azimuth_deg[:, None], est_az[None, :])
    phi_cost = np.abs(truth.elevation_deg[:, None] - est_el[None, :])
    rows, cols = linear_sum_assignment(theta_cost + phi_cost)
    unmatched = np.setdiff1d(np.arange(truth.count), rows)
    return MatchResult(
        truth_indices=rows,
        estimate_indices=cols,
        theta_errors_deg=theta_cost[rows, cols],
        phi_errors_deg=phi_cost[rows, cols],
        unmatched_truths=unmatched,
    )


@dataclass(frozen=True)
class TrialReport:
    trial: int
    estimates: tuple[DoaEstimate, ...]
    match: MatchResult
    shortfall: bool
    success: bool
    model_flops: float
    measured_evals: int
    wall_ms: float


def _trial_projector(config: ScenarioConfig, trial_index: int) -> NoiseProjector:
    geom = config.geometry()
    sources = config.sources()
    snapshots = synthesize_snapshots(
        geom, sources, config.snr_db, config.snapshots, derive_seed(config.master_seed, trial_index, 0)
    )
    split = subspace_split(sample_covariance(snapshots), sources.count)
    return noise_projector(split, geom)


def _optimize(config: ScenarioConfig, proj: NoiseProjector, trial_index: int) -> tuple[Population, int]:
    objective = CountingObjective(spectrum_objective(proj))
    de = replace(config.optimizer, rng_seed=derive_seed(config.master_seed, trial_index, 1))
    population = run_population(
        config.algorithm,
        objective,
        SearchBox(),
        de,
        share_radius=config.share_radius_deg,
        species_radius=config.species_radius_deg,
    )
    return population, objective.count


def _extract(config: ScenarioConfig, method: str, population: Population, trial_index: int):
    num_sources = len(config.source_azimuth_deg)
    if method == "dbscan":
        return extract_dbscan(population, num_sources, config.dbscan_eps_deg, config.dbscan_min_pts)
    if method == "klocalmax":
        return extract_klocalmax(population, num_sources, config.klocalmax_neighbors)
    if method == "kmeanspp":
        return extract_kmeanspp(population, num_sources, derive_seed(config.master_seed, trial_index, 2))
    raise ConfigError(f"unknown extraction {method!r}")


def _score(config: ScenarioConfig, trial_index: int, estimates, shortfall, model_flops, evals, wall_ms) -> TrialReport:
    match = match_estimates(config.sources(), list(estimates))
    threshold = config.success_threshold_deg
    success = (
        not shortfall
        and len(match.unmatched_truths) == 0
        and bool(np.all(match.theta_errors_deg <= threshold))
        and bool(np.all(match.phi_errors_deg <= threshold))
    )
    return TrialReport(
        trial=trial_index,
        estimates=tuple(estimates),
        match=match,
        shortfall=shortfall,
        success=success,
        model_flops=model_flops,
        measured_evals=evals,
        wall_ms=wall_ms,
    )


def run_trial(config: ScenarioConfig, trial_index: int) -> TrialReport:
    """One fully seeded trial; every numeric field except wall_ms is
    reproducible from (config, trial_index)."""
    proj = _trial_projector(config, trial_index)
    model = config.flop_model()
    started = time.perf_counter()
    if config.algorithm == "grid":
        result = grid_search(proj, config.grid_spec(), len(config.source_azimuth_deg))
        estimates = tuple(
            DoaEstimate(float(az), float(el), float(val))
            for az, el, val in zip(result.azimuth_deg, result.elevation_deg, result.values)
        )
        shortfall = result.shortfall
        evals = result.num_evaluations
        model_flops = flops_music(model)
    else:
        population, evals = _optimize(config, proj, trial_index)
        extraction = _extract(config, config.extraction, population, trial_index)
        estimates = extraction.estimates
        shortfall = extraction.shortfall
        model_flops = flops_population(model)
    wall_ms = (time.perf_counter() - started) * 1e3
    return _score(config, trial_index, estimates, shortfall, model_flops, evals, wall_ms)


def _run_trial_star(args) -> TrialReport:
    return run_trial(*args)


def run_trials(config: ScenarioConfig, workers: int = 1) -> list[TrialReport]:
    """All trials of a scenario, ordered by trial index regardless of workers."""
    indices = range(config.trials)
    if workers <= 1:
        return [run_trial(config, i) for i in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(_run_trial_star, [(config, i) for i in indices], chunksize=8))
    return sorted(reports, key=lambda r: r.trial)


@dataclass(frozen=True)
class AggregateReport:
    """Per-(config, SNR) statistics. mae_* columns are success-conditioned
    (failed trials would mix divergent outliers into the averages);
    raw_mae_* average every matched pair regardless of the success flag."""

    algo: str
    extraction: str
    num_elements: int
    num_sources: int
    snr_db: float
    snapshots: int
    trials: int
    mae_theta_deg: float
    mae_phi_deg: float
    success_rate: float
    model_mflops: float
    measured_evals: float
    wall_ms: float
    raw_mae_theta_deg: float
    raw_mae_phi_deg: float
    flops_ratio_vs_grid: float
    theta_error_samples: tuple[float, ...]
    phi_error_samples: tuple[float, ...]

    def csv_row(self) -> dict:
        return {
            "algo": self.algo,
            "extraction": self.extraction,
            "M": self.num_elements,
            "L": self.num_sources,
            "snr_db": self.snr_db,
            "snapshots": self.snapshots,
            "trials": self.trials,
            "mae_theta_deg": self.mae_theta_deg,
            "mae_phi_deg": self.mae_phi_deg,
            "success_rate": self.success_rate,
            "model_mflops": self.model_mflops,
            "measured_evals": self.measured_evals,
            "wall_ms": self.wall_ms,
            "raw_mae_theta_deg": self.raw_mae_theta_deg,
            "raw_mae_phi_deg": self.raw_mae_phi_deg,
            "flops_ratio_vs_grid": self.flops_ratio_vs_grid,
        }


def _mean(samples: list[float]) -> float:
    return float(np.mean(samples)) if samples else float("nan")


def aggregate(config: ScenarioConfig, reports: list[TrialReport]) -> AggregateReport:
    success_theta, success_phi = [], []
    raw_theta, raw_phi = [], []
    for report in reports:
        raw_theta.extend(report.match.theta_errors_deg.tolist())
        raw_phi.extend(report.match.phi_errors_deg.tolist())
        if report.success:
            success_theta.extend(report.match.theta_errors_deg.tolist())
            success_phi.extend(report.match.phi_errors_deg.tolist())
    model = config.flop_model()
    extraction = "" if config.algorithm == "grid" else config.extraction
    return AggregateReport(
        algo=config.algorithm,
        extraction=extraction,
        num_elements=config.num_elements,
        num_sources=len(config.source_azimuth_deg),
        snr_db=config.snr_db,
        snapshots=config.snapshots,
        trials=len(reports),
        mae_theta_deg=_mean(success_theta),
        mae_phi_deg=_mean(success_phi),
        success_rate=float(np.mean([r.success for r in reports])),
        model_mflops=float(np.mean([r.model_flops for r in reports])) / 1e6,
        measured_evals=float(np.mean([r.measured_evals for r in reports])),
        wall_ms=float(np.mean([r.wall_ms for r in reports])),
        raw_mae_theta_deg=_mean(raw_theta),
        raw_mae_phi_deg=_mean(raw_phi),
        flops_ratio_vs_grid=1.0 if config.algorithm == "grid" else flops_population(model) / flops_music(model),
        theta_error_samples=tuple(raw_theta),
        phi_error_samples=tuple(raw_phi),
    )


def run_sweep(config: ScenarioConfig, snr_values, workers: int = 1):
    """One aggregate per SNR value, plus the per-trial reports for CDF export."""
    aggregates, reports_by_snr = [], {}
    for snr in snr_values:
        scenario = replace(config, snr_db=float(snr))
        reports = run_trials(scenario, workers=workers)
        aggregates.append(aggregate(scenario, reports))
        reports_by_snr[float(snr)] = reports
    return aggregates, reports_by_snr


def run_extraction_comparison(
    config: ScenarioConfig, methods=EXTRACTIONS, workers: int = 1
) -> dict[str, list[TrialReport]]:
    """Score several extraction methods on identical final populations: the
    optimizer runs once per trial and every method consumes that population."""
    if config.algorithm == "grid":
        raise ConfigError("extraction comparison needs a population algorithm")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_compare_one_star, [(config, i, tuple(methods)) for i in range(config.trials)], chunksize=4))
    else:
        rows = [_compare_one(config, i, tuple(methods)) for i in range(config.trials)]
    return {method: [row[method] for row in rows] for method in methods}


def _compare_one(config: ScenarioConfig, trial_index: int, methods: tuple[str, ...]) -> dict[str, TrialReport]:
    proj = _trial_projector(config, trial_index)
    model_flops = flops_population(config.flop_model())
    started = time.perf_counter()
    population, evals = _optimize(config, proj, trial_index)
    optimize_ms = (time.perf_counter() - started) * 1e3
    out = {}
    for method in methods:
        extraction = _extract(config, method, population, trial_index)
        out[method] = _score(
            config, trial_index, extraction.estimates, extraction.shortfall, model_flops, evals, optimize_ms
        )
    return out


def _compare_one_star(args) -> dict[str, TrialReport]:
    return _compare_one(*args)


def run_population_sweep(config: ScenarioConfig, sizes, workers: int = 1) -> list[AggregateReport]:
    """Accuracy/cost trade-off versus population size at a fixed SNR."""
    aggregates = []
    for size in sizes:
        try:
            optimizer = replace(config.optimizer, population_size=int(size))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        scenario = replace(config, optimizer=optimizer)
        aggregates.append(aggregate(scenario, run_trials(scenario, workers=workers)))
    return aggregates


def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sorted samples and cumulative fractions (1/n .. 1); empty input allowed."""
    values = np.sort(np.asarray(samples, dtype=float))
    return values, np.arange(1, len(values) + 1) / max(len(values), 1)


TABLE_SENSOR_COUNTS = (12, 32, 128)
TABLE_SOURCE_COUNTS = (1, 3, 10)


def complexity_cells(grid_points: int = 361 * 91, population_size: int = 256, max_iterations: int = 20):
    """The nine (sensors, sources) cost-model cells as MFLOP pairs and ratios."""
    cells = []
    for num_sources in TABLE_SOURCE_COUNTS:
        for num_sensors in TABLE_SENSOR_COUNTS:
            model = FlopModel(num_sensors, num_sources, grid_points, population_size, max_iterations)
            music = flops_music(model)
            population = flops_population(model)
            cells.append(
                {
                    "M": num_sensors,
                    "L": num_sources,
                    "music_mflops": music / 1e6,
                    "population_mflops": population / 1e6,
                    "ratio": population / music,
                }
            )
    return cells


def format_complexity_table(cells) -> str:
    """Grid-search vs population cost per cell, printed as music/population (1:ratio)."""
    by_key = {(cell["M"], cell["L"]): cell for cell in cells}
    widths = 27
    lines = ["MUSIC/population (MFLOPs)".ljust(widths) + "".join(f"M = {m}".ljust(widths) for m in TABLE_SENSOR_COUNTS)]
    for num_sources in TABLE_SOURCE_COUNTS:
        parts = [f"L = {num_sources}".ljust(widths)]
        for num_sensors in TABLE_SENSOR_COUNTS:
            cell = by_key[(num_sensors, num_sources)]
            parts.append(
                f"{cell['music_mflops']:.1f}/{cell['population_mflops']:.1f} (1:{cell['ratio']:.2f})".ljust(widths)
            )
        lines.append("".join(parts).rstrip())
    return "\n".join(lines)


def write_summary_csv(aggregates: list[AggregateReport], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for agg in aggregates:
            writer.writerow(agg.csv_row())


def write_errors_csv(config: ScenarioConfig, reports_by_snr: dict[float, list[TrialReport]], path) -> None:
    """Per-matched-pair absolute errors, one row each, for CDF plotting."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extraction = "" if config.algorithm == "grid" else config.extraction
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(ERROR_COLUMNS)
        for snr in sorted(reports_by_snr):
            for report in reports_by_snr[snr]:
                match = report.match
                for truth, t_err, p_err in zip(match.truth_indices, match.theta_errors_deg, match.phi_errors_deg):
                    writer.writerow([config.algorithm, extraction, snr, report.trial, int(truth), t_err, p_err])
