"""Differential evolution over the (azimuth, elevation) box, with niching variants.

All optimizers maximize a batched objective: a callable taking an (n, 2)
array of (azimuth_deg, elevation_deg) rows and returning n fitness values.
Five variants share one generation engine:

  de       plain global DE, converges to a single optimum
  denm     neighborhood mutation: donors come from each individual's m
           nearest neighbors, so subpopulations settle on distinct peaks
  dcde     deterministic crowding: trials replace their nearest current
           individual instead of their parent
  sharede  fitness sharing: selection pressure divided by niche crowding
  sde      speciation: fitness-sorted greedy seed partitioning, each
           species evolves independently

Runs are deterministic for a fixed config seed. Generations are
synchronous: donors and trials are built from the generation-start
snapshot, and replacements are applied afterwards in index order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

Objective = Callable[[np.ndarray], np.ndarray]

ALGORITHMS = ("de", "denm", "dcde", "sharede", "sde")

__all__ = [
    "ALGORITHMS",
    "SearchBox",
    "DEConfig",
    "Individual",
    "Population",
    "CountingObjective",
    "de_mutate",
    "de_crossover",
    "de_run",
    "denm_run",
    "crowding_de_run",
    "sharing_de_run",
    "species_de_run",
    "run_population",
    "nearest_neighbor_indices",
    "shared_fitness",
]


@dataclass(frozen=True)
class SearchBox:
    """Axis-aligned (azimuth, elevation) search domain in degrees."""

    azimuth_bounds: tuple[float, float] = (0.0, 360.0)
    elevation_bounds: tuple[float, float] = (0.0, 90.0)

    def __post_init__(self):
        for lo, hi in (self.azimuth_bounds, self.elevation_bounds):
            if not lo < hi:
                raise ValueError("bounds must satisfy lo < hi")

    @property
    def lows(self) -> np.ndarray:
        return np.array([self.azimuth_bounds[0], self.elevation_bounds[0]])

    @property
    def highs(self) -> np.ndarray:
        return np.array([self.azimuth_bounds[1], self.elevation_bounds[1]])

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lows, self.highs, size=(count, 2))

    def contains(self, positions: np.ndarray) -> bool:
        pos = np.atleast_2d(positions)
        return bool(np.all(pos >= self.lows) and np.all(pos <= self.highs))

    def reflect(self, positions: np.ndarray) -> np.ndarray:
        """Mirror out-of-bounds coordinates at the violated bound, repeated
        until inside (closed form: triangle-wave fold onto [lo, hi])."""
        lo = self.lows
        span = self.highs - lo
        folded = np.mod(np.asarray(positions, dtype=float) - lo, 2.0 * span)
        return lo + span - np.abs(folded - span)


@dataclass(frozen=True)
class DEConfig:
    """Knobs shared by all variants; neighborhood_size only drives denm.

    Defaults were tuned on the reference three-source scenario: 16 neighbors
    hold all peaks reliably where 8 occasionally lets a subpopulation settle
    on a shoulder of a true peak.
    """

    population_size: int = 256
    scale_factor: float = 0.5
    crossover_rate: float = 0.9
    max_iterations: int = 20
    neighborhood_size: int = 16
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be at least 4")
        if not 4 <= self.neighborhood_size <= self.population_size - 1:
            # three donors distinct from the target must exist among the
            # neighbors, and a point is never its own neighbor
            raise ValueError("neighborhood_size must lie in [4, population_size - 1]")
        if self.scale_factor <= 0:
            raise ValueError("scale_factor must be positive")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")


class Individual(NamedTuple):
    position: np.ndarray  # (azimuth_deg, elevation_deg)
    fitness: float


@dataclass
class Population:
    """Candidate points plus fitness; length is invariant across generations."""

    positions: np.ndarray  # (P, 2)
    fitness: np.ndarray  # (P,)
    generation: int = 0

    def __len__(self) -> int:
        return len(self.fitness)

    def best(self) -> Individual:
        i = int(np.argmax(self.fitness))  # ties: lowest index
        return Individual(self.positions[i].copy(), float(self.fitness[i]))


class CountingObjective:
    """Wraps an objective and counts per-row evaluations, the cost-model unit."""

    def __init__(self, objective: Objective):
        self.objective = objective
        self.count = 0

    def __call__(self, positions: np.ndarray) -> np.ndarray:
        pos = np.atleast_2d(positions)
        self.count += len(pos)
        return self.objective(pos)


def de_mutate(base, diff_a, diff_b, scale_factor: float, box: SearchBox) -> np.ndarray:
    """Donor combination base + F * (diff_a - diff_b), reflected into the box."""
    mutant = np.asarray(base, dtype=float) + scale_factor * (
        np.asarray(diff_a, dtype=float) - np.asarray(diff_b, dtype=float)
    )
    return box.reflect(mutant)


def de_crossover(parent, mutant, crossover_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Binomial crossover: each coordinate comes from the mutant with
    probability crossover_rate, and one uniformly chosen coordinate always
    does (so the trial differs from the parent whenever the mutant does).

    Accepts a single (2,) pair or an (n, 2) batch; one rng draw pattern per row.
    """
    single = np.asarray(parent).ndim == 1
    x = np.atleast_2d(np.asarray(parent, dtype=float))
    v = np.atleast_2d(np.asarray(mutant, dtype=float))
    take = rng.random(x.shape) < crossover_rate
    forced = rng.integers(x.shape[1], size=x.shape[0])
    take[np.arange(x.shape[0]), forced] = True
    trial = np.where(take, v, x)
    return trial[0] if single else trial


def nearest_neighbor_indices(positions: np.ndarray, count: int) -> np.ndarray:
    """Each point's ``count`` nearest neighbors by Euclidean distance,
    self excluded, distance ties broken toward the lower index."""
    pos = np.asarray(positions, dtype=float)
    if not 1 <= count <= len(pos) - 1:
        raise ValueError("count must lie in [1, len(positions) - 1]")
    delta = pos[:, None, :] - pos[None, :, :]
    dist_sq = np.einsum("ijk,ijk->ij", delta, delta)
    np.fill_diagonal(dist_sq, np.inf)
    return np.argsort(dist_sq, axis=1, kind="stable")[:, :count]


def _global_donor_candidates(size: int) -> np.ndarray:
    """Row i lists every index except i."""
    base = np.tile(np.arange(size - 1), (size, 1))
    return base + (base >= np.arange(size)[:, None])


def _pick_donors(rng: np.random.Generator, candidates: np.ndarray) -> np.ndarray:
    """Three distinct donors per row, uniformly from that row's candidates."""
    order = np.argsort(rng.random(candidates.shape), axis=1)[:, :3]
    donors = np.take_along_axis(candidates, order, axis=1)
    assert np.all(donors[:, 0] != donors[:, 1])
    assert np.all(donors[:, 0] != donors[:, 2])
    assert np.all(donors[:, 1] != donors[:, 2])
    return donors


def _evaluate(objective: Objective, positions: np.ndarray) -> np.ndarray:
    values = np.asarray(objective(positions), dtype=float)
    if values.shape != (len(positions),):
        raise ValueError("objective must return one fitness value per row")
    return values


def _generation_trials(
    positions: np.ndarray,
    rng: np.random.Generator,
    config: DEConfig,
    box: SearchBox,
    candidates: np.ndarray,
) -> np.ndarray:
    """Mutate + crossover for every slot, from the generation-start snapshot."""
    donors = _pick_donors(rng, candidates)
    assert np.all(donors != np.arange(len(positions))[:, None])  # donors never include the target
    mutant = de_mutate(
        positions[donors[:, 0]],
        positions[donors[:, 1]],
        positions[donors[:, 2]],
        config.scale_factor,
        box,
    )
    return de_crossover(positions, mutant, config.crossover_rate, rng)


def _init(objective: Objective, box: SearchBox, config: DEConfig):
    rng = np.random.default_rng(config.rng_seed)
    positions = box.sample(rng, config.population_size)
    fitness = _evaluate(objective, positions)
    return rng, positions, fitness


def _run_greedy(objective: Objective, box: SearchBox, config: DEConfig, neighborhood: bool) -> Population:
    """Shared engine for plain DE (global donors) and denm (neighbor donors),
    with greedy 1-for-1 parent replacement when the trial is at least as fit."""
    rng, positions, fitness = _init(objective, box, config)
    global_candidates = None if neighborhood else _global_donor_candidates(config.population_size)
    for _ in range(config.max_iterations):
        if neighborhood:
            candidates = nearest_neighbor_indices(positions, config.neighborhood_size)
        else:
            candidates = global_candidates
        trials = _generation_trials(positions, rng, config, box, candidates)
        trial_fitness = _evaluate(objective, trials)
        accept = trial_fitness >= fitness
        positions[accept] = trials[accept]
        fitness[accept] = trial_fitness[accept]
    return Population(positions, fitness, config.max_iterations)


def de_run(objective: Objective, box: SearchBox, config: DEConfig) -> Individual:
    """Plain global DE; returns the single best individual found."""
    return _run_greedy(objective, box, config, neighborhood=False).best()


def denm_run(objective: Objective, box: SearchBox, config: DEConfig) -> Population:
    """DE with mutation donors restricted to each individual's nearest
    neighbors. Local donor pools keep subpopulations on their own optima, so
    the full final population (not just the best point) is the result."""
    return _run_greedy(objective, box, config, neighborhood=True)


def crowding_de_run(objective: Objective, box: SearchBox, config: DEConfig) -> Population:
    """Global-donor DE where each trial competes with the nearest current
    individual rather than its parent. Replacements are applied in trial
    index order, so the run is deterministic."""
    rng, positions, fitness = _init(objective, box, config)
    candidates = _global_donor_candidates(config.population_size)
    for _ in range(config.max_iterations):
        trials = _generation_trials(positions, rng, config, box, candidates)
        trial_fitness = _evaluate(objective, trials)
        for i in range(config.population_size):
            delta = positions - trials[i]
            nearest = int(np.argmin(np.einsum("ij,ij->i", delta, delta)))  # ties: lowest index
            if trial_fitness[i] >= fitness[nearest]:
                positions[nearest] = trials[i]
                fitness[nearest] = trial_fitness[i]
    return Population(positions, fitness, config.max_iterations)


def shared_fitness(positions: np.ndarray, fitness: np.ndarray, share_radius: float) -> np.ndarray:
    """Fitness divided by the niche count sum_j max(0, 1 - d_ij / share_radius)
    over the whole population. The self term contributes 1, so an isolated
    point keeps its raw fitness and two coincident points each keep half."""
    if share_radius <= 0:
        raise ValueError("share_radius must be positive")
    counts = _niche_counts(np.asarray(positions, dtype=float), np.asarray(positions, dtype=float), share_radius)
    return np.asarray(fitness, dtype=float) / counts


def _niche_counts(points: np.ndarray, population: np.ndarray, share_radius: float) -> np.ndarray:
    delta = points[:, None, :] - population[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta))
    return np.maximum(0.0, 1.0 - dist / share_radius).sum(axis=1)


def sharing_de_run(
    objective: Objective, box: SearchBox, config: DEConfig, share_radius: float = 15.0
) -> Population:
    """Global-donor DE selecting on niche-shared fitness: a trial replaces its
    parent when trial/niche_count beats parent/niche_count, both counted
    against the generation-start population. Raw fitness stays on the
    returned individuals for peak extraction."""
    if share_radius <= 0:
        raise ValueError("share_radius must be positive")
    rng, positions, fitness = _init(objective, box, config)
    candidates = _global_donor_candidates(config.population_size)
    size = config.population_size
    for _ in range(config.max_iterations):
        trials = _generation_trials(positions, rng, config, box, candidates)
        trial_fitness = _evaluate(objective, trials)
        parent_counts = _niche_counts(positions, positions, share_radius)
        # symmetric trial counts: self term (1) plus the snapshot without the
        # parent slot, mirroring how a parent counts itself plus the others
        cross = _niche_counts(trials, positions, share_radius)
        parent_term = np.maximum(
            0.0, 1.0 - np.sqrt(np.einsum("ij,ij->i", trials - positions, trials - positions)) / share_radius
        )
        trial_counts = 1.0 + cross - parent_term
        accept = trial_fitness / trial_counts >= fitness / parent_counts
        positions[accept] = trials[accept]
        fitness[accept] = trial_fitness[accept]
    return Population(positions, fitness, config.max_iterations)


def _assign_species(positions: np.ndarray, fitness: np.ndarray, species_radius: float) -> np.ndarray:
    """Greedy seed partitioning: walk individuals by fitness descending, the
    fittest unassigned one seeds a species and captures every unassigned
    individual within species_radius. Returns per-individual species ids in
    seed discovery order."""
    size = len(fitness)
    species_of = np.full(size, -1, dtype=int)
    num_species = 0
    for idx in np.argsort(-np.asarray(fitness, dtype=float), kind="stable"):
        if species_of[idx] >= 0:
            continue
        delta = positions - positions[idx]
        within = np.sqrt(np.einsum("ij,ij->i", delta, delta)) <= species_radius
        species_of[within & (species_of < 0)] = num_species
        num_species += 1
    return species_of


def species_de_run(
    objective: Objective, box: SearchBox, config: DEConfig, species_radius: float = 15.0
) -> Population:
    """Species-based DE: re-partition each generation, evolve each species
    with donors drawn from inside it. Species smaller than four are topped
    up with fresh uniform samples used as donors only (never evaluated), so
    the evaluation budget stays one trial per individual per generation."""
    if species_radius <= 0:
        raise ValueError("species_radius must be positive")
    rng, positions, fitness = _init(objective, box, config)
    size = config.population_size
    for _ in range(config.max_iterations):
        species_of = _assign_species(positions, fitness, species_radius)
        trials = np.empty_like(positions)
        for species in range(species_of.max() + 1):
            members = np.flatnonzero(species_of == species)
            for i in members:
                pool = positions[members[members != i]]
                if len(pool) < 3:
                    filler = box.sample(rng, 3 - len(pool))
                    pool = np.vstack([pool, filler]) if len(pool) else filler
                picks = rng.choice(len(pool), size=3, replace=False)
                mutant = de_mutate(pool[picks[0]], pool[picks[1]], pool[picks[2]], config.scale_factor, box)
                trials[i] = de_crossover(positions[i], mutant, config.crossover_rate, rng)
        trial_fitness = _evaluate(objective, trials)
        accept = trial_fitness >= fitness
        positions[accept] = trials[accept]
        fitness[accept] = trial_fitness[accept]
    return Population(positions, fitness, config.max_iterations)


def run_population(
    algorithm: str,
    objective: Objective,
    box: SearchBox,
    config: DEConfig,
    share_radius: float = 15.0,
    species_radius: float = 15.0,
) -> Population:
    """Dispatch by algorithm id; every variant returns its full final population."""
    if algorithm == "de":
        return _run_greedy(objective, box, config, neighborhood=False)
    if algorithm == "denm":
        return denm_run(objective, box, config)
    if algorithm == "dcde":
        return crowding_de_run(objective, box, config)
    if algorithm == "sharede":
        return sharing_de_run(objective, box, config, share_radius)
    if algorithm == "sde":
        return species_de_run(objective, box, config, species_radius)
    raise ValueError(f"unknown algorithm {algorithm!r}, expected one of {ALGORITHMS}")
