"""2D-MUSIC pseudo-spectrum, exhaustive grid search, and the FLOP cost model.

The pseudo-spectrum height at a candidate direction is
1 / (a^H G a) with G the noise-subspace projector; peaks mark directions
whose steering vectors are nearly orthogonal to the noise subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .signal_model import ArrayGeometry, SubspaceSplit, steering_matrix, TWO_PI

# Floor for the projected power a^H G a: keeps the spectrum finite at exact
# orthogonality (noiseless peaks) without disturbing peak ordering.
DENOMINATOR_FLOOR = 1e-12

__all__ = [
    "NoiseProjector",
    "noise_projector",
    "projection_power",
    "music_value",
    "music_values",
    "spectrum_objective",
    "GridSpec",
    "SpectrumGrid",
    "evaluate_grid",
    "GridSearchResult",
    "grid_search",
    "FlopModel",
    "flops_music",
    "flops_population",
]


@dataclass(frozen=True)
class NoiseProjector:
    """Pre-computed projector onto the noise subspace: the cached objective kernel.

    ``matrix`` is Hermitian and idempotent with trace equal to the noise
    subspace dimension (elements minus sources).
    """

    matrix: np.ndarray
    num_sources: int
    geometry: ArrayGeometry

    def validate(self, hermitian_tol: float = 1e-12, projector_tol: float = 1e-8) -> None:
        g = self.matrix
        if np.max(np.abs(g - g.conj().T)) > hermitian_tol:
            raise ValueError("projector is not Hermitian")
        if np.max(np.abs(g @ g - g)) > projector_tol:
            raise ValueError("projector is not idempotent")
        expected = self.geometry.num_elements - self.num_sources
        if abs(np.trace(g).real - expected) > projector_tol:
            raise ValueError("projector trace does not match the noise dimension")


def noise_projector(split: SubspaceSplit, geometry: ArrayGeometry) -> NoiseProjector:
    """Build G = U_n U_n^H from a subspace split (symmetrized to exact Hermitian)."""
    g = split.noise_basis @ split.noise_basis.conj().T
    g = (g + g.conj().T) / 2.0
    return NoiseProjector(matrix=g, num_sources=split.signal_basis.shape[1], geometry=geometry)


def projection_power(proj: NoiseProjector, azimuths_rad, elevations_rad) -> np.ndarray:
    """a^H G a per angle pair; lies in [0, M] since G is an orthogonal projector.

    Azimuth wraps modulo 2*pi; elevation is clipped to [0, pi/2] to absorb
    floating-point overshoot from degree conversions.
    """
    az = np.mod(np.atleast_1d(np.asarray(azimuths_rad, dtype=float)), TWO_PI)
    el = np.clip(np.atleast_1d(np.asarray(elevations_rad, dtype=float)), 0.0, np.pi / 2.0)
    a = steering_matrix(proj.geometry, az, el)
    return np.einsum("mn,mn->n", a.conj(), proj.matrix @ a).real


def music_values(proj: NoiseProjector, azimuths_rad, elevations_rad) -> np.ndarray:
    """Pseudo-spectrum heights 1 / max(a^H G a, floor) for a batch of angles."""
    return 1.0 / np.maximum(projection_power(proj, azimuths_rad, elevations_rad), DENOMINATOR_FLOOR)


def music_value(proj: NoiseProjector, azimuth_rad: float, elevation_rad: float) -> float:
    """Pseudo-spectrum height at one direction (radians). Strictly positive."""
    return float(music_values(proj, [azimuth_rad], [elevation_rad])[0])


def spectrum_objective(proj: NoiseProjector) -> Callable[[np.ndarray], np.ndarray]:
    """Batched objective over (azimuth_deg, elevation_deg) rows, for optimizers."""

    def objective(positions_deg: np.ndarray) -> np.ndarray:
        pos = np.atleast_2d(np.asarray(positions_deg, dtype=float))
        return music_values(proj, np.deg2rad(pos[:, 0]), np.deg2rad(pos[:, 1]))

    return objective


@dataclass(frozen=True)
class GridSpec:
    """Uniform search grid, endpoints inclusive on both axes.

    The default 1-degree grid over [0, 360] x [0, 90] has 361 * 91 = 32851
    points; 0 and 360 degrees azimuth are distinct samples of the same
    direction and get merged during peak extraction.
    """

    azimuth_range: tuple[float, float] = (0.0, 360.0)
    elevation_range: tuple[float, float] = (0.0, 90.0)
    azimuth_step: float = 1.0
    elevation_step: float = 1.0

    def __post_init__(self):
        for (lo, hi), step in ((self.azimuth_range, self.azimuth_step), (self.elevation_range, self.elevation_step)):
            if not lo < hi:
                raise ValueError("grid range must satisfy lo < hi")
            if step <= 0:
                raise ValueError("grid step must be positive")

    @property
    def num_azimuth(self) -> int:
        lo, hi = self.azimuth_range
        return int(round((hi - lo) / self.azimuth_step)) + 1

    @property
    def num_elevation(self) -> int:
        lo, hi = self.elevation_range
        return int(round((hi - lo) / self.elevation_step)) + 1

    @property
    def num_points(self) -> int:
        return self.num_azimuth * self.num_elevation

    def azimuth_values(self) -> np.ndarray:
        return np.linspace(self.azimuth_range[0], self.azimuth_range[1], self.num_azimuth)

    def elevation_values(self) -> np.ndarray:
        return np.linspace(self.elevation_range[0], self.elevation_range[1], self.num_elevation)


@dataclass(frozen=True)
class SpectrumGrid:
    """Pseudo-spectrum sampled on a grid: values[i, j] at (azimuth i, elevation j)."""

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    values: np.ndarray


def evaluate_grid(proj: NoiseProjector, spec: GridSpec) -> SpectrumGrid:
    """Evaluate the pseudo-spectrum at every grid point (one batched pass)."""
    az = spec.azimuth_values()
    el = spec.elevation_values()
    az_mesh, el_mesh = np.meshgrid(az, el, indexing="ij")
    values = music_values(proj, np.deg2rad(az_mesh.ravel()), np.deg2rad(el_mesh.ravel()))
    return SpectrumGrid(azimuth_deg=az, elevation_deg=el, values=values.reshape(az_mesh.shape))


# Relative margin for strict dominance: spectrum values equal up to a few ulps
# (a flat spectrum region) must not register as local maxima.
_STRICT_MARGIN = 1e-12


def _local_maxima_mask(values: np.ndarray) -> np.ndarray:
    """Cells strictly greater than every existing 8-neighborhood cell.

    Padding with -inf makes boundary cells compare only their real neighbors.
    Strictness carries a relative margin so floating-point jitter on flat
    regions cannot fabricate peaks.
    """
    padded = np.full((values.shape[0] + 2, values.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = values
    neighbor_max = np.full_like(values, -np.inf)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]
            neighbor_max = np.maximum(neighbor_max, shifted)
    return values > neighbor_max + np.abs(neighbor_max) * _STRICT_MARGIN


def _circular_difference(a: np.ndarray, b: float, period: float = 360.0) -> np.ndarray:
    d = np.abs(np.asarray(a, dtype=float) - b) % period
    return np.minimum(d, period - d)


def _dedupe_circular(azimuth, elevation, values, azimuth_step, elevation_step, period=360.0):
    """Drop maxima that duplicate a better one across the azimuth wrap seam.

    Candidates closer than one grid step in circular azimuth AND one step in
    elevation are the same physical peak sampled twice (e.g. the 0 and 360
    degree columns); the higher-valued copy wins. Ordering is deterministic:
    by value descending, then azimuth, then elevation.
    """
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.lexsort((elevation, azimuth, -values))
    keep: list[int] = []
    for idx in order:
        duplicate = False
        for kept in keep:
            if (
                _circular_difference(azimuth[idx], azimuth[kept], period) < azimuth_step
                and abs(elevation[idx] - elevation[kept]) < elevation_step
            ):
                duplicate = True
                break
        if not duplicate:
            keep.append(int(idx))
    return np.array(keep, dtype=int)


@dataclass(frozen=True)
class GridSearchResult:
    """Top peaks of a grid evaluation, sorted by value descending.

    ``shortfall`` is set when the spectrum exposes fewer strict local maxima
    than requested; callers must treat the result as a partial answer.
    """

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    values: np.ndarray
    shortfall: bool
    num_evaluations: int


def grid_search(proj: NoiseProjector, spec: GridSpec, num_sources: int) -> GridSearchResult:
    """Exhaustive grid evaluation followed by strict local-maximum extraction."""
    if num_sources < 1:
        raise ValueError("num_sources must be positive")
    grid = evaluate_grid(proj, spec)
    mask = _local_maxima_mask(grid.values)
    i_idx, j_idx = np.nonzero(mask)
    az = grid.azimuth_deg[i_idx]
    el = grid.elevation_deg[j_idx]
    vals = grid.values[i_idx, j_idx]
    keep = _dedupe_circular(az, el, vals, spec.azimuth_step, spec.elevation_step)
    top = keep[:num_sources]
    return GridSearchResult(
        azimuth_deg=az[top],
        elevation_deg=el[top],
        values=vals[top],
        shortfall=len(keep) < num_sources,
        num_evaluations=spec.num_points,
    )


@dataclass(frozen=True)
class FlopModel:
    """Parameters of the closed-form cost model.

    ``grid_points`` is the number of spectrum samples of the exhaustive
    search; ``population_size`` and ``max_iterations`` drive the
    population-based alternative. Both models share the subspace
    decomposition term sensors^2 * (sources + 2).
    """

    num_sensors: int
    num_sources: int
    grid_points: int = 361 * 91
    population_size: int = 256
    max_iterations: int = 20

    def __post_init__(self):
        if min(self.num_sensors, self.num_sources, self.grid_points, self.population_size, self.max_iterations) <= 0:
            raise ValueError("all cost-model parameters must be positive")
        if self.num_sources >= self.num_sensors:
            raise ValueError("num_sources must stay below num_sensors")


def flops_music(model: FlopModel) -> float:
    """Grid-search cost: M^2 (L+2) + J (M+1)(M-L) floating-point operations."""
    m, l, j = model.num_sensors, model.num_sources, model.grid_points
    return float(m * m * (l + 2) + j * (m + 1) * (m - l))


def flops_population(model: FlopModel) -> float:
    """Population-search cost: M^2 (L+2) + I * N * ((M+1)(M-L) + (N-1)) FLOPs,

    where I iterations of an N-individual population each pay one spectrum
    evaluation per individual plus the pairwise-distance bookkeeping N(N-1).
    """
    m, l = model.num_sensors, model.num_sources
    n, iters = model.population_size, model.max_iterations
    return float(m * m * (l + 2) + iters * n * ((m + 1) * (m - l) + (n - 1)))
