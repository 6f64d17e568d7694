"""Synthetic narrowband array snapshots and covariance subspace tools.

Implements the standard far-field model X(t) = A s(t) + n(t) for planar
arrays (uniform circular array by default), the sample covariance
estimate R = (1/T) X X^H, and its signal/noise eigen-split, which is the
input to subspace DOA estimators.

Angle conventions: azimuth measured in the array plane, elevation
measured from zenith (elevation 0 points along the array normal, pi/2
lies in the array plane). Geometry-level operations use radians; source
descriptions and everything downstream of them use degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Eigenvalue gap below which the signal/noise split is ambiguous and the
# result is flagged (never silently guessed).
EIGEN_GAP_TOL = 1e-12

__all__ = [
    "ArrayGeometry",
    "SourceSet",
    "SubspaceSplit",
    "steering_vector",
    "steering_matrix",
    "synthesize_snapshots",
    "sample_covariance",
    "subspace_split",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar antenna array, element positions in meters.

    The ``uca`` factory keeps the defining radius and element azimuths
    (phi_m = 2*pi*m/M for m = 1..M); rectangular arrays leave those None.
    """

    num_elements: int
    wavelength: float
    element_x: np.ndarray
    element_y: np.ndarray
    radius: float | None = None
    element_azimuths: np.ndarray | None = None

    def __post_init__(self):
        if self.num_elements < 2:
            raise ValueError("array needs at least two elements")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        object.__setattr__(self, "element_x", np.asarray(self.element_x, dtype=float))
        object.__setattr__(self, "element_y", np.asarray(self.element_y, dtype=float))
        if self.element_x.shape != (self.num_elements,) or self.element_y.shape != (self.num_elements,):
            raise ValueError("element positions must have exactly num_elements entries")
        if self.radius is not None and self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.element_azimuths is not None:
            az = np.asarray(self.element_azimuths, dtype=float)
            object.__setattr__(self, "element_azimuths", az)
            if az.shape != (self.num_elements,):
                raise ValueError("element_azimuths must have exactly num_elements entries")
            if np.any(np.diff(az) <= 0):
                raise ValueError("element_azimuths must be strictly increasing")
            wrapped = np.sort(np.mod(az, TWO_PI))
            if np.any(np.diff(wrapped) < 1e-12):
                raise ValueError("element_azimuths must be distinct modulo 2*pi")

    @classmethod
    def uca(cls, num_elements: int, wavelength: float = 1.0, radius: float | None = None) -> "ArrayGeometry":
        """Uniform circular array; radius defaults to one wavelength.

        With radius equal to the wavelength the steering phase prefactor
        2*pi*radius/wavelength reduces to 2*pi.
        """
        if radius is None:
            radius = wavelength
        azimuths = TWO_PI * np.arange(1, num_elements + 1) / num_elements
        return cls(
            num_elements=num_elements,
            wavelength=wavelength,
            element_x=radius * np.cos(azimuths),
            element_y=radius * np.sin(azimuths),
            radius=radius,
            element_azimuths=azimuths,
        )

    @classmethod
    def ura(cls, num_x: int, num_y: int, wavelength: float = 1.0, spacing: float | None = None) -> "ArrayGeometry":
        """Uniform rectangular array on a centered grid, default half-wavelength
        spacing. Supported as an extension behind the same steering interface;
        only the circular layout is exercised by the benchmark scenarios."""
        if num_x < 1 or num_y < 1:
            raise ValueError("grid dimensions must be positive")
        if spacing is None:
            spacing = wavelength / 2.0
        if spacing <= 0:
            raise ValueError("spacing must be positive")
        xs = spacing * (np.arange(num_x) - (num_x - 1) / 2.0)
        ys = spacing * (np.arange(num_y) - (num_y - 1) / 2.0)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return cls(num_x * num_y, wavelength, gx.ravel(), gy.ravel())


@dataclass(frozen=True)
class SourceSet:
    """Far-field narrowband sources: matched azimuth/elevation lists in degrees.

    Powers are relative weights (default all ones). The source count must stay
    below the element count of whatever array the set is used with, so that a
    noise subspace exists; that check happens at synthesis time.
    """

    azimuth_deg: np.ndarray
    elevation_deg: np.ndarray
    power: np.ndarray | None = None

    def __post_init__(self):
        az = np.atleast_1d(np.asarray(self.azimuth_deg, dtype=float))
        el = np.atleast_1d(np.asarray(self.elevation_deg, dtype=float))
        object.__setattr__(self, "azimuth_deg", az)
        object.__setattr__(self, "elevation_deg", el)
        if az.ndim != 1 or az.shape != el.shape or len(az) < 1:
            raise ValueError("azimuth and elevation lists must be 1-D and the same length")
        if np.any(az < 0.0) or np.any(az >= 360.0):
            raise ValueError("azimuths must lie in [0, 360) degrees")
        if np.any(el < 0.0) or np.any(el > 90.0):
            raise ValueError("elevations must lie in [0, 90] degrees")
        pairs = {(float(a), float(e)) for a, e in zip(az, el)}
        if len(pairs) != len(az):
            raise ValueError("sources must have distinct (azimuth, elevation) pairs")
        power = self.power
        if power is None:
            power = np.ones(len(az))
        power = np.atleast_1d(np.asarray(power, dtype=float))
        if power.shape != az.shape or np.any(power <= 0):
            raise ValueError("power must list one positive value per source")
        object.__setattr__(self, "power", power)

    @property
    def count(self) -> int:
        return len(self.azimuth_deg)


@dataclass(frozen=True)
class SubspaceSplit:
    """Signal/noise eigen-split of a covariance matrix.

    Eigenvalues are sorted descending; the top block spans the signal
    subspace. ``degenerate_gap`` is set when the eigenvalues on either side
    of the split are nearly equal, which makes the split ambiguous.
    """

    signal_basis: np.ndarray
    noise_basis: np.ndarray
    signal_eigenvalues: np.ndarray
    noise_eigenvalues: np.ndarray
    degenerate_gap: bool


def steering_matrix(geom: ArrayGeometry, azimuths, elevations) -> np.ndarray:
    """Stack steering vectors as columns, one per (azimuth, elevation) pair.

    Element m responds with exp(-1j * (2*pi/lam) * (x_m cos(az) + y_m sin(az)) * sin(el)).
    For a circular array this reduces to exp(-1j * (2*pi*r/lam) * cos(phi_m - az) * sin(el)).
    Angles in radians; no range validation here since the phase wraps naturally.
    """
    az = np.atleast_1d(np.asarray(azimuths, dtype=float))
    el = np.atleast_1d(np.asarray(elevations, dtype=float))
    wavenumber = TWO_PI / geom.wavelength
    in_plane = geom.element_x[:, None] * np.cos(az)[None, :] + geom.element_y[:, None] * np.sin(az)[None, :]
    return np.exp(-1j * wavenumber * in_plane * np.sin(el)[None, :])


def steering_vector(geom: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-modulus array response for a plane wave from (azimuth, elevation).

    Angles in radians, azimuth in [0, 2*pi), elevation in [0, pi/2].
    Elevation 0 (zenith) gives the all-ones vector.
    """
    if not 0.0 <= azimuth < TWO_PI:
        raise ValueError(f"azimuth {azimuth!r} outside [0, 2*pi)")
    if not 0.0 <= elevation <= np.pi / 2.0:
        raise ValueError(f"elevation {elevation!r} outside [0, pi/2]")
    return steering_matrix(geom, [azimuth], [elevation])[:, 0]


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circular complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def synthesize_snapshots(
    geom: ArrayGeometry,
    sources: SourceSet,
    snr_db: float,
    num_snapshots: int,
    rng_seed: int,
) -> np.ndarray:
    """Simulate received snapshots X = A S + N, shape (num_elements, num_snapshots).

    Source symbols are i.i.d. circular complex Gaussian, independent across
    sources; noise is white circular complex Gaussian. The scale is gauged to
    unit noise variance: a source of configured power p carries per-element
    power p * 10^(snr_db/10), so for the default unit powers snr_db is exactly
    the per-element per-source SNR. The infinities are handled by zeroing the
    vanishing side: snr_db = +inf drops the noise (sources at power p),
    snr_db = -inf drops the signal (pure unit-variance noise).

    Deterministic in rng_seed: symbols are drawn first, then noise.
    """
    if num_snapshots < 1:
        raise ValueError("need at least one snapshot")
    if sources.count >= geom.num_elements:
        raise ValueError("source count must stay below the element count")
    rng = np.random.default_rng(rng_seed)
    if snr_db == np.inf:
        amplitude = np.sqrt(sources.power)
        noise_std = 0.0
    elif snr_db == -np.inf:
        amplitude = np.zeros(sources.count)
        noise_std = 1.0
    else:
        amplitude = np.sqrt(sources.power * 10.0 ** (snr_db / 10.0))
        noise_std = 1.0
    manifold = steering_matrix(geom, np.deg2rad(sources.azimuth_deg), np.deg2rad(sources.elevation_deg))
    symbols = amplitude[:, None] * _complex_normal(rng, (sources.count, num_snapshots))
    noise = noise_std * _complex_normal(rng, (geom.num_elements, num_snapshots))
    return manifold @ symbols + noise


def sample_covariance(snapshots: np.ndarray) -> np.ndarray:
    """Average outer product R = (1/T) X X^H, symmetrized to exact Hermitian."""
    x = np.asarray(snapshots)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("snapshots must be a 2-D matrix with at least one column")
    cov = x @ x.conj().T / x.shape[1]
    return (cov + cov.conj().T) / 2.0


def subspace_split(covariance: np.ndarray, num_sources: int) -> SubspaceSplit:
    """Eigendecompose a Hermitian covariance into signal and noise subspaces.

    The top num_sources eigenvectors (by descending eigenvalue, ties kept in
    solver order) form the signal basis, the remainder the noise basis.
    A near-zero gap between the bordering eigenvalues is reported through
    ``degenerate_gap`` rather than raised: the caller decides how to proceed.
    """
    cov = np.asarray(covariance)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    dim = cov.shape[0]
    if not 1 <= num_sources < dim:
        raise ValueError("num_sources must lie in [1, dim - 1]")
    eigenvalues, eigenvectors = np.linalg.eigh(cov)  # ascending
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    gap = eigenvalues[num_sources - 1] - eigenvalues[num_sources]
    return SubspaceSplit(
        signal_basis=eigenvectors[:, :num_sources],
        noise_basis=eigenvectors[:, num_sources:],
        signal_eigenvalues=eigenvalues[:num_sources],
        noise_eigenvalues=eigenvalues[num_sources:],
        degenerate_gap=bool(abs(gap) < EIGEN_GAP_TOL),
    )
