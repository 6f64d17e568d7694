import numpy as np
import pytest

from doakit import (
    ArrayGeometry,
    SourceSet,
    noise_projector,
    sample_covariance,
    subspace_split,
    synthesize_snapshots,
)

# Reference benchmark scenario: 12-element circular array, three sources.
TRUE_AZIMUTH_DEG = (30.42, 120.27, 240.51)
TRUE_ELEVATION_DEG = (60.39, 29.42, 45.55)


@pytest.fixture(scope="session")
def uca12():
    return ArrayGeometry.uca(12)


@pytest.fixture(scope="session")
def truth_sources():
    return SourceSet(np.array(TRUE_AZIMUTH_DEG), np.array(TRUE_ELEVATION_DEG))


@pytest.fixture(scope="session")
def noiseless_projector(uca12, truth_sources):
    """Noise-free three-source projector; exact up to floating point, and
    independent of the symbol seed since only the signal span matters."""
    snapshots = synthesize_snapshots(uca12, truth_sources, np.inf, 100, rng_seed=7)
    split = subspace_split(sample_covariance(snapshots), truth_sources.count)
    return noise_projector(split, uca12)
