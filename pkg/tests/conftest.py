from pathlib import Path

import numpy as np
import pytest

from coverage_ga import (
    EdgeCorrection,
    FeatureSet,
    GaConfig,
    RadiusGrid,
    Region,
    evolve,
    k_estimate,
)
from coverage_ga.cli import read_keypoints

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_region() -> Region:
    return Region(500.0, 500.0)


@pytest.fixture(scope="session")
def cluster_dispersed_fs(fixture_region) -> FeatureSet:
    return read_keypoints(FIXTURES / "cluster_dispersed.csv", fixture_region)


@pytest.fixture(scope="session")
def fixture_grid(fixture_region) -> RadiusGrid:
    return RadiusGrid.for_region(fixture_region)


@pytest.fixture(scope="session")
def ga_run_seed42(cluster_dispersed_fs, fixture_grid):
    """The canonical GA run on the fixture: seed 42, default schedule, no
    border correction (so the brute-force oracle can verify alphas exactly)."""
    return evolve(
        cluster_dispersed_fs,
        GaConfig(rng_seed=42),
        fixture_grid,
        EdgeCorrection.NONE,
    )


@pytest.fixture(scope="session")
def csr_mean_profile():
    """Mean isotropic K estimate over 100 seeded uniform samples, N=200 in
    500x500, on radii 10..50. Shared by the calibration tests."""
    region = Region(500.0, 500.0)
    grid = RadiusGrid(r_min=10.0, r_max=50.0, delta_r=5.0)
    acc = None
    n_samples = 100
    for k in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=900, spawn_key=(k,)))
        xy = rng.random((200, 2)) * 500.0
        fs = FeatureSet(_points_from_xy(xy), region)
        prof = k_estimate(fs, grid, EdgeCorrection.ISOTROPIC)
        acc = prof.k_hat if acc is None else acc + prof.k_hat
    return grid.radii(), acc / n_samples


def _points_from_xy(xy):
    from coverage_ga import Point2

    return [Point2(float(x), float(y)) for x, y in xy]
