import numpy as np
import pytest

import bergmanlab.carleman as car
import bergmanlab.geometry as geo
import bergmanlab.kernels as ker


@pytest.fixture(scope="session")
def disc():
    return geo.unit_disc()


@pytest.fixture(scope="session")
def ball():
    return geo.unit_ball()


@pytest.fixture(scope="session")
def disc_kernel0(disc):
    return ker.closed_kernel(disc, 0.0)


@pytest.fixture(scope="session")
def disc_kernel1(disc):
    return ker.closed_kernel(disc, 1.0)


@pytest.fixture(scope="session")
def canonical_region():
    """Shared propagation geometry: X = disc(0.5), Y = disc(0.125), d = 0.1."""
    return car.build_Z({"kind": "disc", "radius": 0.5}, d=0.1,
                       y_shape={"kind": "disc", "radius": 0.125},
                       n_grid=256)


@pytest.fixture(scope="session")
def canonical_weight(canonical_region):
    region = canonical_region
    pts = region.points
    ang = np.mod(np.angle(pts), 2 * np.pi)
    E_mask = region.Y_mask & (ang <= 2 * np.pi * 0.5)
    return car.carleman_weight(region, E_mask)
