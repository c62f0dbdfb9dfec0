"""Shared fixtures and test configuration."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import dipolarray as da

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def cloud_geometry(points):
    """Arbitrary atom positions wrapped as one single-atom layer each.

    The geometry type enforces planar, pattern-identical layers, so a
    disordered cloud is represented as n_atoms trivial layers.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return da.ArrayGeometry(
        positions=pts,
        layer_of=np.arange(len(pts)),
        layer_count=len(pts),
        layer_shifts=[tuple(p) for p in pts],
    )


def random_cloud(rng, n, span=3.0, min_sep=0.2):
    """Random positions with a minimum pairwise separation."""
    pts = []
    while len(pts) < n:
        cand = rng.uniform(-span, span, 3)
        if all(np.linalg.norm(cand - p) > min_sep for p in pts):
            pts.append(cand)
    return np.asarray(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


@pytest.fixture
def cloud_factory(rng):
    def make(n, span=3.0):
        return cloud_geometry(random_cloud(rng, n, span))

    return make


@pytest.fixture
def hex_monolayer():
    """19-atom hexagonal monolayer, sub-wavelength."""
    patch = da.generate_patch(da.make_lattice("triangular", 0.8), 2)
    return da.stack_layers(patch, 1, lattice=da.make_lattice("triangular", 0.8))


@pytest.fixture
def hex_trilayer():
    """3 x 19 hexagonal stack near the mirror operating point."""
    lat = da.make_lattice("triangular", 1.6)
    return da.stack_layers(da.generate_patch(lat, 2), 3, spacing=1.5, lattice=lat)
