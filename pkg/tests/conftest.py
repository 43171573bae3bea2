import numpy as np
import pytest

from torusflow import Grid, ScalarField, VectorField
from torusflow.spectral import band_limited, leray_project


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


def rng_field(grid, seed, kmax=None, vector=False):
    """Random band-limited field (2/3 band by default), unit max amplitude."""
    kmax = grid.n // 3 if kmax is None else kmax
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 42], dtype=np.uint64)))
    if vector:
        raw = VectorField(grid, gen.standard_normal((2, grid.n, grid.n)))
    else:
        raw = ScalarField(grid, gen.standard_normal((grid.n, grid.n)))
    f = band_limited(raw, kmax)
    vals = f.values / max(np.max(np.abs(f.values)), 1e-30)
    return type(f)(grid, vals)


def rng_divfree(grid, seed, kmax=None):
    return leray_project(rng_field(grid, seed, kmax, vector=True))


def rng_meanfree_scalar(grid, seed, kmax=None):
    f = rng_field(grid, seed, kmax)
    return ScalarField(grid, f.values - np.mean(f.values))
