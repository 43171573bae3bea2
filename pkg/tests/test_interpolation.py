"""Off-grid trigonometric interpolation: exactness on band-limited data,
checked against a direct Fourier mode-sum oracle."""

import numpy as np
import pytest

from torusflow import FieldInterpolant, Grid, ScalarField, VectorField, interpolate_field

from conftest import rng_field


def direct_mode_sum(values, pts):
    """Brute-force trigonometric evaluation: sum_k f_hat(k) e^{i k.x}."""
    n = values.shape[0]
    F = np.fft.fft2(values) / (n * n)
    k = np.fft.fftfreq(n, 1.0 / n)
    KX, KY = np.meshgrid(k, k)  # KX[j, i] = k[i] (x-wavenumber), KY[j, i] = k[j]
    out = np.empty(len(pts))
    for i, (x, y) in enumerate(pts):
        out[i] = np.real(np.sum(F * np.exp(1j * (KX * x + KY * y))))
    return out


def test_single_mode_at_quarter_period(grid32):
    f = ScalarField(grid32, np.sin(grid32.meshgrid()[0]))
    val = interpolate_field(f, np.array([[np.pi / 2, 1.0]]))
    assert abs(val[0] - 1.0) < 1e-12


def test_single_mode_at_arbitrary_point(grid32):
    f = ScalarField(grid32, np.sin(grid32.meshgrid()[0]))
    val = interpolate_field(f, np.array([[0.3, 2.0]]))
    assert abs(val[0] - np.sin(0.3)) < 1e-12


def test_grid_nodes_reproduced(grid32):
    f = rng_field(grid32, 23)
    vals = interpolate_field(f, grid32.nodes())
    assert np.max(np.abs(vals - f.values.ravel())) < 1e-12


def test_band_limited_matches_mode_sum(grid32):
    f = rng_field(grid32, 29)  # 2/3-band content
    gen = np.random.Generator(np.random.Philox(key=np.array([77, 1], dtype=np.uint64)))
    pts = gen.uniform(0, 2 * np.pi, size=(40, 2))
    ours = interpolate_field(f, pts)
    oracle = direct_mode_sum(f.values, pts)
    assert np.max(np.abs(ours - oracle)) < 1e-11


def test_unwrapped_coordinates_wrap_consistently(grid32):
    f = rng_field(grid32, 31)
    gen = np.random.Generator(np.random.Philox(key=np.array([78, 1], dtype=np.uint64)))
    pts = gen.uniform(0, 2 * np.pi, size=(25, 2))
    shifted = pts + 2 * np.pi * gen.integers(-3, 4, size=(25, 2))
    a = interpolate_field(f, pts)
    b = interpolate_field(f, shifted)
    assert np.max(np.abs(a - b)) < 1e-11


def test_vector_eval_matches_componentwise(grid32):
    v = rng_field(grid32, 37, vector=True)
    gen = np.random.Generator(np.random.Philox(key=np.array([79, 1], dtype=np.uint64)))
    pts = gen.uniform(0, 2 * np.pi, size=(30, 2))
    vals = interpolate_field(v, pts)
    fx, fy = v.components
    assert np.max(np.abs(vals[:, 0] - interpolate_field(fx, pts))) < 1e-13
    assert np.max(np.abs(vals[:, 1] - interpolate_field(fy, pts))) < 1e-13


def test_interpolant_reusable_and_shape_checked(grid32):
    f = rng_field(grid32, 41)
    itp = FieldInterpolant(f.values, grid32)
    pts = np.array([[0.1, 0.2], [1.0, 2.0]])
    out = itp.eval(pts)
    assert out.shape == (2,)
    with pytest.raises(ValueError):
        itp.eval(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        itp.eval(pts, out=np.empty(5))


def test_rejects_non_field_input():
    with pytest.raises(TypeError):
        interpolate_field(np.zeros((32, 32)), np.zeros((1, 2)))
