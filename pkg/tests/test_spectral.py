"""Fourier-operator contracts: worked single-mode examples plus
property-based identities on random band-limited fields."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusflow import (Grid, ScalarField, SpectralMultiplier, VectorField,
                       apply_multiplier, biot_savart, curl2d, differential, div,
                       fractional_laplacian, grad, helmholtz_decompose,
                       leray_project, perp_grad)
from torusflow.grid import GridMismatchError, relative_l2
from torusflow.spectral import spectral_l2

from conftest import rng_divfree, rng_field, rng_meanfree_scalar


def mode_field(grid, fn):
    gx, gy = grid.meshgrid()
    return ScalarField(grid, fn(gx, gy))


def vec(grid, fx, fy):
    gx, gy = grid.meshgrid()
    return VectorField(grid, np.stack([fx(gx, gy), fy(gx, gy)]))


class TestMultipliers:
    def test_fractional_laplacian_on_single_mode(self, grid32):
        f = mode_field(grid32, lambda x, y: np.sin(x))
        out = fractional_laplacian(f, 1.0)
        assert relative_l2(out.values, f.values) < 1e-12

    def test_inverse_laplacian_annihilates_constants(self, grid32):
        f = ScalarField(grid32, np.full(grid32.shape, 3.7))
        out = apply_multiplier(SpectralMultiplier("inverse_laplacian"), f)
        assert np.max(np.abs(out.values)) < 1e-13

    def test_heat_factor_decays_mode_11(self, grid32):
        f = mode_field(grid32, lambda x, y: np.cos(x + y))
        out = apply_multiplier(SpectralMultiplier("heat_factor", nu=0.5, dt=1.0), f)
        assert relative_l2(out.values, np.exp(-1.0) * f.values) < 1e-12

    def test_heat_factor_keeps_the_mean(self, grid32):
        f = ScalarField(grid32, np.full(grid32.shape, 2.0))
        out = apply_multiplier(SpectralMultiplier("heat_factor", nu=1.0, dt=1.0), f)
        assert relative_l2(out.values, f.values) < 1e-14

    def test_fractional_inverse_pair_is_identity_on_mean_free(self, grid32):
        f = rng_meanfree_scalar(grid32, 7)
        out = fractional_laplacian(fractional_laplacian(f, 0.6), -0.6)
        assert relative_l2(out.values, f.values) < 1e-12

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            SpectralMultiplier("banana")

    def test_grid_mismatch_is_structural_error(self, grid32, grid64):
        f = rng_field(grid64, 1)
        with pytest.raises(GridMismatchError):
            ScalarField(grid32, f.values)

    def test_nonfinite_rejected(self, grid32):
        bad = np.zeros(grid32.shape)
        bad[0, 0] = np.nan
        with pytest.raises(FloatingPointError):
            ScalarField(grid32, bad)


class TestLeray:
    def test_pure_gradient_projects_to_zero(self, grid32):
        v = vec(grid32, lambda x, y: np.sin(x), lambda x, y: 0 * x)
        out = leray_project(v)
        assert np.max(np.abs(out.values)) < 1e-13

    def test_divergence_free_is_fixed_point(self, grid32):
        v = vec(grid32, lambda x, y: -np.sin(x) * np.cos(y),
                lambda x, y: np.cos(x) * np.sin(y))
        out = leray_project(v)
        assert relative_l2(out.values, v.values) < 1e-13

    def test_mixed_modes_split(self, grid32):
        v = vec(grid32, lambda x, y: np.sin(x) + np.sin(y), lambda x, y: 0 * x)
        expect = vec(grid32, lambda x, y: np.sin(y), lambda x, y: 0 * x)
        assert relative_l2(leray_project(v).values, expect.values) < 1e-13


class TestBiotSavart:
    def test_zero_maps_to_zero(self, grid32):
        out = biot_savart(ScalarField(grid32, np.zeros(grid32.shape)))
        assert np.max(np.abs(out.values)) == 0.0

    def test_single_mode_inversion(self, grid32):
        omega = mode_field(grid32, lambda x, y: -2.0 * np.sin(x) * np.sin(y))
        expect = vec(grid32, lambda x, y: -np.sin(x) * np.cos(y),
                     lambda x, y: np.cos(x) * np.sin(y))
        assert relative_l2(biot_savart(omega).values, expect.values) < 1e-13

    def test_curl_of_biot_savart_roundtrip(self, grid64):
        omega = rng_meanfree_scalar(grid64, 3)
        back = curl2d(biot_savart(omega))
        assert relative_l2(back.values, omega.values) < 1e-12

    def test_biot_savart_of_curl_is_leray(self, grid32):
        v = rng_field(grid32, 5, vector=True)
        lhs = biot_savart(curl2d(v))
        rhs = leray_project(v)
        assert relative_l2(lhs.values, rhs.values) < 1e-12

    def test_nonzero_mean_silently_annihilated(self, grid32):
        omega = ScalarField(grid32, np.sin(grid32.meshgrid()[0]) + 4.0)
        out = biot_savart(omega)
        assert np.all(np.isfinite(out.values))
        assert abs(curl2d(out).mean()) < 1e-13


class TestDifferential:
    def test_curl_example(self, grid32):
        v = vec(grid32, lambda x, y: np.cos(y), lambda x, y: 0 * x)
        expect = mode_field(grid32, lambda x, y: np.sin(y))
        assert relative_l2(curl2d(v).values, expect.values) < 1e-13

    def test_div_of_divfree_example(self, grid32):
        v = vec(grid32, lambda x, y: -np.sin(x) * np.cos(y),
                lambda x, y: np.cos(x) * np.sin(y))
        assert np.max(np.abs(div(v).values)) < 1e-13

    def test_perp_grad_example(self, grid32):
        f = mode_field(grid32, lambda x, y: np.sin(x) * np.sin(y))
        expect = vec(grid32, lambda x, y: -np.sin(x) * np.cos(y),
                     lambda x, y: np.cos(x) * np.sin(y))
        assert relative_l2(perp_grad(f).values, expect.values) < 1e-13

    def test_curl_of_grad_vanishes(self, grid32):
        f = rng_field(grid32, 11)
        assert np.max(np.abs(curl2d(grad(f)).values)) < 1e-12

    def test_dispatcher_matches_functions(self, grid32):
        f = rng_field(grid32, 13)
        v = rng_field(grid32, 14, vector=True)
        assert np.array_equal(differential(f, "grad").values, grad(f).values)
        assert np.array_equal(differential(f, "perp_grad").values, perp_grad(f).values)
        assert np.array_equal(differential(v, "div").values, div(v).values)
        assert np.array_equal(differential(v, "curl2d").values, curl2d(v).values)
        with pytest.raises(ValueError):
            differential(f, "hessian")


class TestHelmholtz:
    def test_divfree_input_passes_through(self, grid32):
        v = rng_divfree(grid32, 17)
        sigma, gradient, mean = helmholtz_decompose(v)
        assert relative_l2(sigma.values, v.values) < 1e-12
        assert np.max(np.abs(gradient.values)) < 1e-12
        assert np.max(np.abs(mean)) < 1e-14

    def test_gradient_input(self, grid32):
        g = grad(mode_field(grid32, lambda x, y: np.cos(x)))
        sigma, gradient, mean = helmholtz_decompose(g)
        assert np.max(np.abs(sigma.values)) < 1e-13
        assert relative_l2(gradient.values, g.values) < 1e-13

    def test_mixed_example(self, grid32):
        v = vec(grid32, lambda x, y: np.sin(x) + np.sin(y), lambda x, y: 0 * x)
        sigma, gradient, _ = helmholtz_decompose(v)
        expect_sigma = vec(grid32, lambda x, y: np.sin(y), lambda x, y: 0 * x)
        expect_grad = vec(grid32, lambda x, y: np.sin(x), lambda x, y: 0 * x)
        assert relative_l2(sigma.values, expect_sigma.values) < 1e-12
        assert relative_l2(gradient.values, expect_grad.values) < 1e-12


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_parts_sum_and_orthogonality(seed):
    grid = Grid(32)
    v = rng_field(grid, seed, vector=True)
    sigma, gradient, mean = helmholtz_decompose(v)
    recon = sigma.values + gradient.values + mean[:, None, None]
    assert relative_l2(recon, v.values) < 1e-12
    denom = max(sigma.l2() * gradient.l2(), 1e-30)
    assert abs(sigma.inner(gradient)) / denom < 1e-10


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_leray_idempotent_and_divfree(seed):
    grid = Grid(32)
    v = rng_field(grid, seed, vector=True)
    p = leray_project(v)
    pp = leray_project(p)
    assert relative_l2(pp.values, p.values) < 1e-12
    assert div(p).l2() <= 1e-10 * max(p.l2(), 1e-30)
    assert np.max(np.abs(p.mean())) < 1e-13


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_leray_commutes_with_derivatives(seed):
    grid = Grid(32)
    v = rng_field(grid, seed, vector=True)
    from torusflow.spectral import irfft2, rfft2, _derivative_symbols

    ikx, _ = _derivative_symbols(grid)
    dxv = VectorField(grid, irfft2(ikx[None] * rfft2(v.values), grid.n))
    lhs = leray_project(dxv)
    rhs = VectorField(grid, irfft2(ikx[None] * rfft2(leray_project(v).values), grid.n))
    assert relative_l2(lhs.values, rhs.values) < 1e-12


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_norm_identity_for_divfree(seed):
    grid = Grid(32)
    v = rng_divfree(grid, seed)
    gx = grad(v.components[0])
    gy = grad(v.components[1])
    grad_sq = gx.l2() ** 2 + gy.l2() ** 2
    curl_sq = curl2d(v).l2() ** 2
    assert abs(grad_sq - curl_sq) <= 1e-10 * max(grad_sq, 1e-30)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_parseval(seed):
    grid = Grid(32)
    f = rng_field(grid, seed)
    assert abs(f.l2() - spectral_l2(f)) <= 1e-12 * max(f.l2(), 1e-30)
