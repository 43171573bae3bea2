"""Stochastic Lagrangian fixed-point solver: steady-state and heat-limit
oracles at desk scale, reproducibility, and the single-path shifted-flow
verification solver's degenerate cases."""

import numpy as np
import pytest

from torusflow import (Grid, ModelSpec, ScalarField, VectorField, curl2d,
                       lagrangian_window_solve, nonaveraged_shifted_euler,
                       sample_paths, shift_field, single_mode, taylor_green)
from torusflow.grid import relative_l2
from torusflow.spectral import irfft2, rfft2

from conftest import rng_divfree


def test_inviscid_taylor_green_is_a_fixed_point(grid32):
    model = ModelSpec.euler()
    u0 = taylor_green(grid32)
    ens = sample_paths(1, 0.5, 0.025, 0.0, seed=1)
    states, report = lagrangian_window_solve(model, u0, T=0.5, dt=0.05, window=0.05,
                                             ensemble=ens, tol=1e-8, max_iter=10)
    assert report.converged
    assert relative_l2(states[-1].u.values, states[0].u.values) <= 1e-4


def test_heat_limit_alpha_one_single_mode():
    grid = Grid(16)
    nu, T = 0.2, 0.2
    model = ModelSpec("gsqg", alpha=1.0, nu=nu)
    omega0 = single_mode(grid, 1, 1, 1.0)
    u0 = model.velocity_from_vorticity(omega0)
    m = 400
    ens = sample_paths(m, T, 0.025, nu, seed=21)
    states, report = lagrangian_window_solve(model, u0, T=T, dt=0.05, window=0.05,
                                             ensemble=ens, tol=1e-5, max_iter=10)
    assert report.converged
    _, _, k2 = grid.wavenumbers()
    exact = irfft2(rfft2(states[0].omega.values) * np.exp(-nu * k2 * T), grid.n)
    err = relative_l2(states[-1].omega.values, exact)
    se = report.mc_stats["se_omega"][-1]
    assert se > 0
    assert err <= 3.0 * se


def test_fixed_point_self_consistency(grid32):
    """One more application of the window map moves a converged iterate by
    no more than the stopping tolerance."""
    model = ModelSpec.navier_stokes(nu=0.02)
    u0 = rng_divfree(grid32, 110, kmax=3) * 0.5
    ens = sample_paths(8, 0.2, 0.025, 0.02, seed=31)
    states, report = lagrangian_window_solve(model, u0, T=0.2, dt=0.05, window=0.05,
                                             ensemble=ens, tol=1e-6, max_iter=14)
    assert report.converged
    for window_diffs in report.iterates:
        assert window_diffs[-1] <= 1e-6
        # successive differences contract
        if len(window_diffs) > 1:
            assert window_diffs[-1] < window_diffs[0]


def test_bit_reproducibility_across_worker_counts(grid32):
    model = ModelSpec.navier_stokes(nu=0.05)
    u0 = taylor_green(grid32, 0.8)
    out = []
    for workers in (1, 4):
        ens = sample_paths(12, 0.1, 0.025, 0.05, seed=77)
        states, report = lagrangian_window_solve(model, u0, T=0.1, dt=0.05, window=0.05,
                                                 ensemble=ens, tol=1e-6, max_iter=10,
                                                 workers=workers)
        out.append(states[-1].u.values.tobytes())
    assert out[0] == out[1]


def test_mismatched_ensemble_viscosity_rejected(grid32):
    model = ModelSpec.navier_stokes(nu=0.05)
    ens = sample_paths(2, 0.1, 0.025, 0.01, seed=5)
    with pytest.raises(ValueError):
        lagrangian_window_solve(model, taylor_green(grid32), T=0.1, dt=0.05,
                                window=0.05, ensemble=ens)


def test_windows_must_tile_horizon(grid32):
    model = ModelSpec.euler()
    ens = sample_paths(1, 0.3, 0.025, 0.0, seed=5)
    with pytest.raises(ValueError):
        lagrangian_window_solve(model, taylor_green(grid32), T=0.3, dt=0.05,
                                window=0.125, ensemble=ens)


class TestNonaveragedShiftedFlow:
    def test_zero_viscosity_matches_steady_euler(self, grid32):
        path = sample_paths(1, 0.2, 0.025, 0.0, seed=9).path(0)
        u0 = taylor_green(grid32)
        states, report = nonaveraged_shifted_euler(u0, 0.0, path, T=0.2, dt=0.05)
        assert report.converged
        assert relative_l2(states[-1].u.values, u0.values) <= 1e-5

    def test_zero_initial_velocity_stays_zero(self, grid32):
        path = sample_paths(1, 0.2, 0.025, 0.4, seed=10).path(0)
        u0 = VectorField(grid32, np.zeros((2, grid32.n, grid32.n)))
        states, report = nonaveraged_shifted_euler(u0, 0.4, path, T=0.2, dt=0.05)
        assert report.converged
        assert states[-1].u.l2() < 1e-14

    def test_single_path_tracks_shifted_steady_flow(self, grid32):
        nu, T, dt = 0.05, 0.1, 0.01
        path = sample_paths(1, T, dt / 2, nu, seed=11).path(0)
        u0 = taylor_green(grid32)
        states, report = nonaveraged_shifted_euler(u0, nu, path, T=T, dt=dt)
        assert report.converged
        expect = shift_field(u0, -path.shift_at(T))
        assert relative_l2(states[-1].u.values, expect.values) <= 1e-5
