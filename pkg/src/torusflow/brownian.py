"""Brownian shift paths and reproducible ensembles.

The stochastic flows used here are spatially uniform random shifts: the
SDE dX = u dt + sqrt(2 nu) dW is reduced pathwise to the shifted ODE
dX/dt = u(t, X + sqrt(2 nu) W_t), so the noise never enters a time stepper
and path handling is exact (no Euler-Maruyama bias).  Field shifts are
spectral phase multiplications, exact on band-limited data.

Reproducibility: path i of an ensemble is a pure function of (seed, i) via
the counter-based Philox generator keyed by (seed, path index).  Gaussian
increments come from the inverse CDF (scipy.special.ndtri, the fixed
Cephes/Wichura rational approximation) applied to open-interval uniforms
built from 53-bit integers, so regeneration is bit-exact and independent
of draw batching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .grid import Grid, ScalarField, VectorField
from .parallel import pairwise_sum
from .spectral import rfft2, irfft2

Field = ScalarField | VectorField


@dataclass(frozen=True)
class BrownianPath:
    """Cumulative standard 2-D Brownian increments at uniform stamps.

    values[0] = (0, 0); the shift realization at time t is
    sqrt(2 nu) * W_t.  Lookups are exact-stamp only (the integrators sample
    paths exactly at RK4 stage times).
    """

    times: np.ndarray
    values: np.ndarray
    nu: float

    def _index(self, t: float) -> int:
        t0 = float(self.times[0])
        dt = float(self.times[1] - self.times[0]) if len(self.times) > 1 else 1.0
        idx = (t - t0) / dt
        j = int(round(idx))
        if j < 0 or j >= len(self.times) or abs(idx - j) > 1e-6:
            raise ValueError(f"time {t} is not a stored path stamp")
        return j

    def value_at(self, t: float) -> np.ndarray:
        return self.values[self._index(t)]

    def shift_at(self, t: float) -> np.ndarray:
        """sqrt(2 nu) W_t, the spatial shift of the stochastic flow."""
        return np.sqrt(2.0 * self.nu) * self.value_at(t)


def _path_values(seed: int, index: int, nsteps: int, dt: float) -> np.ndarray:
    """Standard 2-D Brownian values at stamps 0..nsteps, keyed by (seed, index)."""
    key = np.array([np.uint64(seed), np.uint64(index)], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    if nsteps == 0:
        return np.zeros((1, 2))
    draws = gen.integers(1, 2**53, size=(nsteps, 2), dtype=np.int64)
    z = ndtri(draws / float(2**53))
    values = np.zeros((nsteps + 1, 2))
    np.cumsum(z * np.sqrt(dt), axis=0, out=values[1:])
    return values


@dataclass(frozen=True)
class Ensemble:
    """m independent Brownian paths, reproducible per (seed, path index)."""

    m: int
    seed: int
    nu: float
    times: np.ndarray
    values: np.ndarray  # (m, k, 2)

    def path(self, i: int) -> BrownianPath:
        return BrownianPath(self.times, self.values[i], self.nu)

    @property
    def paths(self) -> list[BrownianPath]:
        return [self.path(i) for i in range(self.m)]

    def _index(self, t: float) -> int:
        return BrownianPath(self.times, self.values[0], self.nu)._index(t)

    def shifts_at(self, t: float, sel: range | None = None) -> np.ndarray:
        """(m_sel, 2) array of sqrt(2 nu) W^i_t."""
        j = self._index(t)
        block = self.values[:, j, :] if sel is None else self.values[sel.start : sel.stop, j, :]
        return np.sqrt(2.0 * self.nu) * block


def sample_paths(m: int, T: float, dt: float, nu: float, seed: int) -> Ensemble:
    """m independent standard 2-D Brownian paths on [0, T] at spacing dt,
    scaled into sqrt(2 nu)-shift form at evaluation sites."""
    if m < 1:
        raise ValueError("ensemble needs m >= 1")
    if nu < 0:
        raise ValueError("nu must be >= 0")
    nsteps = int(round(T / dt))
    if nsteps <= 0 or abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"dt={dt} does not divide T={T}")
    values = np.empty((m, nsteps + 1, 2))
    for i in range(m):
        values[i] = _path_values(seed, i, nsteps, dt)
    if nu == 0.0:
        values[:] = 0.0  # sqrt(2*0) shifts are exactly zero everywhere
    times = dt * np.arange(nsteps + 1)
    return Ensemble(m, seed, nu, times, values)


def shift_values(values: np.ndarray, grid: Grid, c: np.ndarray) -> np.ndarray:
    """f(. + c) for one (n, n) layer or a (2, n, n) stack, as an exact
    Fourier phase shift."""
    kx, ky, _ = grid.wavenumbers()
    phase = np.exp(1j * (kx * float(c[0]) + ky * float(c[1])))
    if values.ndim == 2:
        return irfft2(rfft2(values) * phase, grid.n)
    return irfft2(rfft2(values) * phase[None, :, :], grid.n)


def shift_field(f: Field, c) -> Field:
    """f(. + c): spectrally exact translation, no interpolation error."""
    c = np.asarray(c, dtype=np.float64)
    out = shift_values(f.values, f.grid, c)
    if isinstance(f, ScalarField):
        return ScalarField(f.grid, out)
    return VectorField(f.grid, out)


def stochastic_flow_pair(u, path: BrownianPath, t: float, dt: float, t0: float = 0.0):
    """(X_nu, A_nu) for one Brownian path over [t0, t].

    The deterministic reduced flow X of dX/dt = u(t, X + sqrt(2 nu) W_t) is
    integrated with RK4 (the path is sampled exactly at stage times), then
    X_nu = X + sqrt(2 nu) W_t and A_nu = A o phi_t with
    phi_t(x) = x - sqrt(2 nu) W_t.  Both are measure-preserving per path.
    """
    from .flows import FlowMap, flow_pair

    w0 = path.shift_at(t0)

    def shift_fn(tau: float) -> np.ndarray:
        return (path.shift_at(tau) - w0)[None, :]

    X, A = flow_pair(u, t0, t, dt, shift_fn)
    s = path.shift_at(t) - w0
    d_xnu = X.displacement + s[:, None, None]
    d_anu = shift_values(A.displacement, A.grid, -s) - s[:, None, None]
    Xnu = FlowMap(X.grid, d_xnu, time=X.time)
    Anu = FlowMap(A.grid, d_anu, time=A.time)
    Xnu.inverse = Anu
    Anu.inverse = Xnu
    return Xnu, Anu


def ensemble_mean(samples) -> Field:
    """Arithmetic mean of fields with a fixed pairwise summation order."""
    samples = list(samples)
    if not samples:
        raise ValueError("ensemble_mean of an empty sample list")
    first = samples[0]
    grid = first.grid
    for s in samples[1:]:
        if s.grid.n != grid.n:
            raise ValueError("ensemble samples live on different grids")
    total = pairwise_sum([s.values for s in samples])
    out = total / len(samples)
    if isinstance(first, ScalarField):
        return ScalarField(grid, out)
    return VectorField(grid, out)
