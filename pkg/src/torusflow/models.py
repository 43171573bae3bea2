"""Model descriptions, fluid states, and initial-condition presets.

Constitutive law of the generalized SQG family: the inertia operator is
T = (-Delta)^{-alpha} and velocity is recovered from scalar vorticity via
T u = K_BS omega, i.e. u = K_BS (-Delta)^alpha omega.  alpha = 0 is
Navier-Stokes/Euler; at alpha = 1 the advection term is orthogonal to
grad(omega) and the vorticity obeys the plain heat equation.

Boussinesq-MHD (unit Prandtl): state (omega, theta, j) with u = K_BS omega,
B = K_BS j and buoyancy direction e_d = (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, VectorField
from .spectral import band_limited, biot_savart, curl2d, fractional_laplacian, leray_project

BUOYANCY_DIRECTION = np.array([0.0, 1.0])


@dataclass(frozen=True)
class ModelSpec:
    """kind: "gsqg" (alpha in [0, 1]) or "boussinesq_mhd"; nu >= 0."""

    kind: str
    alpha: float = 0.0
    nu: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("gsqg", "boussinesq_mhd"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "gsqg" and not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"gsqg alpha must lie in [0, 1], got {self.alpha}")
        if self.kind == "boussinesq_mhd" and self.alpha != 0.0:
            raise ValueError("boussinesq_mhd has no alpha parameter")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")

    @classmethod
    def navier_stokes(cls, nu: float) -> "ModelSpec":
        return cls("gsqg", alpha=0.0, nu=nu)

    @classmethod
    def euler(cls) -> "ModelSpec":
        return cls("gsqg", alpha=0.0, nu=0.0)

    def velocity_from_vorticity(self, omega: ScalarField) -> VectorField:
        """u = T^{-1} K_BS omega = K_BS (-Delta)^alpha omega."""
        if self.kind == "gsqg" and self.alpha != 0.0:
            omega = fractional_laplacian(omega, self.alpha)
        return biot_savart(omega)

    def inertia(self, u: VectorField) -> VectorField:
        """Momentum T u = (-Delta)^{-alpha} u (identity for alpha = 0)."""
        if self.kind == "gsqg" and self.alpha != 0.0:
            return fractional_laplacian(u, -self.alpha)
        return u

    def inertia_inverse(self, w: VectorField) -> VectorField:
        if self.kind == "gsqg" and self.alpha != 0.0:
            return fractional_laplacian(w, self.alpha)
        return w

    def energy(self, u: VectorField) -> float:
        """0.5 <T u, u>_2, the conserved quadratic energy at nu = 0."""
        return 0.5 * self.inertia(u).inner(u)


@dataclass(frozen=True)
class FluidState:
    """Eulerian state at one time; omega = curl2d(u) whenever both stored."""

    t: float
    u: VectorField
    omega: ScalarField
    theta: ScalarField | None = None
    B: VectorField | None = None
    j: ScalarField | None = None

    @classmethod
    def from_vorticity(cls, model: ModelSpec, omega: ScalarField, t: float = 0.0,
                       theta: ScalarField | None = None,
                       j: ScalarField | None = None) -> "FluidState":
        u = model.velocity_from_vorticity(omega)
        B = biot_savart(j) if j is not None else None
        return cls(t, u, omega, theta=theta, B=B, j=j)

    @classmethod
    def from_velocity(cls, model: ModelSpec, u: VectorField, t: float = 0.0,
                      theta: ScalarField | None = None,
                      B: VectorField | None = None) -> "FluidState":
        j = curl2d(B) if B is not None else None
        return cls(t, u, curl2d(u), theta=theta, B=B, j=j)

    def enstrophy(self) -> float:
        return self.omega.l2() ** 2


# ---------------------------------------------------------------------------
# initial-condition presets


def taylor_green(grid: Grid, amplitude: float = 1.0) -> VectorField:
    """u = a (sin x cos y, -cos x sin y); omega = 2 a sin x sin y.

    Steady Euler solution: u . grad(omega) vanishes identically.
    """
    gx, gy = grid.meshgrid()
    return VectorField(grid, amplitude * np.stack([
        np.sin(gx) * np.cos(gy),
        -np.cos(gx) * np.sin(gy),
    ]))


def shear(grid: Grid, amplitude: float = 1.0) -> VectorField:
    """u = (a sin y, 0); omega = -a cos y; exact characteristics
    X_t(x, y) = (x + a t sin y, y)."""
    gx, gy = grid.meshgrid()
    return VectorField(grid, amplitude * np.stack([np.sin(gy), np.zeros_like(gx)]))


def single_mode(grid: Grid, kx: int, ky: int, amplitude: float = 1.0) -> ScalarField:
    """Mean-free scalar a cos(kx x + ky y)."""
    if kx == 0 and ky == 0:
        raise ValueError("single mode must have (kx, ky) != (0, 0)")
    gx, gy = grid.meshgrid()
    return ScalarField(grid, amplitude * np.cos(kx * gx + ky * gy))


def random_band_limited_scalar(grid: Grid, kmax: int, seed: int, amplitude: float = 1.0) -> ScalarField:
    """Mean-free random scalar with modes |k_x|, |k_y| <= kmax, scaled so the
    max amplitude equals ``amplitude``; deterministic per seed."""
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0x5eed], dtype=np.uint64)))
    vals = gen.standard_normal(grid.shape)
    f = band_limited(ScalarField(grid, vals), kmax)
    vals = f.values - np.mean(f.values)
    peak = np.max(np.abs(vals))
    return ScalarField(grid, vals * (amplitude / peak if peak > 0 else 0.0))


def random_band_limited_velocity(grid: Grid, kmax: int, seed: int, amplitude: float = 1.0) -> VectorField:
    """Divergence-free, mean-free random velocity with max speed = amplitude."""
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0xf1e1d], dtype=np.uint64)))
    vals = gen.standard_normal((2, grid.n, grid.n))
    v = band_limited(VectorField(grid, vals), kmax)
    v = leray_project(v)
    speed = np.max(np.sqrt(v.values[0] ** 2 + v.values[1] ** 2))
    return v * (amplitude / speed if speed > 0 else 0.0)
