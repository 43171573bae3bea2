"""Fourier-space operators on the periodic torus.

Sign conventions (fixed once, package-wide):

* perp gradient     perp_grad f = (-df/dy, df/dx)
* scalar curl       curl2d u    = du2/dx - du1/dy
* Biot-Savart       biot_savart(w) = perp_grad(psi) with laplacian(psi) = w,
  so that curl2d(biot_savart(w)) = w on mean-free w.

Zero-mode policy: inverse and fractional symbols, the Biot-Savart operator
and the Leray projection annihilate the k = 0 mode (mean-free gauge on the
torus; the harmonic part is dropped).  The heat factor keeps the k = 0
coefficient, so means of diffused scalars are conserved.

Derivative symbols zero the unpaired Nyquist mode k = -n/2 (real fields
cannot carry its odd derivative); dealiased fields never reach it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridMismatchError, ScalarField, VectorField, _check_finite, _check_grid

Field = ScalarField | VectorField


def rfft2(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft2(values)


def irfft2(spec: np.ndarray, n: int) -> np.ndarray:
    return np.fft.irfft2(spec, s=(n, n))


def _derivative_symbols(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(i*kx, i*ky) with the Nyquist row/column zeroed."""
    kx, ky, _ = grid.wavenumbers()
    ikx = 1j * kx * np.ones_like(ky)
    iky = 1j * ky * np.ones_like(kx)
    nyq = grid.n // 2
    ikx[:, nyq] = 0.0
    iky[grid.n - nyq, :] = 0.0  # ky = -n/2 row
    return ikx, iky


def dealias(f: Field) -> Field:
    """2/3-rule truncation: zero all modes with |k_x| or |k_y| > n//3."""
    mask = f.grid.dealias_mask()
    if isinstance(f, ScalarField):
        return ScalarField(f.grid, irfft2(rfft2(f.values) * mask, f.grid.n))
    spec = rfft2(f.values) * mask[None, :, :]
    return VectorField(f.grid, irfft2(spec, f.grid.n))


def band_limited(f: Field, kmax: int) -> Field:
    """Truncate to |k_x|, |k_y| <= kmax."""
    kx, ky, _ = f.grid.wavenumbers()
    mask = (np.abs(kx) <= kmax) & (np.abs(ky) <= kmax)
    if isinstance(f, ScalarField):
        return ScalarField(f.grid, irfft2(rfft2(f.values) * mask, f.grid.n))
    return VectorField(f.grid, irfft2(rfft2(f.values) * mask[None, :, :], f.grid.n))


@dataclass(frozen=True)
class SpectralMultiplier:
    """Fourier-symbol descriptor.

    kind: one of "leray", "biot_savart", "fractional_laplacian",
    "inverse_laplacian", "heat_factor".  fractional_laplacian carries the
    exponent ``s`` ((-Delta)^s); heat_factor carries ``nu`` and ``dt``
    (symbol exp(-nu |k|^2 dt)).  The zero-mode policy is "annihilate" for
    every inverse/fractional/projection symbol.
    """

    kind: str
    s: float = 0.0
    nu: float = 0.0
    dt: float = 0.0

    _KINDS = ("leray", "biot_savart", "fractional_laplacian", "inverse_laplacian", "heat_factor")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if self.kind == "heat_factor" and (self.nu < 0 or self.dt < 0):
            raise ValueError("heat_factor requires nu >= 0 and dt >= 0")

    def scalar_symbol(self, grid: Grid) -> np.ndarray:
        """Diagonal symbol m(k) for the scalar multiplier kinds."""
        _, _, k2 = grid.wavenumbers()
        safe = np.where(k2 > 0, k2, 1.0)
        if self.kind == "fractional_laplacian":
            return np.where(k2 > 0, safe**self.s, 0.0)
        if self.kind == "inverse_laplacian":
            # (-Delta)^{-1}: same as fractional_laplacian(s=-1)
            return np.where(k2 > 0, 1.0 / safe, 0.0)
        if self.kind == "heat_factor":
            return np.exp(-self.nu * self.dt * k2)
        raise ValueError(f"{self.kind} is not a diagonal scalar symbol")


def apply_multiplier(m: SpectralMultiplier, f: Field) -> Field:
    """Apply a Fourier multiplier; the returned field matches the input kind
    (biot_savart maps scalars to vectors)."""
    _check_finite(f.values, "multiplier input")
    if m.kind == "leray":
        if not isinstance(f, VectorField):
            raise TypeError("leray projection applies to vector fields")
        return leray_project(f)
    if m.kind == "biot_savart":
        if not isinstance(f, ScalarField):
            raise TypeError("biot_savart applies to scalar fields")
        return biot_savart(f)
    sym = m.scalar_symbol(f.grid)
    if isinstance(f, ScalarField):
        return ScalarField(f.grid, irfft2(rfft2(f.values) * sym, f.grid.n))
    return VectorField(f.grid, irfft2(rfft2(f.values) * sym[None, :, :], f.grid.n))


def fractional_laplacian(f: Field, s: float) -> Field:
    return apply_multiplier(SpectralMultiplier("fractional_laplacian", s=s), f)


def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free, mean-free vector fields:
    (P v)^ = v^ - k (k . v^) / |k|^2, with the k = 0 mode annihilated."""
    grid = v.grid
    kx, ky, k2 = grid.wavenumbers()
    vx = rfft2(v.values[0])
    vy = rfft2(v.values[1])
    inv_k2 = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    kdotv = (kx * vx + ky * vy) * inv_k2
    px = vx - kx * kdotv
    py = vy - ky * kdotv
    px[0, 0] = 0.0
    py[0, 0] = 0.0
    return VectorField(grid, np.stack([irfft2(px, grid.n), irfft2(py, grid.n)]))


def biot_savart(w: ScalarField) -> VectorField:
    """Velocity from scalar vorticity: u = perp_grad(psi), laplacian(psi) = w.

    A non-mean-free input has its k = 0 mode silently annihilated.
    """
    grid = w.grid
    _, _, k2 = grid.wavenumbers()
    what = rfft2(w.values)
    inv = np.where(k2 > 0, -1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    psi = what * inv
    ikx, iky = _derivative_symbols(grid)
    ux = irfft2(-iky * psi, grid.n)
    uy = irfft2(ikx * psi, grid.n)
    return VectorField(grid, np.stack([ux, uy]))


def grad(f: ScalarField) -> VectorField:
    ikx, iky = _derivative_symbols(f.grid)
    spec = rfft2(f.values)
    return VectorField(f.grid, np.stack([
        irfft2(ikx * spec, f.grid.n),
        irfft2(iky * spec, f.grid.n),
    ]))


def perp_grad(f: ScalarField) -> VectorField:
    """perp_grad f = (-df/dy, df/dx)."""
    ikx, iky = _derivative_symbols(f.grid)
    spec = rfft2(f.values)
    return VectorField(f.grid, np.stack([
        irfft2(-iky * spec, f.grid.n),
        irfft2(ikx * spec, f.grid.n),
    ]))


def div(v: VectorField) -> ScalarField:
    ikx, iky = _derivative_symbols(v.grid)
    spec = ikx * rfft2(v.values[0]) + iky * rfft2(v.values[1])
    return ScalarField(v.grid, irfft2(spec, v.grid.n))


def curl2d(v: VectorField) -> ScalarField:
    """curl2d u = du2/dx - du1/dy."""
    ikx, iky = _derivative_symbols(v.grid)
    spec = ikx * rfft2(v.values[1]) - iky * rfft2(v.values[0])
    return ScalarField(v.grid, irfft2(spec, v.grid.n))


def laplacian(f: Field) -> Field:
    return apply_multiplier(SpectralMultiplier("fractional_laplacian", s=1.0), f) * (-1.0)


def differential(v: Field, op: str) -> Field:
    """Dispatcher over the spectral derivative operators."""
    if op == "grad":
        return grad(v)
    if op == "perp_grad":
        return perp_grad(v)
    if op == "div":
        return div(v)
    if op == "curl2d":
        return curl2d(v)
    raise ValueError(f"unknown differential op {op!r}")


def helmholtz_decompose(v: VectorField) -> tuple[VectorField, VectorField, np.ndarray]:
    """Split v into (divergence-free part, gradient part, constant mean).

    The parts sum to v; the first two are mean-free and L2-orthogonal.
    """
    sigma = leray_project(v)
    mean = v.mean()
    gradient = VectorField(v.grid, v.values - sigma.values - mean[:, None, None])
    return sigma, gradient, mean


def gradient_jacobian(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral Jacobian of a displacement field d, returned as (2, 2, n, n)
    with jac[i, j] = d(d_i)/d(x_j).  Axis order of x_j: (x, y)."""
    if values.shape != (2, grid.n, grid.n):
        raise GridMismatchError("displacement must have shape (2, n, n)")
    ikx, iky = _derivative_symbols(grid)
    out = np.empty((2, 2, grid.n, grid.n))
    for i in range(2):
        spec = rfft2(values[i])
        out[i, 0] = irfft2(ikx * spec, grid.n)
        out[i, 1] = irfft2(iky * spec, grid.n)
    return out


def spectral_l2(f: Field) -> float:
    """L2 norm computed from rfft2 coefficients (Parseval check partner)."""
    grid = f.grid
    n = grid.n
    weights = np.full(n // 2 + 1, 2.0)
    weights[0] = 1.0
    weights[n // 2] = 1.0
    comps = f.values if isinstance(f, VectorField) else f.values[None, :, :]
    total = 0.0
    for layer in comps:
        spec = rfft2(layer) / (n * n)
        total += float(np.sum(weights[None, :] * np.abs(spec) ** 2))
    # physical norm convention: h * sqrt(sum f^2) = 2*pi*sqrt(total)
    return float(2.0 * np.pi * np.sqrt(total))
