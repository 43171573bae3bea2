"""Periodic grids and field containers for the 2-D torus [0, 2pi)^2.

Conventions used throughout the package:

* arrays are stored row-major with axis 0 = y and axis 1 = x
  (``values[j, i]`` is the sample at ``(x_i, y_j)``),
* the domain period is fixed at 2*pi per axis, so wavenumbers are the
  integers k in [-n/2, n/2),
* real-to-complex FFTs (``numpy.fft.rfft2``) are the internal transform
  layout; all public contracts are stated in physical space,
* fields are immutable: the sample arrays are frozen after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class GridMismatchError(ValueError):
    """Structural error: fields built on different grids were combined."""


class NonFiniteFieldError(FloatingPointError):
    """Numerical error: a field contains NaN or infinite samples."""


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(values, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with n points per axis on [0, 2pi)^2.

    n must be a power of two >= 16 (transform efficiency; spacing h = 2pi/n).
    """

    n: int
    length: float = TWO_PI
    dim: int = 2

    def __post_init__(self) -> None:
        if self.n < 16 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"grid n must be a power of two >= 16, got {self.n}")
        if self.dim != 2:
            raise ValueError("only dim = 2 is supported")
        if abs(self.length - TWO_PI) > 1e-15:
            raise ValueError("domain period is fixed at 2*pi per axis")

    @property
    def h(self) -> float:
        return TWO_PI / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def x(self) -> np.ndarray:
        """1-D x coordinates (also valid for y; the grid is square)."""
        return np.arange(self.n) * self.h

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) coordinate arrays with the (y, x) storage layout."""
        x = self.x
        return np.meshgrid(x, x, indexing="xy")

    def nodes(self) -> np.ndarray:
        """All grid nodes as an (n*n, 2) array of (x, y) positions."""
        gx, gy = self.meshgrid()
        return np.column_stack([gx.ravel(), gy.ravel()])

    # -- spectral layout -------------------------------------------------
    # kx along the rfft axis (axis 1), ky along the full axis (axis 0).

    @property
    def kx(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1, dtype=np.float64)[None, :]

    @property
    def ky(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return k[:, None]

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(KX, KY, K2) broadcast to the rfft2 coefficient shape."""
        kx, ky = self.kx, self.ky
        return kx, ky, kx * kx + ky * ky

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask in the rfft2 layout: keep |k_i| <= n//3."""
        cut = self.n // 3
        kx, ky = self.kx, self.ky
        return (np.abs(kx) <= cut) & (np.abs(ky) <= cut)


def _check_grid(grid: Grid, other: Grid) -> None:
    if grid.n != other.n:
        raise GridMismatchError(f"grid mismatch: n={grid.n} vs n={other.n}")


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteFieldError(f"{what} contains non-finite samples")


@dataclass(frozen=True)
class ScalarField:
    """Real scalar samples on a Grid, stored (n, n) with axis order (y, x)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise GridMismatchError(
                f"scalar field shape {values.shape} does not match grid {self.grid.shape}"
            )
        _check_finite(values, "scalar field")
        object.__setattr__(self, "values", _frozen(values))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def l2(self) -> float:
        """Physical-space L2 norm, h * sqrt(sum f^2)."""
        return float(self.grid.h * np.sqrt(np.sum(self.values**2)))

    def inner(self, other: "ScalarField") -> float:
        _check_grid(self.grid, other.grid)
        return float(self.grid.h**2 * np.sum(self.values * other.values))

    def is_mean_free(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.values))))
        return abs(self.mean()) <= tol * scale

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _check_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _check_grid(self.grid, other.grid)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__


@dataclass(frozen=True)
class VectorField:
    """Two scalar layers (x- and y-components) on a shared Grid.

    Stored internally as one (2, n, n) array; ``components`` exposes the
    layers as ScalarFields.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (2, self.grid.n, self.grid.n):
            raise GridMismatchError(
                f"vector field shape {values.shape} does not match (2, {self.grid.n}, {self.grid.n})"
            )
        _check_finite(values, "vector field")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_components(cls, x: ScalarField, y: ScalarField) -> "VectorField":
        _check_grid(x.grid, y.grid)
        return cls(x.grid, np.stack([x.values, y.values]))

    @property
    def x(self) -> np.ndarray:
        return self.values[0]

    @property
    def y(self) -> np.ndarray:
        return self.values[1]

    @property
    def components(self) -> tuple[ScalarField, ScalarField]:
        return (ScalarField(self.grid, self.values[0]),
                ScalarField(self.grid, self.values[1]))

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=(1, 2))

    def l2(self) -> float:
        return float(self.grid.h * np.sqrt(np.sum(self.values**2)))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def inner(self, other: "VectorField") -> float:
        _check_grid(self.grid, other.grid)
        return float(self.grid.h**2 * np.sum(self.values * other.values))

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_grid(self.grid, other.grid)
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        _check_grid(self.grid, other.grid)
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(self.grid, self.values * float(c))

    __rmul__ = __mul__


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b||_2 / ||b||_2 on raw arrays (falls back to absolute for b ~ 0)."""
    denom = float(np.sqrt(np.sum(np.asarray(b) ** 2)))
    diff = float(np.sqrt(np.sum((np.asarray(a) - np.asarray(b)) ** 2)))
    if denom < 1e-14:
        return diff
    return diff / denom
