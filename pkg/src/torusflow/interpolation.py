"""Trigonometric interpolation at arbitrary torus points.

Band-limited grid fields are evaluated off-grid in two stages:

1. spectral upsampling by zero-padding the rfft2 coefficients onto a
   ``FINE_FACTOR``-times finer grid (exact for every represented mode), then
2. centred tensor-product Lagrange interpolation of order ``ORDER`` on the
   fine grid (numba gather kernel, bit-deterministic at any worker count).

For content inside the 2/3 dealias band the combined error is ~1e-12
relative; at the full band |k| <= n/2 the worst case is ~5e-10.  Points
may be given in unwrapped (universal cover) coordinates; indices wrap
modulo the fine grid.  Nyquist coefficients are split symmetrically onto
+-n/2 (cosine convention), so node values of arbitrary real grid data are
reproduced exactly.

Vector fields are stored component-interleaved on the fine grid so one
cache line feeds both components of a gather.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .grid import Grid, GridMismatchError
from .spectral import rfft2

FINE_FACTOR = 8
ORDER = 12  # stencil width; even, so the point sits in the middle interval

# inverse denominators 1/prod_{b!=a}(a-b) for nodes 0..ORDER-1
_INV_DENOM = np.empty(ORDER)
for _a in range(ORDER):
    _d = 1.0
    for _b in range(ORDER):
        if _b != _a:
            _d *= _a - _b
    _INV_DENOM[_a] = 1.0 / _d
_INV_DENOM.setflags(write=False)

_HALF = ORDER // 2 - 1  # offset of the stencil start from the floored index


@njit(cache=True, nogil=True, fastmath=True, inline="always")
def _weights(s, inv_denom, out):
    # Lagrange weights at local coordinate s in [0, 1) past node _HALF;
    # prefix/suffix products, so exact Kronecker weights at s = 0
    u = s + _HALF
    pref = 1.0
    for a in range(ORDER):
        out[a] = pref
        pref *= u - a
    suf = 1.0
    for a in range(ORDER - 1, -1, -1):
        out[a] *= suf * inv_denom[a]
        suf *= u - a


@njit(cache=True, nogil=True, fastmath=True)
def _eval_scalar(fine, pts, inv_hf, out, inv_denom):
    nf = fine.shape[0]
    mask = nf - 1
    wx = np.empty(ORDER)
    wy = np.empty(ORDER)
    for p in range(pts.shape[0]):
        tx = pts[p, 0] * inv_hf
        ty = pts[p, 1] * inv_hf
        jx = int(np.floor(tx))
        jy = int(np.floor(ty))
        _weights(tx - jx, inv_denom, wx)
        _weights(ty - jy, inv_denom, wy)
        jx -= _HALF
        jy -= _HALF
        acc = 0.0
        for a in range(ORDER):
            row = fine[(jy + a) & mask]
            r = 0.0
            for b in range(ORDER):
                r += wx[b] * row[(jx + b) & mask]
            acc += wy[a] * r
        out[p] = acc


@njit(cache=True, nogil=True, fastmath=True)
def _eval_vector(fine, pts, inv_hf, out, inv_denom):
    # fine: (nf, nf, 2) component-interleaved
    nf = fine.shape[0]
    mask = nf - 1
    wx = np.empty(ORDER)
    wy = np.empty(ORDER)
    for p in range(pts.shape[0]):
        tx = pts[p, 0] * inv_hf
        ty = pts[p, 1] * inv_hf
        jx = int(np.floor(tx))
        jy = int(np.floor(ty))
        _weights(tx - jx, inv_denom, wx)
        _weights(ty - jy, inv_denom, wy)
        jx -= _HALF
        jy -= _HALF
        acc0 = 0.0
        acc1 = 0.0
        for a in range(ORDER):
            row = fine[(jy + a) & mask]
            r0 = 0.0
            r1 = 0.0
            for b in range(ORDER):
                col = (jx + b) & mask
                w = wx[b]
                r0 += w * row[col, 0]
                r1 += w * row[col, 1]
            acc0 += wy[a] * r0
            acc1 += wy[a] * r1
        out[p, 0] = acc0
        out[p, 1] = acc1


def _pad_axis(spec: np.ndarray, n: int, nf: int, axis: int) -> np.ndarray:
    """Zero-pad one full-FFT axis, splitting the Nyquist coefficient
    symmetrically onto +-n/2 (the cosine convention: node values of
    arbitrary real grid data are reproduced exactly)."""
    half = n // 2
    spec = np.moveaxis(spec, axis, 0)
    out = np.zeros((nf,) + spec.shape[1:], dtype=np.complex128)
    out[:half] = spec[:half]
    out[nf - half + 1 :] = spec[half + 1 :]
    out[half] = 0.5 * spec[half]
    out[nf - half] = 0.5 * spec[half]
    return np.moveaxis(out, 0, axis)


def _upsample(values: np.ndarray, n: int, nf: int) -> np.ndarray:
    """Spectral upsampling of one (n, n) layer onto (nf, nf); exact for every
    represented mode, symmetric-cosine convention at the Nyquist border."""
    spec = np.fft.fft2(values)
    pad = _pad_axis(_pad_axis(spec, n, nf, 0), n, nf, 1)
    scale = (nf / n) ** 2
    return np.fft.ifft2(pad * scale).real


class FieldInterpolant:
    """Reusable off-grid evaluator for a scalar layer or a 2-component field.

    Built once per field (a few FFTs); ``eval`` may then be called with any
    number of point batches.
    """

    def __init__(self, values: np.ndarray, grid: Grid, fine_factor: int = FINE_FACTOR):
        values = np.asarray(values, dtype=np.float64)
        self.single = values.ndim == 2
        stack = values[None, :, :] if self.single else values
        if stack.shape[-2:] != grid.shape or stack.shape[0] not in (1, 2):
            raise GridMismatchError("interpolant values must be (n, n) or (2, n, n)")
        self.grid = grid
        nf = fine_factor * grid.n
        self.inv_hf = nf / (2.0 * np.pi)
        layers = [_upsample(layer, grid.n, nf) for layer in stack]
        if self.single:
            self.fine = np.ascontiguousarray(layers[0])
        else:
            self.fine = np.ascontiguousarray(np.stack(layers, axis=-1))

    def eval(self, pts: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        """Evaluate at (m, 2) points (x, y); wrapping is implicit.

        Returns (m,) for scalar interpolants, (m, 2) for vector ones.
        """
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (m, 2)")
        m = pts.shape[0]
        if self.single:
            if out is None:
                out = np.empty(m)
            if out.shape != (m,):
                raise ValueError("output buffer shape mismatch")
            _eval_scalar(self.fine, pts, self.inv_hf, out, _INV_DENOM)
            return out
        if out is None:
            out = np.empty((m, 2))
        if out.shape != (m, 2):
            raise ValueError("output buffer shape mismatch")
        _eval_vector(self.fine, pts, self.inv_hf, out, _INV_DENOM)
        return out


def interpolate_field(f, points: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation of a ScalarField or VectorField at
    arbitrary torus positions (m, 2); exact on band-limited fields.

    Returns (m,) for scalars, (m, 2) for vectors.
    """
    from .grid import ScalarField, VectorField

    if not isinstance(f, (ScalarField, VectorField)):
        raise TypeError("interpolate_field expects a ScalarField or VectorField")
    return FieldInterpolant(f.values, f.grid).eval(np.atleast_2d(np.asarray(points, dtype=np.float64)))
