"""Flow maps of time-dependent velocities on the torus.

Characteristics are integrated per grid node with classical 4-stage
Runge-Kutta; velocity fields between stored time stamps are interpolated
linearly in time, and off-grid evaluation uses trigonometric interpolation
(see interpolation.py).  Displacements are kept unwrapped during
integration and only wrapped at evaluation, so spectral Jacobians of the
displacement see no branch cuts.

Back-to-label maps are computed by backward characteristic integration
from each grid node (not by a companion transport PDE), so their error is
controlled by the same dt as the forward flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import TWO_PI, Grid, ScalarField, VectorField
from .interpolation import FieldInterpolant
from .spectral import gradient_jacobian

ShiftFn = Callable[[float], np.ndarray] | None


class FlowBlowupError(RuntimeError):
    """Diagnostic error: the flow left the resolvable displacement range."""


def wrap_positions(pts: np.ndarray) -> np.ndarray:
    return np.mod(pts, TWO_PI)


@dataclass
class TimeSampledVelocity:
    """Velocity snapshots at uniform, strictly increasing time stamps with
    linear interpolation in time."""

    grid: Grid
    times: np.ndarray
    fields: np.ndarray  # (k, 2, n, n)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.fields = np.asarray(self.fields, dtype=np.float64)
        if self.times.ndim != 1 or len(self.times) != self.fields.shape[0]:
            raise ValueError("times and fields are inconsistent")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(steps <= 0):
                raise ValueError("time stamps must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
                raise ValueError("time stamps must be uniformly spaced")
        if self.fields.shape[1:] != (2, self.grid.n, self.grid.n):
            raise ValueError("velocity snapshots must have shape (k, 2, n, n)")

    @classmethod
    def steady(cls, u: VectorField, t0: float = 0.0, t1: float = 1.0) -> "TimeSampledVelocity":
        return cls(u.grid, np.array([t0, t1]), np.stack([u.values, u.values]))

    @classmethod
    def constant(cls, grid: Grid, c, t0: float = 0.0, t1: float = 1.0) -> "TimeSampledVelocity":
        f = np.broadcast_to(np.asarray(c, dtype=np.float64)[:, None, None], (2, grid.n, grid.n))
        return cls(grid, np.array([t0, t1]), np.stack([f, f]))

    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        """Velocity values at time t, linearly interpolated between stamps."""
        times = self.times
        if t <= times[0]:
            return self.fields[0]
        if t >= times[-1]:
            return self.fields[-1]
        j = int(np.searchsorted(times, t, side="right")) - 1
        t0, t1 = times[j], times[j + 1]
        w = (t - t0) / (t1 - t0)
        if w < 1e-12:
            return self.fields[j]
        if w > 1 - 1e-12:
            return self.fields[j + 1]
        return (1.0 - w) * self.fields[j] + w * self.fields[j + 1]

    def velocity(self, t: float) -> VectorField:
        return VectorField(self.grid, self.at(t))


class StageVelocity:
    """Caches off-grid interpolants of a TimeSampledVelocity at stage times."""

    def __init__(self, u: TimeSampledVelocity):
        self.u = u
        self._cache: dict[int, FieldInterpolant] = {}

    def interpolant(self, t: float) -> FieldInterpolant:
        key = int(round(t * 1e9))
        itp = self._cache.get(key)
        if itp is None:
            itp = FieldInterpolant(self.u.at(t), self.u.grid)
            self._cache[key] = itp
            if len(self._cache) > 8:
                self._cache.pop(next(iter(self._cache)))
        return itp


def rk4_positions(
    pos: np.ndarray,
    vel: StageVelocity,
    t0: float,
    t1: float,
    nsteps: int,
    shift_fn: ShiftFn = None,
) -> np.ndarray:
    """Integrate dZ/dt = u(t, Z + s(t)) from t0 to t1 in place.

    pos has shape (m, 2); shift_fn(t) returns an (m, 2) spatially uniform
    offset (the random-shift realization of stochastic flows) or is None.
    t1 < t0 integrates backward.  Returns pos.
    """
    dt = (t1 - t0) / nsteps
    buf = np.empty_like(pos)
    for j in range(nsteps):
        ta = t0 + j * dt
        tm = ta + 0.5 * dt
        tb = t0 + (j + 1) * dt
        ia, im, ib = vel.interpolant(ta), vel.interpolant(tm), vel.interpolant(tb)
        sa = shift_fn(ta) if shift_fn is not None else None
        sm = shift_fn(tm) if shift_fn is not None else None
        sb = shift_fn(tb) if shift_fn is not None else None

        def eval_at(itp, pts, s):
            return itp.eval(pts if s is None else pts + s)

        k1 = eval_at(ia, pos, sa)
        np.multiply(k1, 0.5 * dt, out=buf)
        buf += pos
        k2 = eval_at(im, buf, sm)
        np.multiply(k2, 0.5 * dt, out=buf)
        buf += pos
        k3 = eval_at(im, buf, sm)
        np.multiply(k3, dt, out=buf)
        buf += pos
        k4 = eval_at(ib, buf, sb)
        pos += (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return pos


@dataclass
class FlowMap:
    """Discrete torus diffeomorphism X(x) = x + d(x), d periodic.

    ``time`` is the elapsed model time of the flow; ``inverse`` (when
    wired) is the corresponding back-to-label map.  The Jacobian is the
    spectral gradient of the displacement plus the identity.
    """

    grid: Grid
    displacement: np.ndarray  # (2, n, n), unwrapped
    time: float = 0.0
    inverse: "FlowMap | None" = None
    _jac: np.ndarray | None = field(default=None, repr=False)
    _interp: FieldInterpolant | None = field(default=None, repr=False)

    @classmethod
    def identity(cls, grid: Grid, time: float = 0.0) -> "FlowMap":
        return cls(grid, np.zeros((2, grid.n, grid.n)), time)

    @classmethod
    def shift(cls, grid: Grid, c, time: float = 0.0) -> "FlowMap":
        d = np.broadcast_to(np.asarray(c, dtype=np.float64)[:, None, None], (2, grid.n, grid.n)).copy()
        return cls(grid, d, time)

    def jacobian(self) -> np.ndarray:
        """(2, 2, n, n) array with jac[i, j] = dX_i/dx_j."""
        if self._jac is None:
            jac = gradient_jacobian(self.displacement, self.grid)
            jac[0, 0] += 1.0
            jac[1, 1] += 1.0
            self._jac = jac
        return self._jac

    def det_jacobian(self) -> np.ndarray:
        j = self.jacobian()
        return j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]

    def displacement_interpolant(self) -> FieldInterpolant:
        if self._interp is None:
            self._interp = FieldInterpolant(self.displacement, self.grid)
        return self._interp

    def map_points(self, pts: np.ndarray) -> np.ndarray:
        """Image of (m, 2) positions; unwrapped output."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return pts + self.displacement_interpolant().eval(pts)

    __call__ = map_points

    def grid_images(self) -> np.ndarray:
        """X evaluated at all grid nodes, as (m, 2) unwrapped positions."""
        nodes = self.grid.nodes()
        return nodes + self.displacement.reshape(2, -1).T

    def compose(self, other: "FlowMap") -> "FlowMap":
        """self after other: x -> self(other(x))."""
        if self.grid.n != other.grid.n:
            raise ValueError("flow maps live on different grids")
        inner = other.grid_images()
        d = other.displacement.reshape(2, -1).T + self.displacement_interpolant().eval(inner)
        return FlowMap(self.grid, np.ascontiguousarray(d.T.reshape(2, self.grid.n, self.grid.n)),
                       time=self.time + other.time)


def _check_displacement(disp: np.ndarray, bound: float) -> None:
    m = float(np.max(np.abs(disp)))
    if not np.isfinite(m) or m > bound:
        raise FlowBlowupError(
            f"flow displacement {m:.3g} exceeded the resolvable bound {bound:.3g}"
        )


def integrate_flow(
    u: TimeSampledVelocity,
    t0: float,
    t1: float,
    dt: float,
    shift_fn: ShiftFn = None,
    max_displacement: float = 8.0 * TWO_PI,
) -> FlowMap:
    """Forward flow map X of dX/dt = u(t, X) from t0 to t1 on grid nodes."""
    nsteps = _step_count(t0, t1, dt)
    grid = u.grid
    pos = grid.nodes().copy()
    rk4_positions(pos, StageVelocity(u), t0, t1, nsteps, shift_fn)
    disp = np.ascontiguousarray((pos - grid.nodes()).T.reshape(2, grid.n, grid.n))
    _check_displacement(disp, max_displacement)
    return FlowMap(grid, disp, time=t1 - t0)


def invert_flow(
    u: TimeSampledVelocity,
    t0: float,
    t1: float,
    dt: float,
    shift_fn: ShiftFn = None,
    max_displacement: float = 8.0 * TWO_PI,
) -> FlowMap:
    """Back-to-label map A of the flow of u over [t0, t1], by integrating
    characteristics backward in time from each grid node."""
    nsteps = _step_count(t0, t1, dt)
    grid = u.grid
    pos = grid.nodes().copy()
    rk4_positions(pos, StageVelocity(u), t1, t0, nsteps, shift_fn)
    disp = np.ascontiguousarray((pos - grid.nodes()).T.reshape(2, grid.n, grid.n))
    _check_displacement(disp, max_displacement)
    return FlowMap(grid, disp, time=t1 - t0)


def flow_pair(
    u: TimeSampledVelocity,
    t0: float,
    t1: float,
    dt: float,
    shift_fn: ShiftFn = None,
) -> tuple[FlowMap, FlowMap]:
    """(X, A) with inverses wired to each other."""
    X = integrate_flow(u, t0, t1, dt, shift_fn)
    A = invert_flow(u, t0, t1, dt, shift_fn)
    X.inverse = A
    A.inverse = X
    return X, A


def _step_count(t0: float, t1: float, dt: float) -> int:
    span = abs(t1 - t0)
    if dt <= 0:
        raise ValueError("dt must be positive")
    nsteps = int(round(span / dt))
    if nsteps == 0 or abs(nsteps * dt - span) > 1e-9 * max(1.0, span):
        raise ValueError(f"dt={dt} does not divide the interval length {span}")
    return nsteps


def backward_label_displacements(
    u: TimeSampledVelocity,
    times: np.ndarray,
    substeps: int = 1,
    shift_fn: ShiftFn = None,
) -> np.ndarray:
    """Back-to-label displacements A(times[0] -> times[j]) for every stamp.

    Returns (len(times), 2, n, n).  Targets are added progressively and
    integrated together, so the total cost is one growing backward sweep.
    """
    times = np.asarray(times, dtype=np.float64)
    grid = u.grid
    nodes = grid.nodes()
    npts = nodes.shape[0]
    k = len(times)
    out = np.empty((k, 2, grid.n, grid.n))
    out[0] = 0.0
    vel = StageVelocity(u)
    active = np.empty((0, 2))
    for j in range(k - 1, 0, -1):
        active = np.concatenate([nodes, active], axis=0)
        rk4_positions(active, vel, float(times[j]), float(times[j - 1]), substeps, shift_fn)
    # the last-prepended block (stamp j=1) sits at the front
    for j in range(1, k):
        block = active[(j - 1) * npts : j * npts]
        out[j] = (block - nodes).T.reshape(2, grid.n, grid.n)
    return out
