"""Transport algebra along flow maps.

Index conventions follow (grad* v)_ij = d(v_j)/d(x_i), so

* pull-back of a covector      (Phi* w)_i = sum_j d(Phi_j)/d(x_i) (w_j o Phi)
* push-forward of a vector     (Phi# v)_i = (sum_j d(Phi_i)/d(x_j) v_j) o Phi^{-1}
* push-forward of a scalar     Phi# theta = theta o Phi^{-1}

The Weber reconstruction takes covector data already composed with the map
(the only form the solvers use) and returns its Leray projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flows import FlowMap, StageVelocity, TimeSampledVelocity, rk4_positions
from .grid import Grid, ScalarField, VectorField
from .interpolation import FieldInterpolant
from .spectral import curl2d, grad, leray_project


def _as_grid_stack(samples: np.ndarray, n: int) -> np.ndarray:
    """(m, 2) point samples back to a (2, n, n) field stack."""
    return np.ascontiguousarray(samples.T.reshape(2, n, n))


def _transpose_matvec(jac: np.ndarray, w: np.ndarray) -> np.ndarray:
    """(grad* Phi) w with jac[i, j] = d(Phi_i)/d(x_j): out_i = sum_j jac[j, i] w_j."""
    return np.stack([
        jac[0, 0] * w[0] + jac[1, 0] * w[1],
        jac[0, 1] * w[0] + jac[1, 1] * w[1],
    ])


def _matvec(jac: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(grad Phi) v: out_i = sum_j jac[i, j] v_j."""
    return np.stack([
        jac[0, 0] * v[0] + jac[0, 1] * v[1],
        jac[1, 0] * v[0] + jac[1, 1] * v[1],
    ])


def _require_inverse(phi: FlowMap) -> FlowMap:
    if phi.inverse is None:
        raise ValueError("flow map has no inverse attached; build it with flow_pair")
    return phi.inverse


def pushforward_scalar(theta: ScalarField, phi: FlowMap) -> ScalarField:
    """theta o phi^{-1}, sampled on the grid."""
    inv = _require_inverse(phi)
    pts = inv.grid_images()
    vals = FieldInterpolant(theta.values, theta.grid).eval(pts)
    return ScalarField(theta.grid, vals.reshape(theta.grid.shape))


def pushforward_vector(v: VectorField, phi: FlowMap) -> VectorField:
    """(grad(phi) v) o phi^{-1}; solves the Lie transport equation along phi."""
    inv = _require_inverse(phi)
    q = _matvec(phi.jacobian(), v.values)
    pts = inv.grid_images()
    vals = FieldInterpolant(q, v.grid).eval(pts)
    return VectorField(v.grid, _as_grid_stack(vals, v.grid.n))


def pullback_covector(w: VectorField, phi: FlowMap) -> VectorField:
    """grad*(phi) (w o phi); maps gradient fields to gradient fields."""
    pts = phi.grid_images()
    comp = _as_grid_stack(FieldInterpolant(w.values, w.grid).eval(pts), w.grid.n)
    return VectorField(w.grid, _transpose_matvec(phi.jacobian(), comp))


def weber_reconstruct(u_composed: VectorField, ell: FlowMap) -> VectorField:
    """P(grad*(ell) u_composed) where u_composed is covector data already
    composed with ell.  Divergence-free and mean-free."""
    return leray_project(
        VectorField(u_composed.grid, _transpose_matvec(ell.jacobian(), u_composed.values))
    )


def cauchy_vorticity(omega0: ScalarField, back_map: FlowMap) -> ScalarField:
    """Scalar vorticity transported along the flow: omega0 o A."""
    pts = back_map.grid_images()
    vals = FieldInterpolant(omega0.values, omega0.grid).eval(pts)
    return ScalarField(omega0.grid, vals.reshape(omega0.grid.shape))


@dataclass
class FlowHistory:
    """Flow maps (and back-to-label maps) of one velocity at uniform stamps."""

    times: np.ndarray
    maps: list[FlowMap]
    back_maps: list[FlowMap]

    @classmethod
    def build(
        cls,
        u: TimeSampledVelocity,
        t0: float,
        t1: float,
        dt: float,
        substeps: int = 1,
        shift_fn=None,
    ) -> "FlowHistory":
        """X and A at every stamp t0, t0+dt, ..., t1 (X(t0) = A(t0) = id)."""
        from .flows import _step_count, backward_label_displacements

        nst = _step_count(t0, t1, dt)
        times = t0 + dt * np.arange(nst + 1)
        grid = u.grid
        nodes = grid.nodes()
        vel = StageVelocity(u)
        maps: list[FlowMap] = [FlowMap.identity(grid)]
        pos = nodes.copy()
        for j in range(nst):
            rk4_positions(pos, vel, float(times[j]), float(times[j + 1]), substeps, shift_fn)
            disp = np.ascontiguousarray((pos - nodes).T.reshape(2, grid.n, grid.n))
            maps.append(FlowMap(grid, disp, time=float(times[j + 1] - t0)))
        back = backward_label_displacements(u, times, substeps, shift_fn)
        back_maps = [FlowMap(grid, np.ascontiguousarray(back[j]), time=float(times[j] - t0))
                     for j in range(nst + 1)]
        for X, A in zip(maps, back_maps):
            X.inverse = A
            A.inverse = X
        return cls(times, maps, back_maps)


def dual_transport_solution(
    w0: VectorField,
    forcing: TimeSampledVelocity | None,
    history: FlowHistory,
) -> VectorField:
    """Duhamel solution of the dual Lie transport equation
    d_t w + u.grad(w) + grad*(u) w = f:

        w(t) = grad*(A_t) [ w0 + int_0^t grad*(X_tau) f(tau, X_tau) dtau ] o A_t

    with the time integral by the trapezoid rule on the history's stamps.
    """
    grid = w0.grid
    g = w0.values.copy()
    if forcing is not None and len(history.times) > 1:
        times = history.times
        k = len(times)
        weights = np.full(k, float(times[1] - times[0]))
        weights[0] *= 0.5
        weights[-1] *= 0.5
        acc = np.zeros_like(g)
        for j in range(k):
            X = history.maps[j]
            fj = FieldInterpolant(forcing.at(float(times[j])), grid).eval(X.grid_images())
            acc += weights[j] * _transpose_matvec(X.jacobian(), _as_grid_stack(fj, grid.n))
        g += acc
    return pullback_covector(VectorField(grid, g), history.back_maps[-1])


def _wedge(a: VectorField, b: VectorField) -> np.ndarray:
    """2-D wedge of two gradient stacks: a_x b_y - a_y b_x."""
    return a.values[0] * b.values[1] - a.values[1] * b.values[0]


def lie_transport_curl_source(u: VectorField, v: VectorField) -> ScalarField:
    """Q(u, v) = 2 sum_j grad(v_j) x grad(u_j), the curl source of
    Lie-transported fields (scalar in 2-D)."""
    vx, vy = v.components
    ux, uy = u.components
    q = 2.0 * (_wedge(grad(vx), grad(ux)) + _wedge(grad(vy), grad(uy)))
    return ScalarField(u.grid, q)


def lie_transported_current(
    v0: VectorField,
    u: TimeSampledVelocity,
    t: float,
    dt: float,
    substeps: int = 1,
) -> ScalarField:
    """curl of the Lie-transported field v_t = (X_t)# v0, via its Lagrangian
    representation

        J = (X_t)# [ curl v0 + int_0^t (A_tau)#(v_tau . grad omega_tau)
                                   + (A_tau)# Q(u_tau, v_tau) dtau ].
    """
    t0 = float(u.times[0])
    if abs(t - t0) < 1e-14:
        return curl2d(v0)
    history = FlowHistory.build(u, t0, t, dt, substeps)
    grid = v0.grid
    times = history.times
    k = len(times)
    weights = np.full(k, dt)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    acc = np.zeros(grid.shape)
    for j in range(k):
        uj = u.velocity(float(times[j]))
        omega_j = curl2d(uj)
        vj = pushforward_vector(v0, history.maps[j])
        lie = np.sum(vj.values * grad(omega_j).values, axis=0)
        q = lie_transport_curl_source(uj, vj).values
        # (A_tau)# scalar = scalar o X_tau
        pts = history.maps[j].grid_images()
        sampled = FieldInterpolant(lie + q, grid).eval(pts)
        acc += weights[j] * sampled.reshape(grid.shape)
    total = curl2d(v0).values + acc
    pts = history.back_maps[-1].grid_images()
    out = FieldInterpolant(total, grid).eval(pts)
    return ScalarField(grid, out.reshape(grid.shape))
