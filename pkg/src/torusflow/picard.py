"""Deterministic Picard iteration for the inviscid Boussinesq-MHD system.

One iteration maps (u, theta, B) stamps to the next triple:

    X, A        flows of the current u
    G           = theta e_d + B . grad(B)           (e_d = (0, 1))
    v(t, x)     = u0(x) + int_0^t grad*(X_tau) G(tau, X_tau) dtau   (trapezoid)
    u_next(t)   = P[ grad*(A_t) v(t, .) o A_t ]
    theta_next  = theta0 o A_next,   B_next = (grad(X_next) B0) o A_next

where X_next, A_next are the flows of u_next (they seed the next
iteration, so each round integrates characteristics once).  The stopping
metric is the sup over stamps of the relative L2 difference of the triple,
joined by root-sum-square.
"""

from __future__ import annotations

import time as _time

import numpy as np

from .flows import TimeSampledVelocity
from .grid import Grid, ScalarField, VectorField
from .interpolation import FieldInterpolant
from .lagrangian import SolveReport
from .models import BUOYANCY_DIRECTION, FluidState, ModelSpec
from .spectral import curl2d, dealias, irfft2, leray_project, rfft2
from .transport import FlowHistory, _as_grid_stack, _matvec, _transpose_matvec


class ExistenceBoundError(ValueError):
    """T exceeds the artifact's small-time existence bound."""


def _b_grad_b(B: np.ndarray, grid: Grid, mask: np.ndarray) -> np.ndarray:
    """Dealiased (B . grad) B for one (2, n, n) stack."""
    from .spectral import _derivative_symbols

    ikx, iky = _derivative_symbols(grid)
    out = np.empty_like(B)
    for i in range(2):
        spec = rfft2(B[i])
        gx = irfft2(ikx * spec, grid.n)
        gy = irfft2(iky * spec, grid.n)
        out[i] = irfft2(rfft2(B[0] * gx + B[1] * gy) * mask, grid.n)
    return out


def _recover_transported(history: FlowHistory, theta0: ScalarField, B0: VectorField):
    """theta = theta0 o A and B = (grad(X) B0) o A at every stamp."""
    grid = theta0.grid
    k = len(history.times)
    theta = np.empty((k, grid.n, grid.n))
    B = np.empty((k, 2, grid.n, grid.n))
    th_itp = FieldInterpolant(theta0.values, grid)
    for j in range(k):
        A = history.back_maps[j]
        X = history.maps[j]
        pts = A.grid_images()
        theta[j] = th_itp.eval(pts).reshape(grid.shape)
        q = _matvec(X.jacobian(), B0.values)
        B[j] = _as_grid_stack(FieldInterpolant(q, grid).eval(pts), grid.n)
    return theta, B


def existence_window(u0: VectorField, theta0: ScalarField, B0: VectorField,
                     constant: float = 1.0) -> float:
    """Artifact small-time bound c / (1 + ||u0|| + ||theta0|| + ||B0||) (L2
    norms; the constant is empirical, not an analytic value)."""
    return constant / (1.0 + u0.l2() + theta0.l2() + B0.l2())


def picard_boussinesq(
    u0: VectorField,
    theta0: ScalarField,
    B0: VectorField,
    T: float,
    dt: float,
    tol: float = 1e-8,
    max_iter: int = 12,
    substeps: int = 1,
    existence_constant: float = 1.0,
) -> tuple[list[FluidState], SolveReport]:
    """Fixed-point trajectory of the inviscid Boussinesq-MHD system on
    [0, T], with per-iteration differences in the report."""
    t_start = _time.perf_counter()
    grid = u0.grid
    bound = existence_window(u0, theta0, B0, existence_constant)
    if T > bound:
        raise ExistenceBoundError(
            f"T={T} exceeds the small-time bound {bound:.4g}; shrink T or raise the constant"
        )
    K = int(round(T / dt))
    if K <= 0 or abs(K * dt - T) > 1e-9:
        raise ValueError(f"dt={dt} does not divide T={T}")
    mask = grid.dealias_mask()
    times = dt * np.arange(K + 1)

    u0p = dealias(leray_project(u0))
    B0p = dealias(leray_project(B0))
    theta0d = dealias(theta0)

    u_st = np.repeat(u0p.values[None], K + 1, axis=0)
    velocity = TimeSampledVelocity(grid, times, u_st)
    history = FlowHistory.build(velocity, 0.0, T, dt, substeps)
    theta_st, b_st = _recover_transported(history, theta0d, B0p)

    report = SolveReport(tol=tol)
    diffs: list[float] = []
    det_bounds = [1.0, 1.0]

    ed = BUOYANCY_DIRECTION[:, None, None]
    for _ in range(max_iter):
        # v(t) = u0 + trapezoid of grad*(X) G(X) on the label grid
        v = np.empty((K + 1, 2, grid.n, grid.n))
        acc = np.zeros((2, grid.n, grid.n))
        g_prev = None
        for j in range(K + 1):
            G = theta_st[j][None, :, :] * ed + _b_grad_b(b_st[j], grid, mask)
            X = history.maps[j]
            sampled = _as_grid_stack(
                FieldInterpolant(G, grid).eval(X.grid_images()), grid.n)
            g_j = _transpose_matvec(X.jacobian(), sampled)
            if j > 0:
                acc += 0.5 * dt * (g_prev + g_j)
            g_prev = g_j
            v[j] = u0p.values + acc

        u_next = np.empty_like(u_st)
        u_next[0] = u0p.values
        for j in range(K + 1):
            A = history.back_maps[j]
            comp = _as_grid_stack(
                FieldInterpolant(v[j], grid).eval(A.grid_images()), grid.n)
            w = _transpose_matvec(A.jacobian(), comp)
            proj = leray_project(VectorField(grid, w))
            u_next[j] = irfft2(rfft2(proj.values) * mask[None], grid.n)

        velocity = TimeSampledVelocity(grid, times, u_next)
        history = FlowHistory.build(velocity, 0.0, T, dt, substeps)
        for A in history.back_maps:
            det = A.det_jacobian()
            det_bounds[0] = min(det_bounds[0], float(det.min()))
            det_bounds[1] = max(det_bounds[1], float(det.max()))
        theta_next, b_next = _recover_transported(history, theta0d, B0p)

        num = 0.0
        den = 1e-300
        for j in range(K + 1):
            du = float(np.sum((u_next[j] - u_st[j]) ** 2))
            dth = float(np.sum((theta_next[j] - theta_st[j]) ** 2))
            db = float(np.sum((b_next[j] - b_st[j]) ** 2))
            nu_ = float(np.sum(u_next[j] ** 2))
            nth = float(np.sum(theta_next[j] ** 2))
            nb = float(np.sum(b_next[j] ** 2))
            num = max(num, float(np.sqrt(du + dth + db)))
            den = max(den, float(np.sqrt(nu_ + nth + nb)))
        diff = num / den
        u_st, theta_st, b_st = u_next, theta_next, b_next
        diffs.append(diff)
        if diff <= tol:
            break

    report.iterates.append(diffs)
    report.converged = bool(diffs[-1] <= tol)
    report.det_jac_min, report.det_jac_max = det_bounds
    report.velocity = TimeSampledVelocity(grid, times, u_st)
    report.wall_time = _time.perf_counter() - t_start

    model = ModelSpec("boussinesq_mhd", nu=0.0)
    states = []
    for j in range(K + 1):
        u = VectorField(grid, u_st[j])
        B = VectorField(grid, b_st[j])
        states.append(FluidState(
            t=float(times[j]), u=u, omega=curl2d(u),
            theta=ScalarField(grid, theta_st[j]), B=B, j=curl2d(B),
        ))
    return states, report
