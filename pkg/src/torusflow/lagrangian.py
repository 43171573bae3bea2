"""Stochastic Lagrangian fixed-point solvers.

``lagrangian_window_solve`` realizes the implicit Lagrangian-Eulerian
system for the gsqg family: time is partitioned into windows [t_k, t_k+w];
on each window the map

    u  ->  T^{-1} P E_W[ grad*(A_nu) (T u(t_k)) o A_nu ]

is Picard-iterated, where per path (X_nu, A_nu) are the stochastic flows
driven by the current iterate.  Re-anchoring at window starts is exact in
the continuum (covector pull-back preserves gradient fields, the projection
removes them), so the window length is a pure cost/accuracy knob.

Per path everything reduces to the unshifted back-to-label map A of the
reduced ODE: A_nu = A o phi_t with the rigid shift phi_t(x) = x - s(t), so
the per-path sample grad*(A_nu) xi0 o A_nu equals the unshifted sample
composed with phi_t, applied here as an exact spectral phase shift.
Diffusion is realized only through Brownian averaging, never by operator
splitting.

``nonaveraged_shifted_euler`` runs the same reconstruction along one path
with no expectation.  Its iterate is stored at dt/2 stage resolution: the
pathwise velocity is Brownian-rough in time, so every integrator stage
must land exactly on a stamp (full steps: RK4; half-stamp label maps: Heun,
whose stages are the interval endpoints).
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from .brownian import BrownianPath, Ensemble
from .flows import FlowBlowupError, StageVelocity, TimeSampledVelocity, rk4_positions
from .grid import TWO_PI, Grid, VectorField, relative_l2
from .models import FluidState, ModelSpec
from .parallel import path_chunks, pairwise_sum, run_chunked
from .spectral import curl2d, gradient_jacobian, irfft2, leray_project, rfft2


@dataclass
class SolveReport:
    """Per-iteration L2 differences, Monte-Carlo standard errors, wall time,
    and Jacobian-determinant extremes of a fixed-point solve."""

    iterates: list[list[float]] = field(default_factory=list)
    wall_time: float = 0.0
    mc_stats: dict = field(default_factory=dict)
    converged: bool = True
    det_jac_min: float = 1.0
    det_jac_max: float = 1.0
    tol: float = 0.0
    velocity: TimeSampledVelocity | None = None

    def max_final_diff(self) -> float:
        return max((w[-1] for w in self.iterates if w), default=0.0)


class _SpectralOps:
    """Precomputed rfft2-layout symbols for projection and T^{-1}."""

    def __init__(self, grid: Grid, alpha: float):
        kx, ky, k2 = grid.wavenumbers()
        self.kx = kx * np.ones_like(ky)
        self.ky = ky * np.ones_like(kx)
        self.k2 = k2
        self.inv_k2 = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
        safe = np.where(k2 > 0, k2, 1.0)
        self.t_inv = np.where(k2 > 0, safe**alpha, 0.0) if alpha != 0.0 else None
        self.mask = grid.dealias_mask()
        n = grid.n
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[n // 2] = 1.0
        self.parseval_w = w[None, :]
        self.n = n

    def project_sample(self, g_hat: np.ndarray, shift: np.ndarray) -> np.ndarray:
        """Phase-shift by -shift, Leray-project, apply T^{-1}, dealias."""
        if shift[0] != 0.0 or shift[1] != 0.0:
            phase = np.exp(-1j * (self.kx * shift[0] + self.ky * shift[1]))
            g_hat = g_hat * phase
        kdot = (self.kx * g_hat[0] + self.ky * g_hat[1]) * self.inv_k2
        out = np.stack([g_hat[0] - self.kx * kdot, g_hat[1] - self.ky * kdot])
        out[:, 0, 0] = 0.0
        if self.t_inv is not None:
            out = out * self.t_inv
        return out * self.mask

    def l2_from_power(self, power: np.ndarray) -> float:
        """Physical L2 norm from summed |coefficient|^2 in the rfft2 layout."""
        total = float(np.sum(self.parseval_w * power)) / self.n**4
        return float(TWO_PI * np.sqrt(max(total, 0.0)))


def _transpose_matvec(jac: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.stack([
        jac[0, 0] * w[0] + jac[1, 0] * w[1],
        jac[0, 1] * w[0] + jac[1, 1] * w[1],
    ])


def _weber_sample_hat(pos_block: np.ndarray, nodes: np.ndarray, grid: Grid,
                      xi0_itp, ops: _SpectralOps) -> tuple[np.ndarray, float, float]:
    """Spectral unshifted Weber integrand grad*(A) xi0 o A for one path, plus
    the det(grad A) extremes of the label map."""
    disp = np.ascontiguousarray((pos_block - nodes).T.reshape(2, grid.n, grid.n))
    jac = gradient_jacobian(disp, grid)
    jac[0, 0] += 1.0
    jac[1, 1] += 1.0
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    comp = xi0_itp.eval(pos_block)
    g = _transpose_matvec(jac, np.ascontiguousarray(comp.T.reshape(2, grid.n, grid.n)))
    return rfft2(g), float(det.min()), float(det.max())


def _window_sweep(chunk: range, ensemble: Ensemble, vel: StageVelocity, times: np.ndarray,
                  flow_substeps: int, grid: Grid, nodes: np.ndarray, xi0_itp,
                  ops: _SpectralOps, want_sq: bool, max_displacement: float):
    """Backward label maps + Weber samples for one chunk of paths over one
    window.  Returns per-stamp spectral sums (and squared magnitudes for the
    window-end stamp), plus det extremes."""
    c = len(chunk)
    npts = nodes.shape[0]
    S = len(times) - 1
    t_a = float(times[0])
    base_shift = ensemble.shifts_at(t_a, chunk)

    def shift_fn_factory(nblocks: int):
        def shift_fn(t: float) -> np.ndarray:
            s = ensemble.shifts_at(t, chunk) - base_shift
            per_pt = np.repeat(s, npts, axis=0)
            if nblocks == 1:
                return per_pt
            return np.tile(per_pt, (nblocks, 1))
        return shift_fn

    # growing backward batch: stamp S first, prepend fresh targets each leg
    active = np.empty((0, 2))
    for j in range(S, 0, -1):
        fresh = np.tile(nodes, (c, 1))
        active = np.concatenate([fresh, active], axis=0)
        nblocks = active.shape[0] // (c * npts)
        rk4_positions(active, vel, float(times[j]), float(times[j - 1]),
                      flow_substeps, shift_fn_factory(nblocks))
    if np.max(np.abs(active - np.tile(np.tile(nodes, (c, 1)), (S, 1)))) > max_displacement:
        raise FlowBlowupError("per-path flow left the resolvable range")

    kshape = (2, grid.n, grid.n // 2 + 1)
    sums = np.zeros((S,) + kshape, dtype=np.complex128)
    sq = np.zeros(kshape) if want_sq else None
    sq_omega = np.zeros(kshape[1:]) if want_sq else None
    det_min, det_max = np.inf, -np.inf
    for bj, j in enumerate(range(1, S + 1)):
        # block for stamp j sits at offset (j-1) blocks from the front
        block = active[(j - 1) * c * npts : j * c * npts]
        shifts = ensemble.shifts_at(float(times[j]), chunk) - base_shift
        for p in range(c):
            g_hat, dmin, dmax = _weber_sample_hat(
                block[p * npts : (p + 1) * npts], nodes, grid, xi0_itp, ops)
            det_min = min(det_min, dmin)
            det_max = max(det_max, dmax)
            w_hat = ops.project_sample(g_hat, shifts[p])
            sums[bj] += w_hat
            if want_sq and j == S:
                sq += np.abs(w_hat) ** 2
                omega_hat = 1j * (ops.kx * w_hat[1] - ops.ky * w_hat[0])
                sq_omega += np.abs(omega_hat) ** 2
    return sums, sq, sq_omega, det_min, det_max


def lagrangian_window_solve(
    model: ModelSpec,
    u0: VectorField,
    T: float,
    dt: float,
    window: float,
    ensemble: Ensemble,
    tol: float = 1e-6,
    max_iter: int = 12,
    flow_substeps: int = 1,
    workers: int | None = None,
    max_displacement: float = 8.0 * TWO_PI,
) -> tuple[list[FluidState], SolveReport]:
    """Windowed Picard solution of the stochastic Lagrangian fixed point for
    the gsqg family (forcing-free: the time-integral term vanishes).

    Returns states at every dt stamp plus a SolveReport whose mc_stats carry
    cumulative Monte-Carlo standard errors (L2, relative to the solution
    norm) of u and omega at window-end stamps.
    """
    if model.kind != "gsqg":
        raise ValueError("lagrangian_window_solve covers the gsqg family")
    t_start = _time.perf_counter()
    grid = u0.grid
    K = int(round(T / dt))
    S = int(round(window / dt))
    if K <= 0 or abs(K * dt - T) > 1e-9:
        raise ValueError(f"dt={dt} does not divide T={T}")
    if S <= 0 or K % S != 0 or abs(S * dt - window) > 1e-9:
        raise ValueError("window must be a multiple of dt dividing T")
    if abs(2.0 * model.nu - 2.0 * ensemble.nu) > 1e-12:
        raise ValueError("ensemble viscosity does not match the model")

    from .interpolation import FieldInterpolant

    ops = _SpectralOps(grid, model.alpha if model.kind == "gsqg" else 0.0)
    nodes = grid.nodes()
    m = ensemble.m

    u_st = np.empty((K + 1, 2, grid.n, grid.n))
    u_st[0] = irfft2(ops.project_sample(rfft2(u0.values), np.zeros(2)), grid.n)
    u_scale = max(float(np.sqrt(np.sum(u_st[0] ** 2))), 1e-300)

    report = SolveReport(tol=tol)
    se_u_cum_sq = 0.0
    se_o_cum_sq = 0.0
    times_se: list[float] = []
    se_u: list[float] = []
    se_omega: list[float] = []

    for a in range(0, K, S):
        t_a = a * dt
        win_times = t_a + dt * np.arange(S + 1)
        xi0 = model.inertia(VectorField(grid, u_st[a]))
        xi0_itp = FieldInterpolant(xi0.values, grid)
        u_w = np.repeat(u_st[a][None], S + 1, axis=0)
        diffs: list[float] = []
        last = None
        for _ in range(max_iter):
            vel = StageVelocity(TimeSampledVelocity(grid, win_times, u_w))
            chunks = path_chunks(m)

            def work(chunk: range):
                return _window_sweep(chunk, ensemble, vel, win_times, flow_substeps,
                                     grid, nodes, xi0_itp, ops, True, max_displacement)

            partials = run_chunked(work, chunks, workers)
            sums = pairwise_sum([p[0] for p in partials])
            sq = pairwise_sum([p[1] for p in partials])
            sq_omega = pairwise_sum([p[2] for p in partials])
            report.det_jac_min = min(report.det_jac_min, min(p[3] for p in partials))
            report.det_jac_max = max(report.det_jac_max, max(p[4] for p in partials))
            mean = sums / m
            u_new = np.stack([
                np.stack([irfft2(mean[j, 0], grid.n), irfft2(mean[j, 1], grid.n)])
                for j in range(S)
            ])
            denom = max(max(float(np.sqrt(np.sum(u_new[j] ** 2))) for j in range(S)),
                        1e-12 * u_scale)
            diff = max(
                float(np.sqrt(np.sum((u_new[j] - u_w[j + 1]) ** 2))) for j in range(S)
            ) / denom
            u_w[1:] = u_new
            diffs.append(diff)
            last = (mean, sq, sq_omega)
            if diff <= tol:
                break
        report.iterates.append(diffs)
        if diffs[-1] > tol:
            report.converged = False
        u_st[a + 1 : a + S + 1] = u_w[1:]

        # window-end Monte-Carlo standard errors (cumulative in quadrature)
        mean, sq, sq_omega = last
        if m > 1:
            var_u = np.maximum(sq / m - np.abs(mean[S - 1]) ** 2, 0.0) * (m / (m - 1.0))
            mo = 1j * (ops.kx * mean[S - 1, 1] - ops.ky * mean[S - 1, 0])
            var_o = np.maximum(sq_omega / m - np.abs(mo) ** 2, 0.0) * (m / (m - 1.0))
            se_u_cum_sq += (ops.l2_from_power(np.sum(var_u, axis=0)) ** 2) / m
            se_o_cum_sq += (ops.l2_from_power(var_o) ** 2) / m
        u_norm = ops.l2_from_power(np.sum(np.abs(mean[S - 1]) ** 2, axis=0))
        o_norm = ops.l2_from_power(
            np.abs(1j * (ops.kx * mean[S - 1, 1] - ops.ky * mean[S - 1, 0])) ** 2)
        times_se.append(float(win_times[-1]))
        se_u.append(np.sqrt(se_u_cum_sq) / max(u_norm, 1e-300))
        se_omega.append(np.sqrt(se_o_cum_sq) / max(o_norm, 1e-300))

    report.mc_stats = {"time": times_se, "se_u": se_u, "se_omega": se_omega}
    report.velocity = TimeSampledVelocity(grid, dt * np.arange(K + 1), u_st)
    report.wall_time = _time.perf_counter() - t_start

    states = [
        FluidState.from_velocity(model, VectorField(grid, u_st[j]), t=j * dt)
        for j in range(K + 1)
    ]
    return states, report


def _heun_backward(pos: np.ndarray, vel: StageVelocity, t1: float, t0: float,
                   shift_fn) -> np.ndarray:
    """One Heun (trapezoidal RK2) step from t1 to t0; stages sample only the
    interval endpoints, so a Brownian-rough drift injects no stage error."""
    h = t0 - t1

    def eval_at(t, pts):
        s = shift_fn(t) if shift_fn is not None else None
        return vel.interpolant(t).eval(pts if s is None else pts + s)

    k1 = eval_at(t1, pos)
    k2 = eval_at(t0, pos + h * k1)
    pos += 0.5 * h * (k1 + k2)
    return pos


def nonaveraged_shifted_euler(
    u0: VectorField,
    nu: float,
    path: BrownianPath,
    T: float,
    dt: float,
    tol: float = 1e-9,
    max_iter: int = 16,
) -> tuple[list[FluidState], SolveReport]:
    """Single-path (no expectation) Lagrangian velocity trajectory
    u_t = P[grad*(A_nu) u0 o A_nu] driven by its own flow.

    The fixed point coincides with the rigidly shifted inviscid flow
    u_t(x) = u_E(t, x - sqrt(2 nu) W_t); the solver never uses that identity
    (it is the verification contract).  The iterate lives at dt/2 stamps.
    """
    t_start = _time.perf_counter()
    grid = u0.grid
    model = ModelSpec.euler()
    K = int(round(T / dt))
    if K <= 0 or abs(K * dt - T) > 1e-9:
        raise ValueError(f"dt={dt} does not divide T={T}")

    from .interpolation import FieldInterpolant

    ops = _SpectralOps(grid, 0.0)
    nodes = grid.nodes()
    half = 0.5 * dt
    u_st = np.empty((2 * K + 1, 2, grid.n, grid.n))
    u_st[0] = irfft2(ops.project_sample(rfft2(u0.values), np.zeros(2)), grid.n)
    report = SolveReport(tol=tol)

    for k in range(K):
        t_a = k * dt
        stamp_times = np.array([t_a, t_a + half, t_a + dt])
        base_shift = path.shift_at(t_a)

        def shift_fn(t: float) -> np.ndarray:
            return (path.shift_at(t) - base_shift)[None, :]

        xi0_itp = FieldInterpolant(u_st[2 * k], grid)
        u_w = np.repeat(u_st[2 * k][None], 3, axis=0)
        diffs: list[float] = []
        for _ in range(max_iter):
            vel = StageVelocity(TimeSampledVelocity(grid, stamp_times, u_w))
            u_new = np.empty((2, 2, grid.n, grid.n))
            for idx, (t_j, one_rk4) in enumerate(((t_a + half, False), (t_a + dt, True))):
                pos = nodes.copy()
                if one_rk4:
                    rk4_positions(pos, vel, t_j, t_a, 1, shift_fn)
                else:
                    _heun_backward(pos, vel, t_j, t_a, shift_fn)
                g_hat, dmin, dmax = _weber_sample_hat(pos, nodes, grid, xi0_itp, ops)
                report.det_jac_min = min(report.det_jac_min, dmin)
                report.det_jac_max = max(report.det_jac_max, dmax)
                w_hat = ops.project_sample(g_hat, path.shift_at(t_j) - base_shift)
                u_new[idx, 0] = irfft2(w_hat[0], grid.n)
                u_new[idx, 1] = irfft2(w_hat[1], grid.n)
            denom = max(float(np.sqrt(np.sum(u_new[1] ** 2))), 1e-300)
            diff = max(
                float(np.sqrt(np.sum((u_new[0] - u_w[1]) ** 2))),
                float(np.sqrt(np.sum((u_new[1] - u_w[2]) ** 2))),
            ) / denom
            u_w[1:] = u_new
            diffs.append(diff)
            if diff <= tol:
                break
        report.iterates.append(diffs)
        if diffs[-1] > tol:
            report.converged = False
        u_st[2 * k + 1] = u_w[1]
        u_st[2 * k + 2] = u_w[2]

    report.velocity = TimeSampledVelocity(grid, half * np.arange(2 * K + 1), u_st)
    report.wall_time = _time.perf_counter() - t_start
    states = [
        FluidState.from_velocity(model, VectorField(grid, u_st[2 * j]), t=j * dt)
        for j in range(K + 1)
    ]
    return states, report
