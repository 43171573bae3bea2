"""Classical pseudo-spectral Eulerian reference solvers.

Time stepping is 4-stage Runge-Kutta on the advective/force terms with the
exact integrating factor exp(-nu |k|^2 dt) for diffusion; quadratic
products are formed in physical space and truncated by the 2/3 rule.
States are kept inside the 2/3 band at all times.

Systems solved (scalar form, conventions of spectral.py):

* gsqg(alpha):      d_t omega + u.grad(omega) = nu lap(omega),
                    u = K_BS (-Delta)^alpha omega
* boussinesq_mhd:   d_t omega + u.grad(omega) = nu lap(omega) + dx(theta) + B.grad(j)
                    d_t theta + u.grad(theta) = nu lap(theta)
                    d_t j     + u.grad(j)     = nu lap(j) + B.grad(omega)
                                                + 2 sum_c grad(B_c) x grad(u_c)
                    u = K_BS omega, B = K_BS j

The j-equation is the curl of the induction equation d_t B + [u, B] = nu lap B;
its quadratic source is validated against a primitive-variable step in the
test suite before being trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, VectorField
from .models import FluidState, ModelSpec
from .spectral import irfft2, rfft2

CFL_LIMIT = 0.9


class CFLError(ValueError):
    """Refused to start: the explicit advective step violates the CFL bound."""


class SolverDivergedError(RuntimeError):
    """Aborted: non-finite values appeared during time stepping."""


@dataclass
class _Workspace:
    grid: Grid
    ikx: np.ndarray
    iky: np.ndarray
    k2: np.ndarray
    mask: np.ndarray
    inv_k2: np.ndarray

    @classmethod
    def build(cls, grid: Grid) -> "_Workspace":
        kx, ky, k2 = grid.wavenumbers()
        ikx = 1j * kx * np.ones_like(ky)
        iky = 1j * ky * np.ones_like(kx)
        nyq = grid.n // 2
        ikx[:, nyq] = 0.0
        iky[grid.n - nyq, :] = 0.0
        inv_k2 = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
        return cls(grid, ikx, iky, k2, grid.dealias_mask(), inv_k2)

    def velocity_spec(self, omega_hat: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
        """u = K_BS (-Delta)^alpha omega in spectral space."""
        psi = omega_hat * (-self.inv_k2)
        if alpha != 0.0:
            psi = psi * np.where(self.k2 > 0, np.where(self.k2 > 0, self.k2, 1.0) ** alpha, 0.0)
        return -self.iky * psi, self.ikx * psi

    def to_phys(self, spec: np.ndarray) -> np.ndarray:
        return irfft2(spec, self.grid.n)

    def advection(self, carrier_hat: tuple[np.ndarray, np.ndarray], scalar_hat: np.ndarray) -> np.ndarray:
        """dealiased spectral u . grad(s)."""
        ux = self.to_phys(carrier_hat[0])
        uy = self.to_phys(carrier_hat[1])
        sx = self.to_phys(self.ikx * scalar_hat)
        sy = self.to_phys(self.iky * scalar_hat)
        return rfft2(ux * sx + uy * sy) * self.mask


def _check_cfl(speed: float, grid: Grid, dt: float) -> None:
    if speed * dt / grid.h > CFL_LIMIT:
        raise CFLError(
            f"CFL violation: max|u| dt / h = {speed * dt / grid.h:.3f} > {CFL_LIMIT}"
        )


def _check_finite_spec(spec: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(spec)):
        raise SolverDivergedError(f"solver state became non-finite at t = {t:.6g}")


def _ifrk4(state: list[np.ndarray], rhs, efac: list[np.ndarray], ehalf: list[np.ndarray],
           t: float, dt: float) -> list[np.ndarray]:
    """One integrating-factor RK4 step for d_t w = L w + N(w, t), with
    efac = exp(L dt) and ehalf = exp(L dt/2) per component."""
    k1 = rhs(state, t)
    s2 = [eh * (w + 0.5 * dt * k) for w, k, eh in zip(state, k1, ehalf)]
    k2 = rhs(s2, t + 0.5 * dt)
    s3 = [eh * w + 0.5 * dt * k for w, k, eh in zip(state, k2, ehalf)]
    k3 = rhs(s3, t + 0.5 * dt)
    s4 = [ef * w + dt * eh * k for w, k, ef, eh in zip(state, k3, efac, ehalf)]
    k4 = rhs(s4, t + dt)
    return [
        ef * w + (dt / 6.0) * (ef * a + 2.0 * eh * (b + c) + d)
        for w, a, b, c, d, ef, eh in zip(state, k1, k2, k3, k4, efac, ehalf)
    ]


def _gsqg_rhs(ws: _Workspace, alpha: float):
    def rhs(state: list[np.ndarray], t: float) -> list[np.ndarray]:
        (omega_hat,) = state
        u_hat = ws.velocity_spec(omega_hat, alpha)
        return [-ws.advection(u_hat, omega_hat)]

    return rhs


def _boussinesq_rhs(ws: _Workspace):
    def rhs(state: list[np.ndarray], t: float) -> list[np.ndarray]:
        omega_hat, theta_hat, j_hat = state
        u_hat = ws.velocity_spec(omega_hat, 0.0)
        b_hat = ws.velocity_spec(j_hat, 0.0)
        ux, uy = ws.to_phys(u_hat[0]), ws.to_phys(u_hat[1])
        bx, by = ws.to_phys(b_hat[0]), ws.to_phys(b_hat[1])

        def adv(carrier_x, carrier_y, s_hat):
            sx = ws.to_phys(ws.ikx * s_hat)
            sy = ws.to_phys(ws.iky * s_hat)
            return rfft2(carrier_x * sx + carrier_y * sy) * ws.mask

        n_omega = -adv(ux, uy, omega_hat) + ws.ikx * theta_hat + adv(bx, by, j_hat)
        n_theta = -adv(ux, uy, theta_hat)
        # curl source of the Lie-transported magnetic field:
        # 2 sum_c grad(B_c) x grad(u_c)
        uxx, uxy = ws.to_phys(ws.ikx * u_hat[0]), ws.to_phys(ws.iky * u_hat[0])
        uyx, uyy = ws.to_phys(ws.ikx * u_hat[1]), ws.to_phys(ws.iky * u_hat[1])
        bxx, bxy = ws.to_phys(ws.ikx * b_hat[0]), ws.to_phys(ws.iky * b_hat[0])
        byx, byy = ws.to_phys(ws.ikx * b_hat[1]), ws.to_phys(ws.iky * b_hat[1])
        q = 2.0 * ((bxx * uxy - bxy * uxx) + (byx * uyy - byy * uyx))
        n_j = -adv(ux, uy, j_hat) + adv(bx, by, omega_hat) + rfft2(q) * ws.mask
        return [n_omega, n_theta, n_j]

    return rhs


def reference_solve(
    model: ModelSpec,
    initial: FluidState,
    T: float,
    dt: float,
    snapshot_stride: int = 1,
) -> list[FluidState]:
    """Pseudo-spectral trajectory of the model from ``initial`` over [t0, t0+T].

    Returns states every ``snapshot_stride`` steps (always including the
    first and last).  Raises CFLError before starting and
    SolverDivergedError if the state leaves the finite range.
    """
    grid = initial.u.grid
    ws = _Workspace.build(grid)
    nsteps = int(round(T / dt))
    if nsteps <= 0 or abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"dt={dt} does not divide T={T}")
    _check_cfl(initial.u.linf(), grid, dt)

    boussinesq = model.kind == "boussinesq_mhd"
    state = [rfft2(initial.omega.values) * ws.mask]
    if boussinesq:
        if initial.theta is None or initial.j is None:
            raise ValueError("boussinesq_mhd needs theta and j in the initial state")
        state.append(rfft2(initial.theta.values) * ws.mask)
        state.append(rfft2(initial.j.values) * ws.mask)
        rhs = _boussinesq_rhs(ws)
    else:
        rhs = _gsqg_rhs(ws, model.alpha)

    efac = [np.exp(-model.nu * ws.k2 * dt)] * len(state)
    ehalf = [np.exp(-model.nu * ws.k2 * (0.5 * dt))] * len(state)

    t0 = initial.t

    def snapshot(t: float, st: list[np.ndarray]) -> FluidState:
        omega = ScalarField(grid, ws.to_phys(st[0]))
        theta = ScalarField(grid, ws.to_phys(st[1])) if boussinesq else None
        jj = ScalarField(grid, ws.to_phys(st[2])) if boussinesq else None
        return FluidState.from_vorticity(model, omega, t=t, theta=theta, j=jj)

    out = [snapshot(t0, state)]
    for step in range(nsteps):
        t = t0 + step * dt
        state = _ifrk4(state, rhs, efac, ehalf, t, dt)
        _check_finite_spec(state[0], t + dt)
        if (step + 1) % snapshot_stride == 0 or step + 1 == nsteps:
            out.append(snapshot(t0 + (step + 1) * dt, state))
    return out


def trajectory_velocity(states: list[FluidState]):
    """Pack a trajectory's velocities into a TimeSampledVelocity."""
    from .flows import TimeSampledVelocity

    times = np.array([s.t for s in states])
    fields = np.stack([s.u.values for s in states])
    return TimeSampledVelocity(states[0].u.grid, times, fields)
