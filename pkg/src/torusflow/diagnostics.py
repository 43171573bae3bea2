"""Conservation-law verification: Kelvin circulation residuals, pointwise
transported invariants, and time-series bookkeeping.

Pathwise Kelvin: along each stochastic flow the circulation of the pulled
back momentum around the advected loop equals the initial circulation.
Statistical Kelvin: the circulation of the ensemble momentum around a fixed
loop equals the ensemble mean of initial-momentum circulations around the
back-advected loops.  Residuals are relative when the reference circulation
is not tiny, absolute otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flows import FlowMap
from .grid import ScalarField, VectorField
from .interpolation import FieldInterpolant
from .loops import MaterialLoop, circulation
from .models import FluidState, ModelSpec
from .transport import pullback_covector

ABS_FLOOR = 1e-8


def _residual(lhs: float, rhs: float) -> float:
    if abs(rhs) < ABS_FLOOR:
        return abs(lhs - rhs)
    return abs(lhs - rhs) / abs(rhs)


def pathwise_kelvin_residual(
    xi0: VectorField,
    flow_pairs: list[tuple[FlowMap, FlowMap]],
    loop: MaterialLoop,
) -> np.ndarray:
    """Per-path |circ(xi', X_nu(loop)) - circ(xi0, loop)| (relative), where
    xi' = pullback_covector(xi0, A_nu)."""
    from .loops import advect_loop

    ref = circulation(xi0, loop)
    out = np.empty(len(flow_pairs))
    for i, (xnu, anu) in enumerate(flow_pairs):
        xi_prime = pullback_covector(xi0, anu)
        moved = advect_loop(loop, xnu)
        out[i] = _residual(circulation(xi_prime, moved), ref)
    return out


def statistical_kelvin_residual(
    xi_t: VectorField,
    xi0: VectorField,
    back_loops: list[MaterialLoop],
    loop: MaterialLoop,
) -> tuple[float, float, float]:
    """(residual, ensemble mean of the back-advected circulations, standard
    error of that mean).  The residual compares circ(xi_t, loop) with the
    mean of circ(xi0, A_nu(loop)) over paths."""
    lhs = circulation(xi_t, loop)
    samples = np.array([circulation(xi0, bl) for bl in back_loops])
    rhs = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(len(samples))) if len(samples) > 1 else 0.0
    return abs(lhs - rhs), rhs, se


def ertel_invariant(
    w_t: VectorField,
    v_t: VectorField,
    flow: FlowMap,
    w0: VectorField,
    v0: VectorField,
) -> ScalarField:
    """Defect field (w_t . v_t)(X_t(x)) - (w0 . v0)(x); identically zero for
    exact dual transport/transport pairs along the same flow."""
    grid = w_t.grid
    prod = np.sum(w_t.values * v_t.values, axis=0)
    sampled = FieldInterpolant(prod, grid).eval(flow.grid_images()).reshape(grid.shape)
    return ScalarField(grid, sampled - np.sum(w0.values * v0.values, axis=0))


def ertel_feynman_kac_mean(
    xi0: VectorField,
    v0: VectorField,
    back_maps: list[FlowMap],
) -> ScalarField:
    """Ensemble mean of (xi0 . v0) o A_nu, the viscous transported-invariant
    average (solves the advection-diffusion equation of the invariant)."""
    from .parallel import pairwise_sum

    grid = xi0.grid
    prod = np.sum(xi0.values * v0.values, axis=0)
    itp = FieldInterpolant(prod, grid)
    samples = [itp.eval(a.grid_images()).reshape(grid.shape) for a in back_maps]
    return ScalarField(grid, pairwise_sum(samples) / len(samples))


@dataclass
class ConservationLedger:
    """Aligned time series of every tracked conservation quantity."""

    times: list[float] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)
    loops: dict[str, MaterialLoop] = field(default_factory=dict)

    def register_loop(self, name: str, loop: MaterialLoop) -> None:
        self.loops[name] = loop

    def _push(self, name: str, value: float) -> None:
        self.series.setdefault(name, []).append(float(value))

    def append(self, state: FluidState, model: ModelSpec,
               det_bounds: tuple[float, float] | None = None,
               extra: dict[str, float] | None = None) -> None:
        """Append energy, enstrophy, registered-loop circulations, optional
        det-Jacobian extremes and caller-supplied extra columns."""
        self.times.append(float(state.t))
        self._push("energy", model.energy(state.u))
        self._push("enstrophy", state.enstrophy())
        for name, loop in self.loops.items():
            self._push(f"circulation_{name}", circulation(state.u, loop))
        if state.theta is not None and state.B is not None:
            self._push("cross_helicity", state.u.inner(state.B))
        if det_bounds is not None:
            self._push("det_jac_min", det_bounds[0])
            self._push("det_jac_max", det_bounds[1])
        for key, value in (extra or {}).items():
            self._push(key, value)

    def column_names(self) -> list[str]:
        return ["time", *self.series.keys()]

    def rows(self):
        for i, t in enumerate(self.times):
            yield [t, *(self.series[k][i] for k in self.series)]
