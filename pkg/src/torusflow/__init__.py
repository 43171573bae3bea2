"""torusflow: pseudo-spectral and stochastic Lagrangian solvers for 2-D
viscous hydrodynamics on the periodic torus, with conservation-law
verification (circulation, transported invariants, measure preservation)."""

from .grid import Grid, GridMismatchError, NonFiniteFieldError, ScalarField, VectorField
from .spectral import (SpectralMultiplier, apply_multiplier, biot_savart, curl2d,
                       dealias, differential, div, fractional_laplacian, grad,
                       helmholtz_decompose, leray_project, perp_grad)
from .interpolation import FieldInterpolant, interpolate_field
from .flows import (FlowBlowupError, FlowMap, TimeSampledVelocity, flow_pair,
                    integrate_flow, invert_flow)
from .transport import (FlowHistory, cauchy_vorticity, dual_transport_solution,
                        lie_transported_current, pullback_covector,
                        pushforward_scalar, pushforward_vector, weber_reconstruct)
from .brownian import (BrownianPath, Ensemble, ensemble_mean, sample_paths,
                       shift_field, stochastic_flow_pair)
from .models import (FluidState, ModelSpec, random_band_limited_scalar,
                     random_band_limited_velocity, shear, single_mode, taylor_green)
from .reference import CFLError, SolverDivergedError, reference_solve, trajectory_velocity
from .lagrangian import SolveReport, lagrangian_window_solve, nonaveraged_shifted_euler
from .picard import ExistenceBoundError, existence_window, picard_boussinesq
from .loops import (LoopResolutionError, MaterialLoop, advect_loop, advect_loop_ode,
                    circulation, disk_vorticity_integral)
from .diagnostics import (ConservationLedger, ertel_feynman_kac_mean, ertel_invariant,
                          pathwise_kelvin_residual, statistical_kelvin_residual)
from .config import ConfigError, RunConfig, config_hash, parse_config, serialize_config
from .snapshots import SnapshotError, read_snapshot, write_snapshot

__version__ = "0.1.0"
