"""Optimal mixing and density transport by incompressible flows on the 2D torus."""

__version__ = "0.1.0"

from .control import ControlPath, read_control, write_control
from .errors import (ConfigurationError, ConstraintViolationError, ConvergenceError,
                     DegeneracyError, DimensionError, DivergenceError, FormatError,
                     InfeasibilityError, MixflowError, ReachabilityError, SolvabilityError,
                     StepSizeError)
from .euler import VelocityTrajectory, euler_residual, integrate_euler
from .field import (Grid, ScalarField, SpectralField, SpectralMultiplier, VectorField,
                    inverse_spectral_transform, spectral_transform)
from .fieldio import read_field, read_trajectory, write_field, write_trajectory
from .helmholtz import leray_project, weighted_helmholtz_decompose, weighted_poisson_solve
from .metrics import (MetricKind, NormKind, control_norm, metric_derivative, mix_distance,
                      mix_distance_gradient, select_velocity, tangent_inner)
from .mixing import (MixingProblemSpec, OptimizerOptions, OptimizerResult, TransferEstimate,
                     evaluate_control, geodesic_diagnostics, mixing_cost, mixing_gradient,
                     optimize_mixing, rescale_control, transfer_continuation)
from .transport import (DensityTrajectory, continuity_rhs, integrate_transport,
                        pushforward_histogram, reachability_check)
