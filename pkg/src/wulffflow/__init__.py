"""wulffflow: anisotropic mean curvature flow as the sharp-interface limit
of the anisotropic Allen-Cahn equation, computed by minimizing movements,
with the full set of sharp-interface diagnostics and gradient-flow
calibrations for the shrinking-Wulff-shape benchmark."""

from .anisotropy import (Anisotropy, Cutoff, DziukConstants, Mobility, bgn,
                         cahn_hoffman_trunc, dziuk_gap, euclidean,
                         fit_dziuk_constants, identity_report)
from .energy import EnergyReport, GWeight, energy_eps, energy_gradient, g_weight, metric_sq
from .errors import ConfigError, ConvergenceError, InputError, InvariantViolation
from .field import (PeriodicField, VectorField, centered_gradient,
                    forward_gradient, integrate, linf_center_distance,
                    load_snapshot, neg_adjoint_divergence, save_snapshot)
from .potential import DoubleWell, Profile, c0_of, profile, standard_well, well_from_name
from .solver import (Model, SolverConfig, StepRecord, Trajectory,
                     initial_planar, initial_wulff, minimize_step, run)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
