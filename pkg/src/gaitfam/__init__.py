"""Families of periodic walking gaits for hybrid biped models, grown from
equilibrium stances by numerical continuation."""

from .continuation import (BoxBounds, ContinuationMap, GaitFamily, SingularEG,
                           build_family, cm_curve, cm_step, constant_control_map,
                           fixed_time_map, indicator, multi_dim, projected_newton,
                           scan_singular)
from .dynamics import (DynamicsEvaluation, HybridModel, ImpactEvaluation,
                       RobotState, VhcController, VhcSpec, bezier_eval,
                       bias_forces, constrained_accel, impact, mass_matrix,
                       total_energy, vhc_boundary_coefficients)
from .homotopy import (GhmResult, QueryConstraint, ghm_residual, ghm_solve,
                       integral_penalty, min_foot_clearance)
from .hybrid import (FlowResult, GaitPoint, JacobianResult, PeriodicityResult,
                     flip, flow, jacobian, periodicity, point_for, tangent_basis)
from .kernel import active_backend
from .models import (ActuationSpec, CompassGaitParams, average_velocity,
                     compass_gait, decoupled_double, equilibria,
                     load_model_config, slope, step_length, swing_foot_height)

__version__ = "0.1.0"

__all__ = [
    "ActuationSpec", "BoxBounds", "CompassGaitParams", "ContinuationMap",
    "DynamicsEvaluation", "FlowResult", "GaitFamily", "GaitPoint", "GhmResult",
    "HybridModel", "ImpactEvaluation", "JacobianResult", "PeriodicityResult",
    "QueryConstraint", "RobotState", "SingularEG", "VhcController", "VhcSpec",
    "active_backend", "average_velocity", "bezier_eval", "bias_forces",
    "build_family", "cm_curve", "cm_step", "compass_gait", "constant_control_map",
    "constrained_accel", "decoupled_double", "equilibria", "fixed_time_map",
    "flip", "flow", "ghm_residual", "ghm_solve", "impact", "indicator",
    "integral_penalty", "jacobian", "load_model_config", "mass_matrix",
    "min_foot_clearance", "multi_dim", "periodicity", "point_for",
    "projected_newton", "scan_singular", "slope", "step_length",
    "swing_foot_height", "tangent_basis", "total_energy",
    "vhc_boundary_coefficients",
]
