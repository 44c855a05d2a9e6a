"""Spectral toolkit for control and stabilization of the 1D cubic NLS on the torus."""
from .spectral import (
    Bump, ConstantCutoff, MirroredBump, Parity, SpectralField, TorusGrid, apply_Dr,
    commutator_Dr_mult, free_propagate, hs_norm, make_bump, multiply, parity_project,
    random_field, to_physical, to_spectral,
)
from .dynamics import (
    Damping, EvolutionParams, HumSource, StepSource, TrajectoryTrace, evolve,
    evolve_backward, mass_identity_residual, strang_step,
)
from .linear_control import (
    ControlGeometry, LinearControlResult, gramian_apply, observability_constant,
    solve_linear_hum,
)
from .nonlinear_control import (
    ControlSolution, b_map, contraction_threshold, hs_regularity_report, k_operator,
    local_null_control,
)
from .steering import (
    DecayFit, SteeringPlan, damped_observability_scan, decay_rate_fit, stabilize_until, steer,
)
from .xsb import (
    TimeWindow, XsbSample, duhamel_gain_probe, l4_ratio, multiplication_loss_probe,
    trilinear_ratio, xsb_norm,
)
from .config import ExperimentConfig, preset

__version__ = "0.1.0"

__all__ = [
    "Bump",
    "ConstantCutoff",
    "MirroredBump",
    "Parity",
    "SpectralField",
    "TorusGrid",
    "apply_Dr",
    "commutator_Dr_mult",
    "free_propagate",
    "hs_norm",
    "make_bump",
    "multiply",
    "parity_project",
    "random_field",
    "to_physical",
    "to_spectral",
    "Damping",
    "EvolutionParams",
    "HumSource",
    "StepSource",
    "TrajectoryTrace",
    "evolve",
    "evolve_backward",
    "mass_identity_residual",
    "strang_step",
    "ControlGeometry",
    "LinearControlResult",
    "gramian_apply",
    "observability_constant",
    "solve_linear_hum",
    "ControlSolution",
    "b_map",
    "contraction_threshold",
    "hs_regularity_report",
    "k_operator",
    "local_null_control",
    "DecayFit",
    "SteeringPlan",
    "damped_observability_scan",
    "decay_rate_fit",
    "stabilize_until",
    "steer",
    "TimeWindow",
    "XsbSample",
    "duhamel_gain_probe",
    "l4_ratio",
    "multiplication_loss_probe",
    "trilinear_ratio",
    "xsb_norm",
    "ExperimentConfig",
    "preset",
]
