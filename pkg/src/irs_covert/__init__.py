"""Covert communication design with an intelligent reflecting surface.

Channel simulation, KL-divergence covertness metrics, the penalized SDP and
two-stage global-CSI designs, the statistics-only designs, and a Monte Carlo
sweep harness.
"""

from .covertness import (CovertnessBudget, conservative_kl_radius, epsilon_bar, expected_kl,
                         kl_divergence, kl_radius)
from .forms import QuadraticForms, build_quadratic_forms
from .no_csi import NoCsiInstance, no_csi_suite
from .psca import PscaConfig, PscaResult, psca_optimize, solve_relaxed_upper_bound
from .scenario import (ChannelSet, Geometry, ReflectDesign, SystemParams, cascade_vectors,
                       default_params, sample_channels)
from .two_stage import (TwoStageConfig, baseline_no_irs, perfect_covertness_design,
                        perfect_covertness_feasible, two_stage_optimize)

__version__ = "0.1.0"

__all__ = [
    "CovertnessBudget", "conservative_kl_radius", "epsilon_bar", "expected_kl",
    "kl_divergence", "kl_radius", "QuadraticForms", "build_quadratic_forms",
    "NoCsiInstance", "no_csi_suite", "PscaConfig", "PscaResult", "psca_optimize",
    "solve_relaxed_upper_bound", "ChannelSet", "Geometry", "ReflectDesign", "SystemParams",
    "cascade_vectors", "default_params", "sample_channels", "TwoStageConfig",
    "baseline_no_irs", "perfect_covertness_design", "perfect_covertness_feasible",
    "two_stage_optimize",
]
