"""Branched optimal transport quantization toolkit."""

from .measures import (
    AhlforsEstimate,
    DensitySpec,
    DiscreteMeasure,
    GridSpec,
    ahlfors_constants,
    dirac,
    grid_discretize,
    w1_distance,
)
from .network import Topology, TransportNetwork, alpha_mass, edge_flows
from .geometry import optimize_geometry
from .solver import SolverConfig, brute_force_bot, solve_bot, solve_single_source
from .landscape import (
    LandscapeField,
    compute_landscape,
    cost_identity_check,
    holder_estimate,
    holder_exponent,
    marginal_cost,
)
from .quantizer import (
    Quantizer,
    improve_sites,
    mass_optimal,
    partition_equivalence_check,
    solve_quantization,
)
from .asymptotics import (
    DeloneReport,
    DensityReport,
    ScalingReport,
    basin_stats,
    delone_constants,
    delone_report,
    density_compare,
    energy_equidistribution,
    inner_outer_ball_check,
    scaling_fit,
    scaling_fit_points,
    sweep,
)
from .estimator import BranchedQuantizer

__version__ = "0.1.0"

__all__ = [
    "AhlforsEstimate", "BranchedQuantizer", "DeloneReport", "DensityReport",
    "DensitySpec", "DiscreteMeasure", "GridSpec", "LandscapeField",
    "Quantizer", "ScalingReport", "SolverConfig", "Topology",
    "TransportNetwork", "ahlfors_constants", "alpha_mass", "basin_stats",
    "brute_force_bot", "compute_landscape", "cost_identity_check",
    "delone_constants", "delone_report", "density_compare", "dirac",
    "edge_flows", "energy_equidistribution", "grid_discretize",
    "holder_estimate", "holder_exponent", "improve_sites",
    "inner_outer_ball_check", "marginal_cost", "mass_optimal",
    "optimize_geometry", "partition_equivalence_check", "scaling_fit",
    "scaling_fit_points", "solve_bot", "solve_quantization",
    "solve_single_source", "sweep", "w1_distance",
]
