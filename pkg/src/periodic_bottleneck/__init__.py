"""Bottleneck distances and constructive transformations for periodic point sets."""

from .bottleneck import (
    BottleneckResult,
    Budget,
    IsometryParams,
    Matching,
    bottleneck_finite,
    bottleneck_periodic_upper,
    counting_lower_bound,
    covering_gap_lower_bound,
    euclidean_bottleneck_finite,
    euclidean_bottleneck_periodic,
)
from .gadgets import (
    FiniteMetricSpace,
    GadgetSpec,
    GridPoint,
    build_phi_gadget,
    build_psi_gadget,
    certify_disjoint_union,
    embed_metric_space,
    encode_grid_to_interval,
    pairing_T,
    pairing_T_inverse,
)
from .geometry import (
    TOL,
    FinitePointSet,
    Lattice,
    PeriodicPointSet,
    RadiusInterval,
    covering_radius,
    density,
    max_ball_count,
    packing_radius,
    points_in_ball,
    project_along_shortest,
)
from .separation import build_separated_family, gamma_lattice, separation_witness
from .transport import ShiftPlan, ShiftStep, flatten_motif, normalize_to_integer_lattice, verify_plan

__version__ = "0.1.0"

__all__ = [
    "BottleneckResult",
    "Budget",
    "IsometryParams",
    "Matching",
    "bottleneck_finite",
    "bottleneck_periodic_upper",
    "counting_lower_bound",
    "covering_gap_lower_bound",
    "euclidean_bottleneck_finite",
    "euclidean_bottleneck_periodic",
    "FiniteMetricSpace",
    "GadgetSpec",
    "GridPoint",
    "build_phi_gadget",
    "build_psi_gadget",
    "certify_disjoint_union",
    "embed_metric_space",
    "encode_grid_to_interval",
    "pairing_T",
    "pairing_T_inverse",
    "TOL",
    "FinitePointSet",
    "Lattice",
    "PeriodicPointSet",
    "RadiusInterval",
    "covering_radius",
    "density",
    "max_ball_count",
    "packing_radius",
    "points_in_ball",
    "project_along_shortest",
    "build_separated_family",
    "gamma_lattice",
    "separation_witness",
    "ShiftPlan",
    "ShiftStep",
    "flatten_motif",
    "normalize_to_integer_lattice",
    "verify_plan",
]
