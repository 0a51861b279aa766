"""Diagonal-flow successive minima, exact piecewise-linear templates,
and entropy experiments on unimodular lattices."""

from .experiments import (
    BandSpec,
    BandVerdict,
    SeparatedSet,
    band_membership,
    dimension_estimate,
    greedy_separated_set,
    matrices_from_csv,
    matrices_to_csv,
    scan_band_matrices,
    sup_deviation,
    torus_distance,
)
from .lattice import (
    DEFAULT_ENUM_BUDGET,
    EnumerationBudgetExceeded,
    FlowShape,
    LatticeBasis,
    MinimaPath,
    MinimaVector,
    PerturbationMatrix,
    flow_matrix,
    flowed_basis,
    minima_path,
    minima_path_from_csv,
    minima_path_to_csv,
    successive_minima,
    unipotent,
)
from .measures import (
    EmpiricalMeasure,
    EmptySet,
    EntropyReport,
    GridLabeler,
    InvalidParams,
    OutOfRange,
    PartitionLabeler,
    SeparationParams,
    SeparationReport,
    entropy,
    entropy_inequality_check,
    haar_entropy,
    mass_outside_band,
    measure_from_csv,
    measure_to_csv,
    mixture_entropy,
    mixture_weights,
    mu_N,
    nu_N,
    orbit_labels,
    pushforward,
    refined_entropy,
    separation_check,
    tv_distance,
)
from .standard import (
    DegenerateShape,
    EndpointMismatch,
    FeasibilityReport,
    InfeasibleSpec,
    SegmentSpec,
    build_segment,
    concat,
    feasibility,
    paper_template,
    switch_times,
)
from .templates import (
    ContractionProfile,
    DomainMismatch,
    EqualityBlock,
    MalformedTemplate,
    NotEventuallyPeriodic,
    PeriodicTail,
    PiecewiseLinearPath,
    Template,
    TemplateParseError,
    Violation,
    allowed_partial_slopes,
    average_contraction,
    contraction_profile,
    equality_blocks,
    linearity_intervals,
    lower_average_contraction,
    template_from_text,
    template_to_text,
    validate_template,
    zero_template,
)

__version__ = "0.1.0"

__all__ = [
    "BandSpec",
    "BandVerdict",
    "ContractionProfile",
    "DEFAULT_ENUM_BUDGET",
    "DegenerateShape",
    "DomainMismatch",
    "EmpiricalMeasure",
    "EmptySet",
    "EndpointMismatch",
    "EntropyReport",
    "EnumerationBudgetExceeded",
    "EqualityBlock",
    "FeasibilityReport",
    "FlowShape",
    "GridLabeler",
    "InfeasibleSpec",
    "InvalidParams",
    "LatticeBasis",
    "MalformedTemplate",
    "MinimaPath",
    "MinimaVector",
    "NotEventuallyPeriodic",
    "OutOfRange",
    "PartitionLabeler",
    "PeriodicTail",
    "PerturbationMatrix",
    "PiecewiseLinearPath",
    "SegmentSpec",
    "SeparatedSet",
    "SeparationParams",
    "SeparationReport",
    "Template",
    "TemplateParseError",
    "Violation",
    "allowed_partial_slopes",
    "average_contraction",
    "band_membership",
    "build_segment",
    "concat",
    "contraction_profile",
    "dimension_estimate",
    "entropy",
    "entropy_inequality_check",
    "equality_blocks",
    "feasibility",
    "flow_matrix",
    "flowed_basis",
    "greedy_separated_set",
    "haar_entropy",
    "linearity_intervals",
    "lower_average_contraction",
    "mass_outside_band",
    "matrices_from_csv",
    "matrices_to_csv",
    "measure_from_csv",
    "measure_to_csv",
    "minima_path",
    "minima_path_from_csv",
    "minima_path_to_csv",
    "mixture_entropy",
    "mixture_weights",
    "mu_N",
    "nu_N",
    "orbit_labels",
    "paper_template",
    "pushforward",
    "refined_entropy",
    "scan_band_matrices",
    "separation_check",
    "successive_minima",
    "sup_deviation",
    "switch_times",
    "template_from_text",
    "template_to_text",
    "torus_distance",
    "tv_distance",
    "unipotent",
    "validate_template",
    "zero_template",
]
