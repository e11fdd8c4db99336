"""Event-driven simulation of 3D piecewise-smooth flows with a sliding
layer, plus return-map tooling for chaotic sliding loops.

The package splits into a geometry/classification core (`geometry`), a
builtin model family and system loaders (`models`), smooth/sliding/hybrid
integration (`integrator`, `sliding`), return-map analysis on a fold
section (`shilnikov`), and the exact symbolic side (`symbolic`).
"""

from .geometry import (
    FoldKind,
    GradientDegenerateError,
    PiecewiseSystem,
    RegionClass,
    RegionTag,
    classify,
    lie_derivatives,
    second_lie,
)
from .models import (
    KnownPoints,
    ShilnikovModelParams,
    SystemSpecError,
    build_model,
    load_system,
    oracle_known_points,
    oracle_x_flow,
    system_from_spec,
)
from .sliding import (
    DenominatorDegenerateError,
    EquilibriumKind,
    PseudoEquilibrium,
    TangentChart,
    build_chart,
    find_pseudo_equilibria,
    fold_transversality,
    sliding_field,
)
from .integrator import (
    ChatteringError,
    EscapingRegionError,
    Event,
    EventKind,
    FlowError,
    Segment,
    Trajectory,
    filippov_segments,
    flow_filippov,
    flow_slide,
    flow_smooth,
)
from .shilnikov import (
    Band,
    BranchMismatchError,
    Certificate,
    EscapedError,
    ItineraryWord,
    PeriodicPoint,
    PseudoEquilibriumReachedError,
    ReturnOpts,
    ReturnRecord,
    Section,
    SectionBuildError,
    SectionPoint,
    ShilnikovReport,
    build_section,
    code_itinerary,
    discover_bands,
    entropy_estimate,
    find_periodic,
    first_return,
    locate_cylinder,
    realized_words,
    return_derivative,
    section_scan,
    verify_shilnikov,
)
from .symbolic import (
    BernoulliMeasure,
    Cylinder,
    SymbolSequence,
    count_periodic,
    cylinder_measure,
    distance,
    shift,
    shift_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "Band",
    "BernoulliMeasure",
    "BranchMismatchError",
    "Certificate",
    "ChatteringError",
    "Cylinder",
    "DenominatorDegenerateError",
    "EquilibriumKind",
    "EscapedError",
    "EscapingRegionError",
    "Event",
    "EventKind",
    "FlowError",
    "FoldKind",
    "GradientDegenerateError",
    "ItineraryWord",
    "KnownPoints",
    "PeriodicPoint",
    "PiecewiseSystem",
    "PseudoEquilibrium",
    "PseudoEquilibriumReachedError",
    "RegionClass",
    "RegionTag",
    "ReturnOpts",
    "ReturnRecord",
    "Section",
    "SectionBuildError",
    "SectionPoint",
    "ShilnikovModelParams",
    "ShilnikovReport",
    "SymbolSequence",
    "SystemSpecError",
    "TangentChart",
    "Trajectory",
    "build_chart",
    "build_model",
    "build_section",
    "classify",
    "code_itinerary",
    "count_periodic",
    "cylinder_measure",
    "discover_bands",
    "distance",
    "entropy_estimate",
    "find_periodic",
    "find_pseudo_equilibria",
    "first_return",
    "filippov_segments",
    "flow_filippov",
    "flow_slide",
    "flow_smooth",
    "fold_transversality",
    "lie_derivatives",
    "load_system",
    "locate_cylinder",
    "oracle_known_points",
    "oracle_x_flow",
    "realized_words",
    "return_derivative",
    "section_scan",
    "second_lie",
    "shift",
    "shift_entropy",
    "sliding_field",
    "system_from_spec",
    "verify_shilnikov",
]
