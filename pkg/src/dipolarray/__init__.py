"""Coupled-dipole simulations of layered atomic arrays.

Finite lattices of two-level emitters are modeled through the free-space
dyadic coupling between atoms; collective eigenmodes then give mirror
reflectance and photon-storage figures, with an infinite-array channel
model supplying the design conditions the finite code is checked
against.
"""

from .errors import (
    ConfigError,
    DegenerateModeError,
    DipolarrayError,
    GeometryError,
    GrazingOrderError,
    ModeError,
    NumericalError,
)
from .greenfn import (
    CIRCULAR,
    CollectiveModes,
    InteractionMatrix,
    Polarization,
    build_interaction_matrix,
    collective_modes,
    dyadic_green,
    load_matrix,
    projected_green,
    save_matrix,
)
from .idealized import (
    ChannelRates,
    EigenstructureReport,
    IdealizedLayerMatrix,
    LayerState,
    MirrorDesign,
    channel_rates,
    classify_eigenstructure,
    critical_lattice_constants,
    ideal_reflection,
    interlayer_matrix,
    uniform_state_rate,
)
from .lattice import (
    K0,
    VALIDITY_WINDOW,
    ArrayGeometry,
    DiffractionOrder,
    LatticeSpec,
    enumerate_orders,
    generate_patch,
    hex_atom_count,
    make_lattice,
    rings_for_count,
    stack_center,
    stack_layers,
)
from .memory import (
    KMatrix,
    RetrievalResult,
    k_matrix,
    max_retrieval,
    retrieval_for_spinwave,
)
from .modes import (
    ModeField,
    ModeVector,
    evaluate_field,
    gaussian_mode,
    plane_wave_mode,
    sample_mode,
    transverse_power,
    two_way_mode,
    validate_plane_wave_limit,
)
from .optimize import (
    OptimizationRun,
    PowerLawFit,
    ScalingSeries,
    fit_power_law,
    nelder_mead,
    optimize_memory,
    optimize_reflectance,
    scaling_study,
)
from .response import (
    ReflectanceResult,
    Spectrum,
    max_reflectance,
    reflectance_spectrum,
    reflection_coefficient,
    reflection_from_modes,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "CIRCULAR",
    "ChannelRates",
    "CollectiveModes",
    "ConfigError",
    "DegenerateModeError",
    "DiffractionOrder",
    "DipolarrayError",
    "EigenstructureReport",
    "GeometryError",
    "GrazingOrderError",
    "IdealizedLayerMatrix",
    "InteractionMatrix",
    "K0",
    "KMatrix",
    "LatticeSpec",
    "LayerState",
    "MirrorDesign",
    "ModeError",
    "ModeField",
    "ModeVector",
    "NumericalError",
    "OptimizationRun",
    "Polarization",
    "PowerLawFit",
    "ReflectanceResult",
    "RetrievalResult",
    "ScalingSeries",
    "Spectrum",
    "VALIDITY_WINDOW",
    "build_interaction_matrix",
    "channel_rates",
    "classify_eigenstructure",
    "collective_modes",
    "critical_lattice_constants",
    "dyadic_green",
    "enumerate_orders",
    "evaluate_field",
    "fit_power_law",
    "gaussian_mode",
    "generate_patch",
    "hex_atom_count",
    "ideal_reflection",
    "interlayer_matrix",
    "k_matrix",
    "load_matrix",
    "make_lattice",
    "max_reflectance",
    "max_retrieval",
    "nelder_mead",
    "optimize_memory",
    "optimize_reflectance",
    "plane_wave_mode",
    "projected_green",
    "reflectance_spectrum",
    "reflection_coefficient",
    "reflection_from_modes",
    "retrieval_for_spinwave",
    "rings_for_count",
    "sample_mode",
    "save_matrix",
    "scaling_study",
    "stack_center",
    "stack_layers",
    "steady_state",
    "transverse_power",
    "two_way_mode",
    "uniform_state_rate",
    "validate_plane_wave_limit",
]
