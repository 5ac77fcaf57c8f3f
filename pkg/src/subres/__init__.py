"""Sub-resonance polynomial normal forms for narrow band contractions.

The package computes, along finite orbits of contraction germs whose
rates fall into narrow bands, the polynomial coordinate changes that
reduce the dynamics to sub-resonant normal form, and verifies the
structural consequences numerically: conjugacy residuals, fast-flag
invariance and decay rates, chart coherence along leaves, and the
centralizer property.
"""
from .spectral import (
    EpsilonBudget,
    NarrowBandError,
    Spectrum,
    SpectrumError,
    SubResonanceRelation,
    choose_epsilon,
    contraction_margin,
    degree_bound,
    enumerate_relations,
    is_narrow_band,
    is_sub_resonant,
    is_subordinate,
)
from .poly import (
    GradedSpace,
    NormInterval,
    PolyError,
    PolyMap,
    TermClass,
    classify_term,
    compose_truncated,
    derivative_at,
    invert_formal,
    poly_norm,
    preserves_flag,
    recenter,
    subres_split,
)
from .systems import (
    CommutingFamily,
    GermOrbit,
    RunDefaults,
    SkewProductSystem,
    SystemValidationError,
    TrigCoeff,
    identity_family,
    make_periodic,
    make_stationary,
    power_family,
    sample_skew_orbit,
)
from .engine import (
    EngineError,
    HomologicalProblem,
    NormalFormAtlas,
    assemble_Q,
    build_atlas,
    solve_periodic,
    solve_series,
)
from .checks import (
    CheckInputError,
    TransitionMap,
    VerificationReport,
    centralizer_check,
    coherence_check,
    coherence_growth_check,
    conjugacy_residual_jet,
    fast_flag_dynamics,
    merge_reports,
    class_invariance_check,
    residual_scaling,
    transition_jet,
    twist_contraction_check,
)
from .serialize import (
    ParseError,
    load_atlas,
    load_spectrum,
    load_system,
    orbit_hash,
    save_atlas,
    save_spectrum,
    save_system,
)

__version__ = "0.1.0"
