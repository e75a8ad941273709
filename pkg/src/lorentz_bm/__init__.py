"""Finite Lorentzian spaces, exact q-Eckstein-Miller transport, and
verifiers for timelike curvature-dimension and Brunn-Minkowski conditions."""

from .causal import (
    NEG_INF,
    CausalError,
    DiscretePath,
    FiniteCausalSpace,
    Relation,
    age,
    causal_relation,
    check_reverse_triangle,
    emerald,
    is_geodesic_samples,
)
from .conditions import (
    ConditionSpec,
    verify_condition,
    verify_tbm,
    verify_tcd,
    verify_tcd_e,
    verify_tmcp,
)
from .distortion import (
    DistortionParams,
    check_distortion_properties,
    log_sigma,
    log_tau,
    sample_guarded,
    sigma,
    sin_k,
    tau,
)
from .measures import (
    AllLevelsVanish,
    DiscreteMeasure,
    SimpleDecomposition,
    boltzmann_entropy,
    dirac,
    exp_entropy,
    mutually_singular,
    renyi_entropy,
    simple_sequence,
    uniform_measure,
)
from .minkowski import (
    GridSpec,
    NotTotallyTimelike,
    OutOfDomain,
    ThetaMode,
    geodesic_point,
    grid_sample,
    midpoint_set,
    minkowski_ell,
    point_space,
    theta,
)
from .report import CheckRow, VerificationReport
from .transport import (
    ChronologyClass,
    Coupling,
    NotAMap,
    TransportPlan,
    classify_pair,
    correlated_decomposition,
    displacement_interpolate,
    is_cyclically_monotone,
    plan_between,
    restrict_coupling,
    solve_lq,
    verify_midpoint,
)

__version__ = "0.1.0"
