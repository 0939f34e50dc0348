"""Sparse collocation of isolated eigenspaces of affine operator families."""

from .errors import (
    ClusterCoverageError,
    ClusterCrossingError,
    ConfigError,
    DecayViolationError,
    DegenerateBasisError,
    EigcollocError,
    ExtrapolationError,
    FamilyValidationError,
    IsolationPreconditionError,
    MonotonicityError,
    ParameterDimensionError,
    RankDeficiencyError,
    SolverError,
    StageError,
    WeightError,
)
from .families import (
    AffineOperatorFamily,
    DecayReport,
    DecaySequence,
    assemble_at,
    designed_crossing_family,
    dirichlet_laplace_eigenvalue_1d,
    family_from_dict,
    family_hash,
    family_to_dict,
    load_family,
    model_diffusion_1d,
    model_diffusion_2d,
    save_family,
    synthetic_family,
    verify_decay,
)
from .eigensolver import SpectralDecomposition, m_orthonormalize, solve_gevp
from .eigenspace import (
    ClusterSelection,
    EigenspaceBasis,
    IsolationReport,
    canonical_basis,
    check_isolation,
    isolation_parameter,
    principal_angles,
    spectral_projector_apply,
    weyl_envelope,
)
from .sparse_grid import (
    CombinationTerm,
    MultiIndex,
    MultiIndexSet,
    NodeSet,
    anisotropic_set,
    combination_interpolate,
    combination_terms,
    gauss_legendre_nodes,
    grid_points,
    is_monotone,
    lagrange_basis_eval,
    multi_index_set,
    point_count_bound,
)
from .collocation import (
    CollocatedEigenbasis,
    collocate,
    evaluate,
    evaluate_cluster_values,
    load_collocated,
    orthonormalize_at,
    save_collocated,
)
from .study import (
    ErrorEstimate,
    ErrorRecord,
    StudyConfig,
    StudyResult,
    compute_tau_weights,
    estimate_error,
    fit_rate,
    run_convergence_study,
    run_crossing_demo,
)

__version__ = "0.1.0"

__all__ = [
    "AffineOperatorFamily",
    "ClusterCoverageError",
    "ClusterCrossingError",
    "ClusterSelection",
    "CollocatedEigenbasis",
    "CombinationTerm",
    "ConfigError",
    "DecayReport",
    "DecaySequence",
    "DecayViolationError",
    "DegenerateBasisError",
    "EigcollocError",
    "EigenspaceBasis",
    "ErrorEstimate",
    "ErrorRecord",
    "ExtrapolationError",
    "FamilyValidationError",
    "IsolationPreconditionError",
    "IsolationReport",
    "MonotonicityError",
    "MultiIndex",
    "MultiIndexSet",
    "NodeSet",
    "ParameterDimensionError",
    "RankDeficiencyError",
    "SolverError",
    "SpectralDecomposition",
    "StageError",
    "StudyConfig",
    "StudyResult",
    "WeightError",
    "anisotropic_set",
    "assemble_at",
    "canonical_basis",
    "check_isolation",
    "collocate",
    "combination_interpolate",
    "combination_terms",
    "compute_tau_weights",
    "designed_crossing_family",
    "dirichlet_laplace_eigenvalue_1d",
    "estimate_error",
    "evaluate",
    "evaluate_cluster_values",
    "family_from_dict",
    "family_hash",
    "family_to_dict",
    "fit_rate",
    "gauss_legendre_nodes",
    "grid_points",
    "is_monotone",
    "isolation_parameter",
    "lagrange_basis_eval",
    "load_collocated",
    "load_family",
    "m_orthonormalize",
    "model_diffusion_1d",
    "model_diffusion_2d",
    "multi_index_set",
    "orthonormalize_at",
    "point_count_bound",
    "principal_angles",
    "run_convergence_study",
    "run_crossing_demo",
    "save_collocated",
    "save_family",
    "solve_gevp",
    "spectral_projector_apply",
    "synthetic_family",
    "verify_decay",
    "weyl_envelope",
]
