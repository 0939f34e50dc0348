"""Exception hierarchy shared across the package."""


class EigcollocError(Exception):
    """Base class for all package-specific errors."""


class FamilyValidationError(EigcollocError):
    """An operator family violates a structural invariant (symmetry, definiteness, dims)."""


class DecayViolationError(EigcollocError):
    """The decay bounds do not sum below one, so uniform ellipticity is lost."""


class ParameterDimensionError(EigcollocError):
    """A parameter vector has more components than the family has terms."""


class SolverError(EigcollocError):
    """The dense generalized eigensolver failed (conditioning or non-convergence)."""


class RankDeficiencyError(EigcollocError):
    """Gram-Schmidt hit a column that is numerically dependent on its predecessors."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column} is numerically rank deficient")


class IsolationPreconditionError(EigcollocError):
    """The isolation corollary's hypothesis fails: the cluster is not provably isolated."""


class ClusterCoverageError(EigcollocError):
    """A cluster index exceeds the number of eigenpairs available in a decomposition."""


class DegenerateBasisError(EigcollocError):
    """The reference/cluster Gram matrix is numerically singular at some parameter point."""

    def __init__(self, sigma_min, point=None, message=None):
        self.sigma_min = sigma_min
        self.point = point
        if message is None:
            where = f" at point {tuple(point)}" if point is not None else ""
            message = f"cluster basis degenerate{where}: sigma_min={sigma_min:.3e}"
        super().__init__(message)


class ClusterCrossingError(EigcollocError):
    """A cluster eigenvalue crossed the exterior spectrum at a collocation point."""


class WeightError(EigcollocError):
    """An anisotropy weight is <= 1, which would make the index set infinite."""


class MonotonicityError(EigcollocError):
    """An operation that requires a downward-closed index set received one that is not."""


class ExtrapolationError(EigcollocError):
    """An evaluation point lies outside [-1, 1] in an active dimension."""


class ConfigError(EigcollocError):
    """A study configuration is malformed or inconsistent."""


class StageError(EigcollocError):
    """A study stage failed; carries the stage name and budget index for diagnostics."""

    def __init__(self, stage, budget_index=None, message=""):
        self.stage = stage
        self.budget_index = budget_index
        at = f" (budget index {budget_index})" if budget_index is not None else ""
        super().__init__(f"stage '{stage}'{at}: {message}")
