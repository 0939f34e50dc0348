"""Sparse collocation of the cluster basis over the parameter box.

``collocate`` solves the generalized eigenproblem at every grid point of a
multi-index set, stores the canonical (projector-based) basis per point, and
``evaluate`` combines the stored bases into the sparse interpolant at arbitrary
parameter points.  Interpolating raw sorted eigenvectors instead is supported
as a deliberately fragile alternative for demonstration purposes.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .eigensolver import m_orthonormalize, solve_gevp
from .eigenspace import (
    GRAM_SIGMA_THRESHOLD,
    ClusterSelection,
    EigenspaceBasis,
    _as_cluster,
    canonical_basis,
)
from .errors import (
    ClusterCoverageError,
    ClusterCrossingError,
    ConfigError,
    DegenerateBasisError,
    FamilyValidationError,
)
from .families import (
    AffineOperatorFamily,
    assemble_at,
    family_from_dict,
    family_hash,
    family_to_dict,
)
from .sparse_grid import (
    CombinationTerm,
    MultiIndexSet,
    combination_interpolate,
    combination_terms,
    grid_points,
)

TARGETS = ("canonical", "raw")


@dataclass(frozen=True)
class PointSolution:
    """Stored solve at one grid point: basis columns plus cluster eigenvalues."""

    basis: EigenspaceBasis
    cluster_values: np.ndarray


@dataclass(frozen=True)
class CollocatedEigenbasis:
    """All point solves of one collocation run, ready for evaluation.

    Immutable after construction; ``evaluate`` is pure, so instances may be
    shared freely across threads.
    """

    family: AffineOperatorFamily
    cluster: ClusterSelection
    A: MultiIndexSet
    terms: tuple[CombinationTerm, ...]
    point_data: dict
    ref_vectors: np.ndarray
    ref_values: np.ndarray
    target: str
    diagnostics: dict

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigError(f"unknown interpolation target {self.target!r}")
        expected = set(grid_points(self.A))
        if set(self.point_data) != expected:
            raise FamilyValidationError(
                "stored point data does not cover the collocation grid"
            )

    @property
    def S(self) -> int:
        return self.cluster.S


def _solve_point(family, cluster, y, ref_vectors, target, sigma_threshold):
    decomp = solve_gevp(assemble_at(family, y), family.mass, k=cluster.hi + 1)
    vals = decomp.values
    ext_gap = vals[cluster.hi] - vals[cluster.hi - 1]
    if cluster.lo >= 2:
        ext_gap = min(ext_gap, vals[cluster.lo - 1] - vals[cluster.lo - 2])
    mx = float(vals[cluster.hi - 1])
    if ext_gap <= 0.0:
        raise ClusterCrossingError(
            f"cluster touches exterior spectrum at point {tuple(y)}"
        )
    cluster_values = np.array([vals[j - 1] for j in cluster.J])
    if target == "canonical":
        try:
            basis = canonical_basis(
                decomp, ref_vectors, cluster, family.mass, sigma_threshold
            )
        except DegenerateBasisError as exc:
            raise DegenerateBasisError(exc.sigma_min, point=tuple(y)) from None
    else:
        # raw sorted eigenvectors; keep the Gram singular value as a diagnostic
        U = decomp.vectors[:, [j - 1 for j in cluster.J]]
        G = ref_vectors.T @ (family.mass @ U)
        sigma_min = float(np.linalg.svd(G, compute_uv=False)[-1])
        basis = EigenspaceBasis(vectors=U, gram_sigma_min=sigma_min)
    return PointSolution(basis=basis, cluster_values=cluster_values), ext_gap / mx


def collocate(
    family: AffineOperatorFamily,
    J,
    A: MultiIndexSet,
    target: str = "canonical",
    sigma_threshold: float = GRAM_SIGMA_THRESHOLD,
    n_threads: int = 1,
) -> CollocatedEigenbasis:
    """Solve at every grid point of A and assemble the interpolant's data.

    The reference vectors are fixed by a solve at the origin first; each grid
    point then gets an independent solve, so point solves may run on up to
    ``n_threads`` workers.  Results are keyed by grid point, which makes the
    outcome independent of completion order.

    Raises
    ------
    DegenerateBasisError
        If at some point the cluster subspace turns nearly orthogonal to the
        reference one (canonical target only); carries the offending point.
    ClusterCrossingError
        If a cluster eigenvalue coincides with the exterior spectrum at a point.
    """
    cluster = _as_cluster(J)
    if target not in TARGETS:
        raise ConfigError(f"unknown interpolation target {target!r}")
    n = family.dim
    if cluster.hi + 1 > n:
        raise ClusterCoverageError(
            f"need eigenpair {cluster.hi + 1} for gap monitoring, dimension is {n}"
        )
    if A.M_active > family.n_terms:
        raise FamilyValidationError(
            f"index set activates dimension {A.M_active}, family has {family.n_terms} terms"
        )
    decomp0 = solve_gevp(family.B0, family.mass, k=cluster.hi + 1)
    ref_vectors = np.ascontiguousarray(decomp0.vectors[:, [j - 1 for j in cluster.J]])
    ref_values = np.array([decomp0.values[j - 1] for j in cluster.J])
    points = grid_points(A)
    terms = tuple(combination_terms(A))

    def work(pt):
        return _solve_point(family, cluster, pt, ref_vectors, target, sigma_threshold)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            futures = [(pt, pool.submit(work, pt)) for pt in points]
            results = [(pt, f.result()) for pt, f in futures]
    else:
        results = [(pt, work(pt)) for pt in points]
    point_data = {pt: sol for pt, (sol, _) in results}
    min_gap = min(g for _, (_, g) in results)
    min_sigma = min(sol.basis.gram_sigma_min for _, (sol, _) in results)
    return CollocatedEigenbasis(
        family=family,
        cluster=cluster,
        A=A,
        terms=terms,
        point_data=point_data,
        ref_vectors=ref_vectors,
        ref_values=ref_values,
        target=target,
        diagnostics={
            "min_gram_sigma_min": min_sigma,
            "min_relative_exterior_gap": float(min_gap),
            "n_points": len(points),
        },
    )


def evaluate(cb: CollocatedEigenbasis, y) -> np.ndarray:
    """Interpolated basis columns at parameter point y (n x S matrix).

    Coordinates beyond the active dimensions of the index set do not influence
    the result; active coordinates must lie in [-1, 1].
    """
    data = {pt: sol.basis.vectors for pt, sol in cb.point_data.items()}
    return combination_interpolate(list(cb.terms), cb.A.M_active, data, y)


def evaluate_cluster_values(cb: CollocatedEigenbasis, y) -> np.ndarray:
    """Interpolated cluster eigenvalues at y (length-S vector).

    Symmetric functions of these (sum, mean) vary smoothly in y; the
    individually sorted values themselves may kink where branches cross.
    """
    data = {pt: sol.cluster_values for pt, sol in cb.point_data.items()}
    return combination_interpolate(list(cb.terms), cb.A.M_active, data, y)


def orthonormalize_at(cb: CollocatedEigenbasis, y) -> np.ndarray:
    """Mass-orthonormalized interpolant at y; same span as ``evaluate``."""
    return m_orthonormalize(evaluate(cb, y), cb.family.mass)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

FORMAT_NAME = "collocated-eigenbasis"
FORMAT_VERSION = 1


def collocated_to_dict(cb: CollocatedEigenbasis) -> dict:
    points = []
    for pt in sorted(cb.point_data):
        sol = cb.point_data[pt]
        points.append(
            {
                "y": list(pt),
                "vectors": sol.basis.vectors.tolist(),
                "gram_sigma_min": sol.basis.gram_sigma_min,
                "cluster_values": sol.cluster_values.tolist(),
            }
        )
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "family_hash": family_hash(cb.family),
        "family": family_to_dict(cb.family),
        "J": list(cb.cluster.J),
        "A": cb.A.to_json_list(),
        "target": cb.target,
        "ref_vectors": cb.ref_vectors.tolist(),
        "ref_values": cb.ref_values.tolist(),
        "points": points,
        "diagnostics": cb.diagnostics,
    }


def collocated_from_dict(doc: dict) -> CollocatedEigenbasis:
    if doc.get("format") != FORMAT_NAME:
        raise ConfigError("not a collocated-eigenbasis document")
    if doc.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported document version {doc.get('version')!r}")
    family = family_from_dict(doc["family"])
    if doc.get("family_hash") != family_hash(family):
        raise ConfigError("family hash mismatch: document is inconsistent")
    A = MultiIndexSet.from_json_list(doc["A"])
    point_data = {}
    for rec in doc["points"]:
        pt = tuple(float(v) for v in rec["y"])
        point_data[pt] = PointSolution(
            basis=EigenspaceBasis(
                vectors=np.asarray(rec["vectors"], dtype=float),
                gram_sigma_min=float(rec["gram_sigma_min"]),
            ),
            cluster_values=np.asarray(rec["cluster_values"], dtype=float),
        )
    return CollocatedEigenbasis(
        family=family,
        cluster=ClusterSelection(tuple(doc["J"])),
        A=A,
        terms=tuple(combination_terms(A)),
        point_data=point_data,
        ref_vectors=np.asarray(doc["ref_vectors"], dtype=float),
        ref_values=np.asarray(doc["ref_values"], dtype=float),
        target=doc.get("target", "canonical"),
        diagnostics=dict(doc.get("diagnostics", {})),
    )


def save_collocated(cb: CollocatedEigenbasis, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(collocated_to_dict(cb), fh)


def load_collocated(path) -> CollocatedEigenbasis:
    with open(path, "r", encoding="utf-8") as fh:
        return collocated_from_dict(json.load(fh))
