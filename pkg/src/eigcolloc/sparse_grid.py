"""Multi-index sets, Gauss-Legendre nodes, and the sparse combination technique.

Multi-indices are stored sparsely (dimension -> level, 1-based dimensions,
absent means level 0), so sets over a countable parameter sequence stay cheap.
Interpolation grids are unions of tensor Gauss-Legendre grids; node values are
computed once per level and cached, which makes the union deduplication
bit-exact across levels.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    ExtrapolationError,
    MonotonicityError,
    WeightError,
)


@dataclass(frozen=True)
class MultiIndex:
    """Finitely supported map dimension -> positive level (sparse storage)."""

    entries: tuple[tuple[int, int], ...]
    _map: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        norm = tuple(
            sorted((int(m), int(l)) for (m, l) in self.entries if int(l) != 0)
        )
        for m, l in norm:
            if m < 1:
                raise ValueError("dimensions are 1-based")
            if l < 0:
                raise ValueError("levels must be nonnegative")
        if len({m for m, _ in norm}) != len(norm):
            raise ValueError("duplicate dimension in multi-index")
        object.__setattr__(self, "entries", norm)
        object.__setattr__(self, "_map", dict(norm))

    @classmethod
    def from_dense(cls, levels) -> "MultiIndex":
        return cls(tuple((m, l) for m, l in enumerate(levels, start=1)))

    def to_dense(self, M: int) -> tuple[int, ...]:
        return tuple(self.level(m) for m in range(1, M + 1))

    def level(self, m: int) -> int:
        return self._map.get(m, 0)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(m for m, _ in self.entries)

    @property
    def max_dim(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    @property
    def norm1(self) -> int:
        return sum(l for _, l in self.entries)

    def __le__(self, other: "MultiIndex") -> bool:
        return all(l <= other.level(m) for m, l in self.entries)

    def minus_unit(self, m: int) -> "MultiIndex":
        """Decrement dimension m by one (level must be positive there)."""
        l = self.level(m)
        if l < 1:
            raise ValueError(f"dimension {m} has level 0")
        return MultiIndex(tuple((d, v - 1 if d == m else v) for d, v in self.entries))

    def sort_key(self):
        return (self.norm1, self.entries)


ORIGIN = MultiIndex(())


@dataclass(frozen=True)
class MultiIndexSet:
    """Finite set of multi-indices; iteration order is deterministic."""

    indices: frozenset

    def __post_init__(self):
        object.__setattr__(self, "indices", frozenset(self.indices))

    @property
    def M_active(self) -> int:
        """Greatest dimension with a nonzero level anywhere in the set."""
        return max((a.max_dim for a in self.indices), default=0)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, alpha: MultiIndex) -> bool:
        return alpha in self.indices

    def __iter__(self):
        return iter(sorted(self.indices, key=MultiIndex.sort_key))

    def to_json_list(self) -> list:
        return [{str(m): l for m, l in a.entries} for a in self]

    @classmethod
    def from_json_list(cls, doc) -> "MultiIndexSet":
        return cls(
            frozenset(
                MultiIndex(tuple((int(m), int(l)) for m, l in d.items())) for d in doc
            )
        )


def multi_index_set(indices) -> MultiIndexSet:
    return MultiIndexSet(frozenset(indices))


def is_monotone(A: MultiIndexSet) -> bool:
    """True iff the set is downward closed (every unit decrement stays inside)."""
    for alpha in A.indices:
        for m in alpha.support:
            if alpha.minus_unit(m) not in A.indices:
                return False
    return True


def anisotropic_set(weights, budget: float) -> MultiIndexSet:
    """Budget set {alpha : sum_m alpha_m * log(rho_m) <= budget}.

    ``weights`` are per-dimension radii rho_m > 1, so each unit level in
    dimension m costs log(rho_m); the set is monotone by construction.
    """
    logs = []
    for m, rho in enumerate(weights, start=1):
        if not rho > 1.0:
            raise WeightError(f"weight for dimension {m} is {rho:.6g}, must be > 1")
        logs.append(math.log(rho))
    if budget < 0.0:
        raise ConfigError("budget must be nonnegative")
    out = []

    def extend(prefix, m, remaining):
        if m > len(logs):
            out.append(MultiIndex.from_dense(prefix))
            return
        l = 0
        while l * logs[m - 1] <= remaining + 1e-12 * max(1.0, budget):
            extend(prefix + [l], m + 1, remaining - l * logs[m - 1])
            l += 1

    extend([], 1, float(budget))
    return multi_index_set(out)


@dataclass(frozen=True)
class CombinationTerm:
    """Tensor subgrid gamma with its signed integer coefficient."""

    gamma: MultiIndex
    coefficient: int


def combination_terms(A: MultiIndexSet) -> list[CombinationTerm]:
    """Compress the telescoped sparse interpolant into signed tensor terms.

    For each alpha the inner sum runs over the box max(alpha-1, 0) <= gamma <=
    alpha on the support of alpha, with sign (-1)^|alpha-gamma|; equal gammas
    are merged and zero coefficients dropped.
    """
    acc: dict[MultiIndex, int] = {}
    for alpha in A:
        supp = alpha.support
        ranges = [range(max(alpha.level(m) - 1, 0), alpha.level(m) + 1) for m in supp]
        for combo in itertools.product(*ranges):
            gamma = MultiIndex(tuple(zip(supp, combo)))
            sign = -1 if (alpha.norm1 - gamma.norm1) % 2 else 1
            acc[gamma] = acc.get(gamma, 0) + sign
    return [
        CombinationTerm(g, c)
        for g, c in sorted(acc.items(), key=lambda kv: kv[0].sort_key())
        if c != 0
    ]


# ---------------------------------------------------------------------------
# Gauss-Legendre nodes with barycentric weights
# ---------------------------------------------------------------------------

def _legendre_and_prev(n: int, x: float) -> tuple[float, float]:
    # value of P_n and P_{n-1} via the three-term recurrence
    if n == 0:
        return 1.0, 0.0
    pkm1, pk = 1.0, x
    for k in range(2, n + 1):
        pkm1, pk = pk, ((2 * k - 1) * x * pk - (k - 1) * pkm1) / k
    return pk, pkm1


@dataclass(frozen=True)
class NodeSet:
    """Level-p interpolation nodes: the p+1 Legendre zeros, ascending."""

    level: int
    nodes: tuple[float, ...]
    weights: tuple[float, ...] = field(compare=False)

    def __len__(self) -> int:
        return len(self.nodes)

    def basis_all(self, t: float) -> np.ndarray:
        """All Lagrange basis values at t; exact unit vector when t is a node."""
        x = np.asarray(self.nodes)
        for k, xk in enumerate(self.nodes):
            if t == xk:
                e = np.zeros(len(x))
                e[k] = 1.0
                return e
        w = np.asarray(self.weights) / (t - x)
        return w / w.sum()


_NODE_CACHE: dict[int, NodeSet] = {}


def gauss_legendre_nodes(p: int) -> NodeSet:
    """Nodes of level p: all p+1 zeros of the Legendre polynomial of degree p+1.

    Newton iteration on the recurrence, then exact symmetrization so that
    nodes(p) == -reversed(nodes(p)) bit for bit; results are cached per level.
    """
    if p < 0:
        raise ValueError("level must be nonnegative")
    cached = _NODE_CACHE.get(p)
    if cached is not None:
        return cached
    n = p + 1
    roots = []
    for i in range(n):
        x = math.cos(math.pi * (i + 0.75) / (n + 0.5))
        for _ in range(100):
            pn, pnm1 = _legendre_and_prev(n, x)
            dpn = n * (x * pn - pnm1) / (x * x - 1.0)
            dx = -pn / dpn
            x += dx
            if abs(dx) < 1e-15:
                break
        roots.append(x)
    roots.sort()
    for i in range(n // 2):
        j = n - 1 - i
        mag = 0.5 * (roots[j] - roots[i])
        roots[i], roots[j] = -mag, mag
    if n % 2:
        roots[n // 2] = 0.0
    weights = []
    for k in range(n):
        prod = 1.0
        for j in range(n):
            if j != k:
                prod *= roots[k] - roots[j]
        weights.append(1.0 / prod)
    ns = NodeSet(level=p, nodes=tuple(roots), weights=tuple(weights))
    _NODE_CACHE[p] = ns
    return ns


def lagrange_basis_eval(node_set: NodeSet, k: int, t: float) -> float:
    """Value of the k-th Lagrange basis polynomial of the node set at t."""
    if not 0 <= k <= node_set.level:
        raise ValueError(f"basis index {k} out of range for level {node_set.level}")
    return float(node_set.basis_all(t)[k])


# ---------------------------------------------------------------------------
# Collocation grids and combination evaluation
# ---------------------------------------------------------------------------

def _tensor_points(gamma: MultiIndex, M: int):
    axes = [gauss_legendre_nodes(gamma.level(m)).nodes for m in range(1, M + 1)]
    return itertools.product(*axes)


def grid_points(A: MultiIndexSet) -> list[tuple[float, ...]]:
    """The collocation grid X_A: union of the tensor grids of the set.

    For monotone sets the union over inner boxes collapses to the union over
    the set itself.  Points are tuples of length M_active (trailing dimensions
    are implicitly 0) and are deduplicated bit-exactly.
    """
    M = A.M_active
    seen = set()
    if is_monotone(A):
        gammas = list(A)
    else:
        gammas = [t.gamma for t in combination_terms(A)]
    for gamma in gammas:
        seen.update(_tensor_points(gamma, M))
    return sorted(seen)


def point_count_bound(A: MultiIndexSet) -> int:
    """Grid cardinality sum over alpha of prod (alpha_m + 1); monotone sets only.

    The value also satisfies bound <= (#A)^2.  For non-monotone sets the sum
    does not count the union, so they are rejected.
    """
    if not is_monotone(A):
        raise MonotonicityError("grid-size formula requires a downward-closed set")
    total = 0
    for alpha in A.indices:
        prod = 1
        for _, l in alpha.entries:
            prod *= l + 1
        total += prod
    return total


def combination_interpolate(
    terms: list[CombinationTerm],
    M_active: int,
    data,
    y,
) -> np.ndarray:
    """Evaluate the combination-form interpolant at y from nodal data.

    ``data`` maps grid-point tuples (length M_active) to arrays of a common
    shape; the result is the signed sum of tensor-product Lagrange interpolants.
    ``y`` may be longer than M_active (the interpolant is constant in inactive
    dimensions) or shorter (missing coordinates are 0).
    """
    y = list(y)
    if len(y) < M_active:
        y = y + [0.0] * (M_active - len(y))
    for m in range(M_active):
        if not -1.0 <= y[m] <= 1.0:
            raise ExtrapolationError(
                f"coordinate {m + 1} = {y[m]:.6g} lies outside [-1, 1]"
            )
    out = None
    for term in terms:
        axes_nodes = []
        axes_basis = []
        for m in range(1, M_active + 1):
            ns = gauss_legendre_nodes(term.gamma.level(m))
            axes_nodes.append(ns.nodes)
            axes_basis.append(ns.basis_all(y[m - 1]))
        for combo in itertools.product(*[range(len(a)) for a in axes_nodes]):
            coeff = float(term.coefficient)
            for m, k in enumerate(combo):
                coeff *= axes_basis[m][k]
            if coeff == 0.0:
                continue
            point = tuple(axes_nodes[m][k] for m, k in enumerate(combo))
            contrib = coeff * data[point]
            out = contrib if out is None else out + contrib
    if out is None:
        # empty term list never happens for nonempty A; guard for safety
        raise ConfigError("no combination terms to evaluate")
    return out
