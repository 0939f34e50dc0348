"""Convergence-study harness: configs, error estimation, CSV/JSON reporting.

A study sweeps a schedule of budgets; per budget it builds the anisotropic
index set, collocates, and estimates the interpolation error by Monte Carlo
against direct solves.  The same seed is reused across budgets (common random
numbers), so error columns are comparable between rows.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .collocation import CollocatedEigenbasis, collocate, evaluate
from .eigensolver import solve_gevp
from .eigenspace import _as_cluster, canonical_basis
from .errors import (
    ConfigError,
    DegenerateBasisError,
    SolverError,
    StageError,
)
from .families import (
    AffineOperatorFamily,
    DecaySequence,
    assemble_at,
    designed_crossing_family,
    load_family,
    model_diffusion_1d,
    model_diffusion_2d,
)
from .sparse_grid import anisotropic_set, is_monotone, point_count_bound

logger = logging.getLogger("eigcolloc")

METRICS = ("vector-l2", "subspace-angle")
MODELS = ("diffusion1d", "diffusion2d", "synthetic-file", "builtin-crossing")


def compute_tau_weights(kappa: DecaySequence, delta: float, epsilon: float) -> list[float]:
    """Per-dimension radii rho_m derived from the analyticity widths tau_m.

    tau_m = (1-eps)(1-|kappa|_1) kappa_m^(p-1) / (2 |kappa|_p (1 + 1/delta)),
    rho_m = tau_m + sqrt(1 + tau_m^2); always > 1, growing with m when p < 1.
    """
    if not 0.0 < epsilon < 1.0:
        raise ConfigError("epsilon must lie in (0, 1)")
    if delta <= 0.0:
        raise ConfigError("delta must be positive")
    p = kappa.p_exponent
    if not kappa.kappa:
        return []
    norm1 = kappa.total
    normp = kappa.lp_norm()
    scale = (1.0 - epsilon) * (1.0 - norm1) / (2.0 * normp * (1.0 + 1.0 / delta))
    out = []
    for km in kappa.kappa:
        tau = scale * km ** (p - 1.0)
        out.append(tau + math.sqrt(1.0 + tau * tau))
    return out


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyConfig:
    """Validated study description; see ``from_dict`` for the JSON layout."""

    model: str
    model_params: dict
    cluster: tuple[int, ...]
    budgets: tuple[float, ...]
    metric: str = "vector-l2"
    n_mc: int = 200
    seed: int = 0
    threads: int = 1
    target: str = "canonical"
    delta_requested: float | None = None
    weights_mode: str = "tau"
    epsilon: float = 0.5
    weights_delta: float | None = None
    rho_explicit: tuple[float, ...] = ()

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if not self.budgets:
            raise ConfigError("budget schedule must not be empty")
        if any(b <= a for a, b in zip(self.budgets, self.budgets[1:])):
            raise ConfigError("budgets must be strictly increasing")
        if self.n_mc < 1:
            raise ConfigError("n_mc must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.weights_mode not in ("tau", "explicit"):
            raise ConfigError(f"unknown weights mode {self.weights_mode!r}")
        _as_cluster(self.cluster)  # validates index layout

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyConfig":
        known = {
            "model", "model_params", "cluster", "budgets", "metric", "n_mc",
            "seed", "threads", "target", "delta_requested", "weights",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            model = doc["model"]
            cluster = tuple(int(j) for j in doc["cluster"])
            budgets = tuple(float(b) for b in doc["budgets"])
        except KeyError as exc:
            raise ConfigError(f"missing config key: {exc}") from exc
        weights = doc.get("weights", {"mode": "tau"})
        mode = weights.get("mode", "tau")
        return cls(
            model=model,
            model_params=dict(doc.get("model_params", {})),
            cluster=cluster,
            budgets=budgets,
            metric=doc.get("metric", "vector-l2"),
            n_mc=int(doc.get("n_mc", 200)),
            seed=int(doc.get("seed", 0)),
            threads=int(doc.get("threads", 1)),
            target=doc.get("target", "canonical"),
            delta_requested=(
                None if doc.get("delta_requested") is None
                else float(doc["delta_requested"])
            ),
            weights_mode=mode,
            epsilon=float(weights.get("epsilon", 0.5)),
            weights_delta=(
                None if weights.get("delta") is None else float(weights["delta"])
            ),
            rho_explicit=tuple(float(r) for r in weights.get("rho", ())),
        )

    def to_dict(self) -> dict:
        weights: dict = {"mode": self.weights_mode}
        if self.weights_mode == "tau":
            weights["epsilon"] = self.epsilon
            if self.weights_delta is not None:
                weights["delta"] = self.weights_delta
        else:
            weights["rho"] = list(self.rho_explicit)
        return {
            "model": self.model,
            "model_params": dict(self.model_params),
            "cluster": list(self.cluster),
            "budgets": list(self.budgets),
            "metric": self.metric,
            "n_mc": self.n_mc,
            "seed": self.seed,
            "threads": self.threads,
            "target": self.target,
            "delta_requested": self.delta_requested,
            "weights": weights,
        }


def load_config(path) -> StudyConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return StudyConfig.from_dict(json.load(fh))


def build_family(config: StudyConfig) -> AffineOperatorFamily:
    p = config.model_params
    if config.model == "diffusion1d":
        return model_diffusion_1d(
            n_elements=int(p.get("n_elements", 100)),
            decay_scale=float(p.get("decay_scale", 0.0)),
            decay_rate=float(p.get("decay_rate", 2.0)),
            n_terms=int(p.get("n_terms", 0)),
            p_exponent=float(p.get("p_exponent", 1.0)),
        )
    if config.model == "diffusion2d":
        return model_diffusion_2d(
            n_per_side=int(p.get("n_per_side", 16)),
            decay_scale=float(p.get("decay_scale", 0.0)),
            decay_rate=float(p.get("decay_rate", 2.0)),
            n_terms=int(p.get("n_terms", 0)),
            p_exponent=float(p.get("p_exponent", 1.0)),
        )
    if config.model == "synthetic-file":
        path = p.get("family_file")
        if not path:
            raise ConfigError("synthetic-file model needs model_params.family_file")
        return load_family(path)
    return designed_crossing_family()


def resolve_weights(config: StudyConfig, family: AffineOperatorFamily) -> list[float]:
    """Anisotropy radii for the index sets, from tau formula or explicit list."""
    if config.weights_mode == "explicit":
        rho = list(config.rho_explicit)
        if len(rho) > family.n_terms:
            raise ConfigError(
                f"{len(rho)} explicit weights for a {family.n_terms}-term family"
            )
        return rho
    delta = config.weights_delta
    if delta is None:
        raise ConfigError("weights mode 'tau' needs weights.delta")
    return compute_tau_weights(family.kappa, delta, config.epsilon)


# ---------------------------------------------------------------------------
# Monte Carlo error estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorEstimate:
    value: float
    n_samples: int
    n_failures: int


def _largest_angle(X: np.ndarray, Y: np.ndarray, LT: np.ndarray, S: int) -> float:
    # largest principal angle between span(X) and span(Y) in the mass inner
    # product; a rank-collapsed span counts as fully turned away
    QX = scipy.linalg.orth(LT @ X)
    QY = scipy.linalg.orth(LT @ Y)
    if QX.shape[1] < S or QY.shape[1] < S:
        return math.pi / 2.0
    C = QX.T @ QY
    sin_max = np.linalg.svd(QY - QX @ C, compute_uv=False)[0]
    if sin_max < math.sqrt(0.5):
        return float(np.arcsin(np.clip(sin_max, 0.0, 1.0)))
    cos_min = np.linalg.svd(C, compute_uv=False)[-1]
    return float(np.arccos(np.clip(cos_min, -1.0, 1.0)))


def estimate_error(
    cb: CollocatedEigenbasis, metric: str, n_mc: int, seed: int
) -> ErrorEstimate:
    """Root-mean-square interpolation error over seeded uniform samples.

    Each sample gets a direct eigensolve; the reference is the projected basis
    built from the same origin vectors as the interpolant, so both sides target
    the identical object.  Metric 'vector-l2' sums squared energy norms of the
    columnwise differences; 'subspace-angle' uses the largest principal angle
    between the interpolated and the true cluster span.

    Samples whose direct solve or reference construction fails are skipped and
    counted; more than 10% failures aborts.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    family = cb.family
    rng = np.random.default_rng(seed)
    LT = np.linalg.cholesky(family.mass).T
    total = 0.0
    used = 0
    failures = 0
    for _ in range(int(n_mc)):
        y = rng.uniform(-1.0, 1.0, size=family.n_terms)
        try:
            decomp = solve_gevp(assemble_at(family, y), family.mass, k=cb.cluster.hi)
            truth = canonical_basis(decomp, cb.ref_vectors, cb.cluster, family.mass)
        except (SolverError, DegenerateBasisError):
            failures += 1
            continue
        approx = evaluate(cb, y)
        if metric == "vector-l2":
            diff = approx - truth.vectors
            total += float(np.sum(diff * (family.B0 @ diff)))
        else:
            angle = _largest_angle(approx, truth.vectors, LT, cb.cluster.S)
            total += angle * angle
        used += 1
    if failures > 0.1 * n_mc:
        raise SolverError(
            f"{failures} of {n_mc} direct solves failed during error estimation"
        )
    value = math.sqrt(total / used) if used else math.nan
    return ErrorEstimate(value=value, n_samples=used, n_failures=failures)


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorRecord:
    budget: float
    card_A: int
    card_X: int
    error: float
    seconds: float


@dataclass(frozen=True)
class StudyResult:
    records: tuple
    r_hat: float | None
    r_hat_reason: str | None
    csv_path: str | None
    summary_path: str | None
    diagnostics: tuple = field(default_factory=tuple)


def fit_rate(card_A, errors) -> tuple[float | None, str | None]:
    """Least-squares slope of log(error) against log(#A); sign flipped.

    Returns (rate, None) or (None, reason) when the data cannot support a fit:
    fewer than two budgets, repeated set sizes, or errors at solver noise.
    """
    if len(card_A) < 2:
        return None, "need at least two budgets to fit a rate"
    if any(not (e > 0.0) for e in errors):
        return None, "nonpositive error values"
    if min(errors) < 1e-13:
        return None, "errors at solver-noise level, fit is meaningless"
    if len(set(card_A)) < 2:
        return None, "identical set sizes across budgets"
    slope = np.polyfit(np.log(np.asarray(card_A, dtype=float)), np.log(errors), 1)[0]
    return float(-slope), None


def _csv_cell(x) -> str:
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_csv_cell(v) for v in row) + "\n")


def _stage(name: str, budget_index: int | None = None):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if isinstance(exc, Exception) and not isinstance(exc, StageError):
                raise StageError(name, budget_index, str(exc)) from exc
            return False

    return _Ctx()


def run_convergence_study(
    config: StudyConfig, out_dir=None, csv_name: str = "study.csv"
) -> StudyResult:
    """Sweep the budget schedule, estimate errors, fit the rate, write outputs.

    Writes ``csv_name`` (columns L,card_A,card_X,error,seconds) and
    ``study.json`` (config echo, per-budget diagnostics, fitted rate) when
    ``out_dir`` is given.
    """
    with _stage("model"):
        family = build_family(config)
    with _stage("weights"):
        rho = resolve_weights(config, family)
    records = []
    diagnostics = []
    for i, L in enumerate(config.budgets):
        t0 = time.perf_counter()
        with _stage("index-set", i):
            A = anisotropic_set(rho, L)
            card_X_bound = point_count_bound(A) if is_monotone(A) else None
        with _stage("collocate", i):
            cb = collocate(
                family,
                config.cluster,
                A,
                target=config.target,
                n_threads=config.threads,
            )
        with _stage("estimate", i):
            est = estimate_error(cb, config.metric, config.n_mc, config.seed)
        seconds = time.perf_counter() - t0
        card_A = len(A)
        card_X = len(cb.point_data)
        if card_X > card_A * card_A:
            raise StageError(
                "index-set", i, f"grid size {card_X} exceeds (#A)^2 = {card_A * card_A}"
            )
        records.append(
            ErrorRecord(
                budget=float(L),
                card_A=card_A,
                card_X=card_X,
                error=est.value,
                seconds=seconds,
            )
        )
        diagnostics.append(
            {
                "budget": float(L),
                "card_X_formula": card_X_bound,
                "mc_failures": est.n_failures,
                **cb.diagnostics,
            }
        )
        logger.info(
            "budget %g: #A=%d #X=%d error=%.6e (%.2fs)",
            L, card_A, card_X, est.value, seconds,
        )
    r_hat, reason = fit_rate(
        [r.card_A for r in records], [r.error for r in records]
    )
    csv_path = summary_path = None
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, csv_name)
        _write_csv(
            csv_path,
            ["L", "card_A", "card_X", "error", "seconds"],
            [
                [r.budget, r.card_A, r.card_X, r.error, r.seconds]
                for r in records
            ],
        )
        summary_path = os.path.join(out_dir, "study.json")
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "config": config.to_dict(),
                    "records": [r.__dict__ for r in records],
                    "r_hat": r_hat,
                    "r_hat_reason": reason,
                    "diagnostics": diagnostics,
                },
                fh,
                indent=2,
            )
    return StudyResult(
        records=tuple(records),
        r_hat=r_hat,
        r_hat_reason=reason,
        csv_path=csv_path,
        summary_path=summary_path,
        diagnostics=tuple(diagnostics),
    )


@dataclass(frozen=True)
class CrossingRecord:
    budget: float
    card_A: int
    card_X: int
    error_canonical: float
    error_raw: float
    seconds: float


@dataclass(frozen=True)
class CrossingResult:
    records: tuple
    final_ratio: float | None
    csv_path: str | None
    summary_path: str | None


def run_crossing_demo(
    config: StudyConfig, out_dir=None, csv_name: str = "crossing.csv"
) -> CrossingResult:
    """Interpolate the same cluster twice per budget: projected basis vs raw.

    Raw means individually sorted eigenvectors, which jump at eigenvalue
    crossings inside the cluster; the projected basis does not.  Both error
    columns use the same metric, samples, and seed, so rows are comparable.
    """
    with _stage("model"):
        family = build_family(config)
    with _stage("weights"):
        rho = resolve_weights(config, family)
    records = []
    for i, L in enumerate(config.budgets):
        t0 = time.perf_counter()
        with _stage("index-set", i):
            A = anisotropic_set(rho, L)
        errs = {}
        for target in ("canonical", "raw"):
            with _stage(f"collocate-{target}", i):
                cb = collocate(
                    family, config.cluster, A,
                    target=target, n_threads=config.threads,
                )
            with _stage(f"estimate-{target}", i):
                errs[target] = estimate_error(
                    cb, config.metric, config.n_mc, config.seed
                ).value
        seconds = time.perf_counter() - t0
        records.append(
            CrossingRecord(
                budget=float(L),
                card_A=len(A),
                card_X=len(cb.point_data),
                error_canonical=errs["canonical"],
                error_raw=errs["raw"],
                seconds=seconds,
            )
        )
        logger.info(
            "budget %g: #A=%d canonical=%.3e raw=%.3e",
            L, len(A), errs["canonical"], errs["raw"],
        )
    last = records[-1]
    ratio = (
        last.error_raw / last.error_canonical
        if last.error_canonical > 0
        else None
    )
    csv_path = summary_path = None
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, csv_name)
        _write_csv(
            csv_path,
            ["L", "card_A", "card_X", "error_canonical", "error_raw", "seconds"],
            [
                [r.budget, r.card_A, r.card_X, r.error_canonical, r.error_raw, r.seconds]
                for r in records
            ],
        )
        summary_path = os.path.join(out_dir, "crossing.json")
        with open(summary_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "config": config.to_dict(),
                    "records": [r.__dict__ for r in records],
                    "final_error_ratio_raw_over_canonical": ratio,
                },
                fh,
                indent=2,
            )
    return CrossingResult(
        records=tuple(records),
        final_ratio=ratio,
        csv_path=csv_path,
        summary_path=summary_path,
    )
