"""Parameter calibration and origin-split cross-validation.

The scale parameter beta of a one-parameter model is fit by maximizing CPC
between observed flows and the model's flows, with observed per-origin
outflows used as production totals so the destination distribution is
judged independently of the production coefficient.  The production
coefficient alpha is the zero-intercept least-squares slope of outflow
against origin population.  Cross-validation splits on origin zones: every
flow leaving a test origin is held out together.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import InsufficientDataError, InsufficientVariationError
from .matrix import MigrationMatrix
from .metrics import MetricsReport, compute_metrics
from .migration import (KIND_NEURAL, KIND_RADIATION, ModelSpec, ProductionFunction,
                        model_weights, normalize_row, produce_flows, train_neural)
from .mlp import NeuralConfig, NeuralWeights
from .zones import ZoneGraph

log = logging.getLogger(__name__)

BETA_SEARCH_RANGE = (1e-3, 10.0)
# gravity with exponential decay calibrates to tiny betas; search that kind on a log scale
BETA_SEARCH_RANGE_GRAVITY_EXP = (1e-5, 10.0)
BETA_SEARCH_TOL = 1e-3
_GRID_POINTS = 41
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

# The IRS county-flow series changed reporting methodology between the 2010
# and 2011 deliveries; year-over-year comparisons across that seam are skipped.
DEFAULT_METHOD_BREAKS = ((2010, 2011),)


def matrix_from_flows(flows: pd.DataFrame, graph: ZoneGraph,
                      year: int | None = None) -> MigrationMatrix:
    """Aggregate flow rows into a matrix over the graph's full registry.

    Rows whose origin equals their destination carry no between-zone signal
    and are dropped with a warning.
    """
    df = flows if year is None else flows[flows["year"] == year]
    self_rows = df["origin_id"] == df["dest_id"]
    if self_rows.any():
        log.warning("dropping %d self-flow row(s) (origin == destination)", int(self_rows.sum()))
        df = df[~self_rows]
    for col in ("origin_id", "dest_id"):
        unknown = set(df[col]) - set(graph.ids)
        if unknown:
            raise InsufficientDataError(f"flow {col} values not in zone table: {sorted(unknown)[:10]}")
    return MigrationMatrix.from_entries(
        graph.ids, graph.ids, df["origin_id"].to_numpy(), df["dest_id"].to_numpy(),
        df["migrants"].to_numpy(dtype=float))


def per_year_matrices(flows: pd.DataFrame, graph: ZoneGraph) -> dict[int, MigrationMatrix]:
    return {int(y): matrix_from_flows(flows, graph, year=int(y))
            for y in sorted(flows["year"].unique())}


# ---------------------------------------------------------------------------
# beta


class _BetaObjective:
    """CPC between observed flows and model flows as a function of beta.

    Feature blocks are computed once; each evaluation only re-runs the
    destination kernel and normalization.
    """

    def __init__(self, train: MigrationMatrix, graph: ZoneGraph, kind: str):
        if tuple(train.dest_ids) != tuple(graph.ids):
            raise ValueError("training matrix destinations must cover the zone graph")
        outflows = train.row_sums()
        active = np.flatnonzero(outflows > 0.0)
        if len(active) == 0:
            raise InsufficientDataError("no origin with positive outflow to fit beta")
        self.kind = kind
        self.outflows = outflows[active]
        self.observed = train.sparse()[active, :].toarray()
        self.observed_total = float(self.observed.sum())
        rows = []
        for a in active:
            zone = graph.zones[graph.index_of(train.origin_ids[a])]
            d, s, self_pos = graph.origin_features(zone)
            eligible = np.ones(len(graph), dtype=bool)
            if self_pos is not None:
                eligible[self_pos] = False
            rows.append((zone.population, d, s, eligible))
        self.rows = rows
        self.dest_pop = graph.populations

    def __call__(self, beta: float) -> float:
        common = 0.0
        for outflow, observed, (m_i, d, s, eligible) in zip(self.outflows, self.observed, self.rows):
            spec = ModelSpec(kind=self.kind, beta=beta)
            w = model_weights(spec, m_i, self.dest_pop[eligible], d[eligible], s[eligible])
            predicted = outflow * normalize_row(w)
            common += np.minimum(observed[eligible], predicted).sum()
        # model totals equal observed totals by construction
        return float(2.0 * common / (2.0 * self.observed_total))


def fit_beta(train: MigrationMatrix, graph: ZoneGraph, kind: str, *,
             tol: float = BETA_SEARCH_TOL) -> float:
    """Maximize CPC over beta with a coarse grid plus golden-section refinement.

    Deterministic for fixed inputs.  A flat objective (no model discrimination
    in the data) returns the midpoint of the search range with a warning.
    """
    if kind in (KIND_RADIATION, KIND_NEURAL):
        raise ValueError(f"model kind {kind!r} has no beta parameter to fit")
    objective = _BetaObjective(train, graph, kind)
    log_scale = kind == "gravity_exp"
    lo, hi = BETA_SEARCH_RANGE_GRAVITY_EXP if log_scale else BETA_SEARCH_RANGE

    if log_scale:
        to_beta, from_beta = np.exp, np.log
    else:
        to_beta = from_beta = lambda x: x
    grid = np.linspace(from_beta(lo), from_beta(hi), _GRID_POINTS)
    scores = np.array([objective(float(to_beta(u))) for u in grid])
    if scores.max() - scores.min() < 1e-12:
        midpoint = float(to_beta(0.5 * (grid[0] + grid[-1])))
        log.warning("CPC objective is flat over beta in [%g, %g]; returning midpoint %g",
                    lo, hi, midpoint)
        return midpoint

    best = int(scores.argmax())
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    # golden-section maximization inside the bracketing interval
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = objective(float(to_beta(x1)))
    f2 = objective(float(to_beta(x2)))
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = objective(float(to_beta(x2)))
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = objective(float(to_beta(x1)))
    return float(to_beta(0.5 * (a + b)))


# ---------------------------------------------------------------------------
# alpha


def fit_alpha(train: MigrationMatrix, graph: ZoneGraph) -> float:
    """Zero-intercept least-squares slope of origin outflow on origin population.

    alpha is a pure migration fraction, so the fit is forced through the
    origin: alpha = sum(m_i * outflow_i) / sum(m_i^2).
    """
    pops = np.array([graph.populations[graph.index_of(z)] for z in train.origin_ids])
    if len(pops) < 2 or np.unique(pops).size < 2:
        raise InsufficientVariationError(
            "fitting alpha needs >= 2 origins with distinct populations")
    outflows = train.row_sums()
    denom = float((pops * pops).sum())
    if denom == 0.0:
        raise InsufficientVariationError("all origin populations are zero")
    return float((pops * outflows).sum() / denom)


# ---------------------------------------------------------------------------
# hurricane-anomaly origin filter


def detect_anomalous_origins(flows: pd.DataFrame, graph: ZoneGraph, *,
                             ratio: float = 2.0, min_outflow: float = 1000.0,
                             method_breaks=DEFAULT_METHOD_BREAKS) -> list[str]:
    """Coastal origins whose outgoing migration spikes year over year.

    An origin is flagged when, between two consecutive years, its total
    outflow more than doubles (``ratio``) while the spike-year total exceeds
    ``min_outflow`` migrants.  Year pairs listed in ``method_breaks`` are
    reporting-methodology seams and are never compared.  Jumps from a
    zero-outflow year are ignored (no well-defined percent increase).
    """
    breaks = set(tuple(p) for p in method_breaks)
    totals = flows.groupby(["origin_id", "year"])["migrants"].sum()
    flagged = set()
    for origin_id, series in totals.groupby(level=0):
        if origin_id not in graph.ids or not graph.zones[graph.index_of(origin_id)].coastal:
            continue
        by_year = series.droplevel(0)
        for year in sorted(by_year.index):
            nxt = year + 1
            if nxt not in by_year.index or (year, nxt) in breaks:
                continue
            prev, cur = float(by_year[year]), float(by_year[nxt])
            if prev > 0.0 and cur > ratio * prev and cur > min_outflow:
                flagged.add(origin_id)
    return sorted(flagged)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class CVPlan:
    """Origin-split cross-validation layout."""

    mode: str = "kfold"  # "kfold" or "loo"
    k: int = 5
    seed: int = 42

    def __post_init__(self):
        if self.mode not in ("kfold", "loo"):
            raise ValueError(f"unknown cross-validation mode {self.mode!r}")
        if self.mode == "kfold" and self.k < 2:
            raise ValueError("k-fold cross-validation needs k >= 2")


@dataclass
class CVSample:
    """Fit and score for one (fold, year) cell."""

    fold: int
    year: int
    test_origins: list[str]
    beta: float | None
    alpha: float
    metrics: MetricsReport


@dataclass
class CVResult:
    kind: str
    plan: CVPlan
    folds: list[list[str]]
    samples: list[CVSample]
    skipped: list[str]
    # aggregation order is ambiguous in principle, so both are reported:
    # over all (fold, year) samples, and over per-fold year-averages
    aggregate_by_sample: dict[str, dict[str, float]] = field(default_factory=dict)
    aggregate_by_fold: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": self.kind,
            "mode": self.plan.mode,
            "k": self.plan.k,
            "seed": self.plan.seed,
            "folds": self.folds,
            "samples": [
                {"fold": s.fold, "year": s.year, "test_origins": s.test_origins,
                 "beta": s.beta, "alpha": s.alpha, **s.metrics.to_dict()}
                for s in self.samples
            ],
            "skipped": self.skipped,
            "aggregate_by_sample": self.aggregate_by_sample,
            "aggregate_by_fold": self.aggregate_by_fold,
        }


_METRIC_FIELDS = ("cpc", "cpc_d", "mae", "r2", "incoming_mae", "incoming_r2")


def _mean_std(values) -> dict[str, float]:
    arr = np.array([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return {"mean": float("nan"), "std": float("nan")}
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "std": std}


def _aggregate(records: list[dict]) -> dict[str, dict[str, float]]:
    keys = ("beta", "alpha", *_METRIC_FIELDS)
    return {key: _mean_std([r.get(key) for r in records]) for key in keys}


def make_folds(origins: list[str], plan: CVPlan) -> list[list[str]]:
    """Partition origin ids into folds; deterministic for a fixed seed."""
    origins = sorted(origins)
    if plan.mode == "loo":
        return [[o] for o in origins]
    if len(origins) < plan.k:
        raise InsufficientDataError(
            f"{len(origins)} origin(s) cannot support {plan.k}-fold cross-validation")
    rng = np.random.default_rng(plan.seed)
    shuffled = [origins[i] for i in rng.permutation(len(origins))]
    return [list(chunk) for chunk in np.array_split(shuffled, plan.k)]


def _fit_fold(kind: str, train: MigrationMatrix, graph: ZoneGraph,
              neural_config: NeuralConfig | None):
    """(beta, alpha, spec) fitted on a fold-year's training rows only."""
    alpha = fit_alpha(train, graph)
    if alpha > 1.0:
        log.warning("fitted alpha %.4f exceeds 1; clamping to 1 for prediction", alpha)
    beta = None
    if kind == KIND_NEURAL:
        weights = _train_fold_network(train, graph, neural_config)
        spec = ModelSpec(kind=KIND_NEURAL, weights=weights)
    elif kind == KIND_RADIATION:
        spec = ModelSpec(kind=KIND_RADIATION)
    else:
        beta = fit_beta(train, graph, kind)
        spec = ModelSpec(kind=kind, beta=beta)
    return beta, alpha, spec


def _train_fold_network(train: MigrationMatrix, graph: ZoneGraph,
                        config: NeuralConfig | None) -> NeuralWeights:
    features, flows, labels = [], [], []
    outflows = train.row_sums()
    for i, origin_id in enumerate(train.origin_ids):
        if outflows[i] <= 0.0:
            continue
        zone = graph.zones[graph.index_of(origin_id)]
        d, s, self_pos = graph.origin_features(zone)
        eligible = np.ones(len(graph), dtype=bool)
        if self_pos is not None:
            eligible[self_pos] = False
        observed = np.asarray(train.sparse()[i, :].todense()).ravel()
        features.append(np.column_stack([
            np.full(eligible.sum(), zone.population), graph.populations[eligible],
            d[eligible], s[eligible]]))
        flows.append(observed[eligible])
        labels.append(np.full(eligible.sum(), i))
    return train_neural(np.vstack(features), np.concatenate(flows),
                        np.concatenate(labels), config)


def cross_validate(flows: pd.DataFrame, graph: ZoneGraph, kind: str, plan: CVPlan, *,
                   neural_config: NeuralConfig | None = None,
                   threads: int = 1) -> CVResult:
    """Origin-split cross-validation of one model kind over a flow history.

    For every fold and every year, parameters are fitted on the training
    origins' rows of that year and all six metrics are evaluated on the test
    origins' rows.  Fold-years with no training or no test flows are skipped
    with a warning.  Fitted alphas above 1 are clamped for prediction (a zone
    cannot send more migrants than its population).
    """
    origins = sorted(set(flows["origin_id"]))
    if not origins:
        raise InsufficientDataError("flow table contains no origins")
    folds = make_folds(origins, plan)
    matrices = per_year_matrices(flows, graph)

    samples: list[CVSample] = []
    skipped: list[str] = []
    for fold_idx, test_ids in enumerate(folds):
        train_ids = [o for o in origins if o not in set(test_ids)]
        for year, full in matrices.items():
            train = full.restrict_rows(train_ids)
            test = full.restrict_rows(test_ids)
            if train.total() == 0.0 or test.total() == 0.0:
                reason = "training" if train.total() == 0.0 else "test"
                log.warning("skipping fold %d year %d: no %s flows", fold_idx, year, reason)
                skipped.append(f"fold {fold_idx} year {year}: no {reason} flows")
                continue
            beta, alpha, spec = _fit_fold(kind, train, graph, neural_config)
            production = ProductionFunction.standard(min(alpha, 1.0))
            test_zones = [graph.zones[graph.index_of(z)] for z in test_ids]
            predicted = produce_flows(test_zones, graph, spec, production, threads=threads)
            report = compute_metrics(test, predicted, graph)
            samples.append(CVSample(fold=fold_idx, year=year, test_origins=list(test_ids),
                                    beta=beta, alpha=alpha, metrics=report))

    records = [{"beta": s.beta, "alpha": s.alpha, **s.metrics.to_dict()} for s in samples]
    by_fold_records = []
    for fold_idx in range(len(folds)):
        fold_records = [r for s, r in zip(samples, records) if s.fold == fold_idx]
        if fold_records:
            by_fold_records.append({
                key: float(np.mean([r[key] for r in fold_records if r.get(key) is not None]))
                for key in ("beta", "alpha", *_METRIC_FIELDS)
                if any(r.get(key) is not None for r in fold_records)})
    return CVResult(kind=kind, plan=plan, folds=folds, samples=samples, skipped=skipped,
                    aggregate_by_sample=_aggregate(records),
                    aggregate_by_fold=_aggregate(by_fold_records))
