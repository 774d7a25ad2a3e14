"""Human-migration model family behind one flow-production interface.

Every model maps pairwise features (origin population, destination
population, distance, intervening opportunities) to a nonnegative
destination weight; weights are normalized per origin into a destination
distribution and scaled by a production function to give migrant flows.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .errors import ModelNotFittedError
from .matrix import MigrationMatrix
from .zones import Zone, ZoneGraph

log = logging.getLogger(__name__)

KIND_RADIATION = "radiation"
KIND_EXT_RADIATION = "ext_radiation"
KIND_GRAVITY_EXP = "gravity_exp"
KIND_GRAVITY_POW = "gravity_pow"
KIND_NEURAL = "neural"
MODEL_KINDS = (KIND_RADIATION, KIND_EXT_RADIATION, KIND_GRAVITY_EXP, KIND_GRAVITY_POW,
               KIND_NEURAL)
_BETA_KINDS = (KIND_EXT_RADIATION, KIND_GRAVITY_EXP, KIND_GRAVITY_POW)

# Default scale parameters used when no calibration data is supplied:
# hurricane-displacement flows are far less distance-bound than routine moves.
DEFAULT_BETA_CLIMATE = 0.13
DEFAULT_BETA_STANDARD = 0.33
DEFAULT_ALPHA_STANDARD = 0.03  # share of a zone's population migrating per year


@dataclass(frozen=True)
class ModelSpec:
    """A concrete migration model choice: kind plus its fitted parameters."""

    kind: str
    beta: float | None = None
    weights: mlp.NeuralWeights | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; choose one of {MODEL_KINDS}")
        if self.kind in _BETA_KINDS:
            if self.beta is None or not self.beta > 0:
                raise ValueError(f"model kind {self.kind!r} requires beta > 0, got {self.beta!r}")
        elif self.beta is not None:
            raise ValueError(f"model kind {self.kind!r} takes no beta parameter")

    def uses_beta(self) -> bool:
        return self.kind in _BETA_KINDS


def default_climate_spec() -> ModelSpec:
    return ModelSpec(kind=KIND_EXT_RADIATION, beta=DEFAULT_BETA_CLIMATE)


def default_standard_spec() -> ModelSpec:
    return ModelSpec(kind=KIND_EXT_RADIATION, beta=DEFAULT_BETA_STANDARD)


@dataclass(frozen=True)
class ProductionFunction:
    """Maps a zone population to its total outgoing migrants.

    ``forced`` production moves everyone (flooded-origin semantics);
    ``standard`` production moves the fraction ``alpha``.
    """

    alpha: float = 1.0
    kind: str = "standard"

    def __post_init__(self):
        if self.kind not in ("standard", "forced"):
            raise ValueError(f"unknown production kind {self.kind!r}")
        if self.kind == "forced" and self.alpha != 1.0:
            raise ValueError("forced production always moves the whole population (alpha = 1)")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside [0, 1]")

    @classmethod
    def forced(cls) -> "ProductionFunction":
        return cls(alpha=1.0, kind="forced")

    @classmethod
    def standard(cls, alpha: float = DEFAULT_ALPHA_STANDARD) -> "ProductionFunction":
        return cls(alpha=alpha, kind="standard")

    def outflow(self, population: float):
        return self.alpha * population


# ---------------------------------------------------------------------------
# destination-weight kernels


def _check_nonnegative(**named):
    for name, value in named.items():
        if np.any(np.asarray(value) < 0):
            raise ValueError(f"{name} must be >= 0")


def _as_result(value, scalar_in: bool):
    return float(value) if scalar_in else value


def ext_radiation_weight(origin_pop, dest_pop, intervening, beta: float):
    """Extended-radiation destination weight.

    With a = origin_pop + intervening and b = dest_pop:

        w = [(a + b)^beta - a^beta] * (origin_pop^beta + 1)
            / ([a^beta + 1] * [(a + b)^beta + 1])

    The bracketed difference is evaluated as a^beta * expm1(beta * log1p(b/a))
    to avoid cancellation when b << a.
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    scalar_in = np.isscalar(origin_pop) and np.isscalar(dest_pop) and np.isscalar(intervening)
    m_i = np.asarray(origin_pop, dtype=float)
    m_j = np.asarray(dest_pop, dtype=float)
    s = np.asarray(intervening, dtype=float)
    _check_nonnegative(origin_pop=m_i, dest_pop=m_j, intervening=s)
    m_i, m_j, s = np.broadcast_arrays(m_i, m_j, s)

    a = m_i + s
    a_pow = a ** beta
    ab_pow = (a + m_j) ** beta
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = np.where(a > 0.0,
                        a_pow * np.expm1(beta * np.log1p(m_j / np.where(a > 0.0, a, 1.0))),
                        m_j ** beta)
    w = diff * (m_i ** beta + 1.0) / ((a_pow + 1.0) * (ab_pow + 1.0))
    return _as_result(w, scalar_in)


def radiation_weight(origin_pop, dest_pop, intervening):
    """Classic parameter-free radiation weight m_i*m_j / ((m_i+s)(m_i+m_j+s)).

    Degenerate all-zero denominators return 0 by convention.
    """
    scalar_in = np.isscalar(origin_pop) and np.isscalar(dest_pop) and np.isscalar(intervening)
    m_i = np.asarray(origin_pop, dtype=float)
    m_j = np.asarray(dest_pop, dtype=float)
    s = np.asarray(intervening, dtype=float)
    _check_nonnegative(origin_pop=m_i, dest_pop=m_j, intervening=s)
    m_i, m_j, s = np.broadcast_arrays(m_i, m_j, s)
    denom = (m_i + s) * (m_i + m_j + s)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(denom > 0.0, m_i * m_j / np.where(denom > 0.0, denom, 1.0), 0.0)
    return _as_result(w, scalar_in)


def gravity_weight(dest_pop, distance_km, beta: float, decay: str = "power"):
    """Singly-constrained gravity weight: dest_pop times a distance deterrent.

    ``decay`` is "exponential" (exp(-beta*d)) or "power" (d^-beta); the power
    form is undefined at zero distance, which callers must exclude or floor.
    """
    if decay not in ("exponential", "power"):
        raise ValueError(f"unknown gravity decay {decay!r}")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    scalar_in = np.isscalar(dest_pop) and np.isscalar(distance_km)
    m_j = np.asarray(dest_pop, dtype=float)
    d = np.asarray(distance_km, dtype=float)
    _check_nonnegative(dest_pop=m_j, distance_km=d)
    m_j, d = np.broadcast_arrays(m_j, d)
    if decay == "exponential":
        w = m_j * np.exp(-beta * d)
    else:
        if np.any(d == 0.0):
            raise ValueError("power-law gravity is undefined at zero distance")
        w = m_j * d ** (-beta)
    return _as_result(w, scalar_in)


def neural_weight(features, weights: mlp.NeuralWeights | None):
    """Trained-regressor destination weight for (m_i, m_j, d_ij, s_ij) rows."""
    if weights is None:
        raise ModelNotFittedError("neural model has no trained weights")
    features = np.asarray(features, dtype=float)
    scalar_in = features.ndim == 1
    out = mlp.forward(weights, np.atleast_2d(features))
    return _as_result(out[0], scalar_in) if scalar_in else out


def model_weights(spec: ModelSpec, origin_pop, dest_pop, distance_km, intervening):
    """Dispatch a feature block to the spec's kernel."""
    if spec.kind == KIND_EXT_RADIATION:
        return ext_radiation_weight(origin_pop, dest_pop, intervening, spec.beta)
    if spec.kind == KIND_RADIATION:
        return radiation_weight(origin_pop, dest_pop, intervening)
    if spec.kind == KIND_GRAVITY_EXP:
        return gravity_weight(dest_pop, distance_km, spec.beta, decay="exponential")
    if spec.kind == KIND_GRAVITY_POW:
        return gravity_weight(dest_pop, distance_km, spec.beta, decay="power")
    if spec.kind == KIND_NEURAL:
        m_i = np.broadcast_to(np.asarray(origin_pop, dtype=float), np.shape(dest_pop))
        feats = np.column_stack([m_i, dest_pop, distance_km, intervening])
        return neural_weight(feats, spec.weights)
    raise AssertionError(f"unreachable model kind {spec.kind!r}")


def normalize_row(weights, context: str = "") -> np.ndarray:
    """Normalize a weight row into a probability distribution.

    An all-zero row falls back to a uniform distribution over its entries so
    migrants are conserved even in pathological cases; the fallback is logged.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be >= 0")
    total = w.sum()
    if total > 0.0:
        return w / total
    log.warning("all destination weights are zero%s; falling back to a uniform distribution",
                f" ({context})" if context else "")
    return np.full(w.shape, 1.0 / w.size)


# ---------------------------------------------------------------------------
# flow production


def produce_flows(origins, dest_graph: ZoneGraph, spec: ModelSpec,
                  production: ProductionFunction, *, distance_floor_km: float = 0.0,
                  threads: int = 1) -> MigrationMatrix:
    """Flow matrix from ``origins`` to every zone of ``dest_graph``.

    A destination sharing an origin's id is that origin itself and is
    excluded; intervening opportunities are summed over the destination
    universe (strictly closer than each destination, endpoints excluded).
    Row i sums to ``production.outflow(m_i)``; zero-outflow origins produce
    zero rows.  ``distance_floor_km`` raises the distance *feature* for
    co-located cross-universe pairs (a county's flooded part and its own
    unflooded part sit on the same centroid).
    """
    origins = list(origins)
    n_d = len(dest_graph)
    out = np.zeros((len(origins), n_d))
    dest_pop = dest_graph.populations

    def fill(i: int) -> None:
        zone = origins[i]
        outflow = production.outflow(zone.population)
        if outflow == 0.0:
            return
        d, s, self_pos = dest_graph.origin_features(zone)
        if distance_floor_km > 0.0:
            d = np.maximum(d, distance_floor_km)
        eligible = np.ones(n_d, dtype=bool)
        if self_pos is not None:
            eligible[self_pos] = False
        if not eligible.any():
            raise ValueError(f"origin {zone.id!r} has no eligible destinations")
        w = model_weights(spec, zone.population, dest_pop[eligible], d[eligible], s[eligible])
        out[i, eligible] = outflow * normalize_row(w, context=f"origin {zone.id!r}")

    indices = range(len(origins))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, indices))
    else:
        for i in indices:
            fill(i)
    return MigrationMatrix.from_dense([z.id for z in origins], dest_graph.ids, out)


def train_neural(features, flows, origin_labels, config: mlp.NeuralConfig | None = None
                 ) -> mlp.NeuralWeights:
    """Fit the neural regressor to observed per-origin destination proportions.

    ``features`` is (n, 4) pairwise rows, ``flows`` the observed migrant count
    per row, and ``origin_labels`` an integer or string label grouping rows by
    origin.  Rows from zero-outflow origins carry no proportion signal and are
    dropped; training with no positive outflow at all is an error.
    """
    config = config or mlp.NeuralConfig()
    features = np.asarray(features, dtype=float)
    flows = np.asarray(flows, dtype=float)
    labels = np.asarray(origin_labels)
    if features.ndim != 2 or features.shape[1] != mlp.N_FEATURES:
        raise ValueError(f"features must be (n, {mlp.N_FEATURES})")
    if not (len(features) == len(flows) == len(labels)):
        raise ValueError("features, flows and origin labels must have equal length")

    outflow = {}
    for lab, f in zip(labels, flows):
        outflow[lab] = outflow.get(lab, 0.0) + f
    keep = np.array([outflow[lab] > 0.0 for lab in labels])
    if not keep.any():
        raise ModelNotFittedError("cannot train on flows that are zero for every origin")
    denom = np.array([outflow[lab] for lab in labels[keep]])
    targets = flows[keep] / denom
    return mlp.train_mlp(features[keep], targets, config)
