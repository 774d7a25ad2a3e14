"""Flow-matrix goodness-of-fit metrics.

All comparisons require the two matrices to share registries; cell-wise
metrics run over every ordered pair whose origin and destination ids differ
(self pairs are structurally zero and uninformative).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedMetricError
from .matrix import MigrationMatrix
from .slr import county_of_part
from .zones import ZoneGraph

CPC_DISTANCE_BIN_KM = 2.0


def _check_pair(t: MigrationMatrix, t_hat: MigrationMatrix) -> None:
    if not t.same_registries(t_hat):
        raise ValueError("matrices must share origin and destination registries")


def cpc(t: MigrationMatrix, t_hat: MigrationMatrix) -> float:
    """Common Part of Commuters: 2*sum(min) / (sum(T) + sum(T_hat)).

    1 when the matrices agree cell for cell, 0 when their supports are
    disjoint; undefined when both matrices are entirely zero.
    """
    _check_pair(t, t_hat)
    total = t.total() + t_hat.total()
    if total == 0.0:
        raise UndefinedMetricError("CPC is undefined when both matrices are all-zero")
    common = t.sparse().minimum(t_hat.sparse()).sum()
    return float(2.0 * common / total)


def _distance_histogram(t: MigrationMatrix, coords: dict[str, tuple[float, float]],
                        bin_km: float) -> np.ndarray:
    from .zones import haversine_km

    coo = t.sparse().tocoo()
    if coo.nnz == 0:
        return np.zeros(1)
    o_ids = np.array(t.origin_ids, dtype=object)[coo.row]
    d_ids = np.array(t.dest_ids, dtype=object)[coo.col]
    lat1 = np.array([coords[z][0] for z in o_ids])
    lon1 = np.array([coords[z][1] for z in o_ids])
    lat2 = np.array([coords[z][0] for z in d_ids])
    lon2 = np.array([coords[z][1] for z in d_ids])
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    h = (np.sin((phi2 - phi1) / 2.0) ** 2
         + np.cos(phi1) * np.cos(phi2) * np.sin(np.radians(lon2 - lon1) / 2.0) ** 2)
    from .zones import EARTH_RADIUS_KM
    d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))
    bins = (d // bin_km).astype(np.int64)
    return np.bincount(bins, weights=coo.data)


def _coords_for(t: MigrationMatrix, graph: ZoneGraph) -> dict[str, tuple[float, float]]:
    """Coordinates per registry id; part ids resolve to their county centroid."""
    coords = {}
    for zid in set(t.origin_ids) | set(t.dest_ids):
        county = county_of_part(zid)
        try:
            i = graph.index_of(county)
        except KeyError:
            raise ValueError(f"no zone coordinates available for id {zid!r}") from None
        coords[zid] = (graph.lats[i], graph.lons[i])
    return coords


def cpc_distance(t: MigrationMatrix, t_hat: MigrationMatrix, graph: ZoneGraph,
                 bin_km: float = CPC_DISTANCE_BIN_KM) -> float:
    """CPC over trip-length histograms with 2 km bins.

    Bin k collects migrants travelling between 2k-2 (inclusive) and 2k
    (exclusive) kilometers; compares how well trip distances are reproduced
    regardless of which pairs carry them.
    """
    _check_pair(t, t_hat)
    total = t.total() + t_hat.total()
    if total == 0.0:
        raise UndefinedMetricError("CPC_d is undefined when both matrices are all-zero")
    coords = _coords_for(t, graph)
    n = _distance_histogram(t, coords, bin_km)
    n_hat = _distance_histogram(t_hat, coords, bin_km)
    size = max(len(n), len(n_hat))
    n = np.pad(n, (0, size - len(n)))
    n_hat = np.pad(n_hat, (0, size - len(n_hat)))
    return float(2.0 * np.minimum(n, n_hat).sum() / (n.sum() + n_hat.sum()))


def mae(t: MigrationMatrix, t_hat: MigrationMatrix) -> float:
    """Mean absolute difference over all ordered pairs with distinct ids."""
    _check_pair(t, t_hat)
    diff = t.sparse() - t_hat.sparse()
    return float(np.abs(diff.data).sum() / t.n_valid_cells())


def r_squared(t: MigrationMatrix, t_hat: MigrationMatrix) -> float:
    """Coefficient of determination of T_hat against T over all valid cells."""
    _check_pair(t, t_hat)
    n = t.n_valid_cells()
    csr = t.sparse()
    mean = csr.sum() / n
    ss_tot = float(csr.multiply(csr).sum() - n * mean * mean)
    if ss_tot <= 0.0:
        raise UndefinedMetricError("r^2 is undefined when the reference matrix has zero variance")
    diff = csr - t_hat.sparse()
    ss_res = float(diff.multiply(diff).sum())
    return 1.0 - ss_res / ss_tot


def _vector_mae(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.abs(u - v).mean())


def _vector_r_squared(u: np.ndarray, v: np.ndarray) -> float:
    ss_tot = float(((u - u.mean()) ** 2).sum())
    if ss_tot <= 0.0:
        raise UndefinedMetricError("incoming r^2 is undefined when column sums have zero variance")
    return 1.0 - float(((u - v) ** 2).sum()) / ss_tot


def incoming_mae(t: MigrationMatrix, t_hat: MigrationMatrix) -> float:
    """MAE between per-destination incoming-migrant vectors (column sums)."""
    _check_pair(t, t_hat)
    return _vector_mae(t.col_sums(), t_hat.col_sums())


def incoming_r_squared(t: MigrationMatrix, t_hat: MigrationMatrix) -> float:
    """r^2 between per-destination incoming-migrant vectors (column sums)."""
    _check_pair(t, t_hat)
    return _vector_r_squared(t.col_sums(), t_hat.col_sums())


@dataclass
class MetricsReport:
    """Full-matrix metrics plus the incoming-migrants-vector variants."""

    cpc: float
    cpc_d: float | None
    mae: float
    r2: float
    incoming_mae: float
    incoming_r2: float

    def to_dict(self) -> dict:
        return {"cpc": self.cpc, "cpc_d": self.cpc_d, "mae": self.mae, "r2": self.r2,
                "incoming_mae": self.incoming_mae, "incoming_r2": self.incoming_r2}


def compute_metrics(t: MigrationMatrix, t_hat: MigrationMatrix,
                    graph: ZoneGraph | None = None) -> MetricsReport:
    """All six metrics at once; CPC_d needs zone coordinates and is skipped without them."""
    return MetricsReport(
        cpc=cpc(t, t_hat),
        cpc_d=cpc_distance(t, t_hat, graph) if graph is not None else None,
        mae=mae(t, t_hat),
        r2=r_squared(t, t_hat),
        incoming_mae=incoming_mae(t, t_hat),
        incoming_r2=incoming_r_squared(t, t_hat),
    )
