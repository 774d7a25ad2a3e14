"""Spatial zone data model and pairwise geometry.

A :class:`ZoneGraph` is an immutable, indexed collection of population
zones (county equivalents).  It answers great-circle distance queries and
"intervening opportunities" queries: the total population strictly closer
to an origin than a given destination.  The full pairwise feature sweep is
the O(n^2) hot path of the engine, so it runs block-vectorized with one
cumulative-population pass per origin over a distance-sorted index.

All strict-inequality comparisons (the open circle) are made against the
vectorized distance rows, so index-based opportunity sums agree bit for
bit with a brute-force scan over the same rows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0088  # IUGG mean Earth radius; used everywhere distances appear

_FEATURE_BLOCK = 256  # origins processed per vectorized sweep block


@dataclass(frozen=True)
class Zone:
    """A county-equivalent population unit with a point location.

    ``population`` is real-valued so that projection and zone-splitting
    arithmetic never needs to round.
    """

    id: str
    name: str
    centroid_lat: float
    centroid_lon: float
    population: float
    coastal: bool = False

    def __post_init__(self):
        if not -90.0 <= self.centroid_lat <= 90.0:
            raise ValueError(f"zone {self.id!r}: latitude {self.centroid_lat} outside [-90, 90]")
        if not -180.0 <= self.centroid_lon <= 180.0:
            raise ValueError(f"zone {self.id!r}: longitude {self.centroid_lon} outside [-180, 180]")
        if not self.population >= 0:
            raise ValueError(f"zone {self.id!r}: population {self.population} must be >= 0")


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometers between two lat/lon points (degrees)."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2) - np.radians(lon1)
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return float(2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(min(h, 1.0))))


@dataclass
class FeatureTable:
    """Pairwise features for all ordered zone pairs i != j.

    Columns are parallel arrays of length n*(n-1): origin index, destination
    index, origin population, destination population, distance in km, and the
    intervening-opportunity population.  Origin i occupies rows
    [i*(n-1), (i+1)*(n-1)) with destinations in index order.
    """

    origin: np.ndarray
    dest: np.ndarray
    origin_pop: np.ndarray
    dest_pop: np.ndarray
    distance_km: np.ndarray
    intervening: np.ndarray

    def __len__(self) -> int:
        return len(self.origin)


class ZoneGraph:
    """Immutable indexed zone collection with distance and opportunity queries.

    All queries are pure; instances are safe for unrestricted concurrent
    reads once constructed.  The per-origin neighbor index is built lazily
    and cached.
    """

    def __init__(self, zones):
        zones = list(zones)
        ids = [z.id for z in zones]
        if len(set(ids)) != len(ids):
            seen, dups = set(), set()
            for i in ids:
                (dups if i in seen else seen).add(i)
            raise ValueError(f"duplicate zone ids: {sorted(dups)}")
        self.zones: list[Zone] = zones
        self.ids: list[str] = ids
        self._id_index = {zid: i for i, zid in enumerate(ids)}
        self.lats = np.array([z.centroid_lat for z in zones], dtype=float)
        self.lons = np.array([z.centroid_lon for z in zones], dtype=float)
        self._lat_rad = np.radians(self.lats)
        self._lon_rad = np.radians(self.lons)
        self.populations = np.array([z.population for z in zones], dtype=float)
        self._sorted_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def __len__(self) -> int:
        return len(self.zones)

    def index_of(self, zone_id: str) -> int:
        try:
            return self._id_index[zone_id]
        except KeyError:
            raise KeyError(f"unknown zone id {zone_id!r}") from None

    def __contains__(self, zone_id: str) -> bool:
        return zone_id in self._id_index

    def _check_index(self, i: int) -> None:
        if not 0 <= i < len(self.zones):
            raise IndexError(f"zone index {i} out of range [0, {len(self.zones)})")

    def _distance_block(self, lat_rad: np.ndarray, lon_rad: np.ndarray) -> np.ndarray:
        """(len(lat_rad) x n) great-circle distances to every zone."""
        dphi = self._lat_rad[None, :] - lat_rad[:, None]
        dlmb = self._lon_rad[None, :] - lon_rad[:, None]
        h = (np.sin(dphi / 2.0) ** 2
             + np.cos(lat_rad)[:, None] * np.cos(self._lat_rad)[None, :]
             * np.sin(dlmb / 2.0) ** 2)
        return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(h, 1.0)))

    def distances_from(self, i: int) -> np.ndarray:
        """Distances in km from zone i to every zone (including itself, 0)."""
        self._check_index(i)
        return self._distance_block(self._lat_rad[i:i + 1], self._lon_rad[i:i + 1])[0]

    def distances_from_point(self, lat: float, lon: float) -> np.ndarray:
        """Distances in km from an arbitrary point to every zone."""
        return self._distance_block(np.radians(np.array([lat], dtype=float)),
                                    np.radians(np.array([lon], dtype=float)))[0]

    def distance(self, i: int, j: int) -> float:
        """Great-circle distance in km between zone centroids; 0 for i == j."""
        self._check_index(i)
        self._check_index(j)
        if i == j:
            return 0.0
        return haversine_km(self.lats[i], self.lons[i], self.lats[j], self.lons[j])

    def _sorted_index(self, i: int):
        """(distance row, sorted distances, exclusive cumulative population) for origin i."""
        cached = self._sorted_cache.get(i)
        if cached is not None:
            return cached
        d = self.distances_from(i)
        order = np.argsort(d)
        d_sorted = d[order]
        # cum[k] = total population of the k nearest zones
        cum = np.concatenate(([0.0], np.cumsum(self.populations[order])))
        entry = (d, d_sorted, cum)
        self._sorted_cache[i] = entry
        return entry

    def intervening_opportunities(self, i: int, j: int) -> float:
        """Total population strictly inside the circle around i through j.

        Excludes both endpoint populations; zones tied at exactly the i-j
        distance are outside the (open) circle.
        """
        self._check_index(i)
        self._check_index(j)
        if i == j:
            raise ValueError("intervening opportunities are undefined for i == j")
        d, d_sorted, cum = self._sorted_index(i)
        d_ij = d[j]
        k = np.searchsorted(d_sorted, d_ij, side="left")
        s = float(cum[k])
        if d_ij > 0.0:
            s -= self.populations[i]  # origin sits at distance 0, inside every circle
        return s

    def _opportunities_from_row(self, d: np.ndarray, own_pop: float | None) -> np.ndarray:
        """Strictly-closer population sums for one origin's distance row.

        ``own_pop`` removes the origin's own distance-0 entry when the origin
        is a member of this graph; ``None`` for an external origin point.
        """
        order = np.argsort(d)
        d_sorted = d[order]
        cum = np.concatenate(([0.0], np.cumsum(self.populations[order])))
        start = np.searchsorted(d_sorted, d_sorted, side="left")
        s = np.empty_like(d)
        s[order] = cum[start]
        if own_pop is not None:
            s[d > 0.0] -= own_pop
        return s

    def origin_features(self, origin: Zone):
        """Distance and opportunity vectors from an origin zone to every member.

        When the origin's id belongs to this graph, its own population is
        excluded from the opportunity sums and its position is reported so
        callers can drop the self pair.  Returns
        ``(distances_km, opportunities, self_position_or_None)``.
        """
        self_pos = self._id_index.get(origin.id)
        if self_pos is not None:
            d = self.distances_from(self_pos)
            own_pop = origin.population
        else:
            d = self.distances_from_point(origin.centroid_lat, origin.centroid_lon)
            own_pop = None
        return d, self._opportunities_from_row(d, own_pop), self_pos

    def feature_table(self, threads: int = 1) -> FeatureTable:
        """Pairwise (m_origin, m_dest, distance, opportunities) for all ordered pairs.

        Origins are swept in fixed vectorized blocks writing disjoint output
        slices, so the result is identical for any thread count.
        """
        n = len(self.zones)
        if n < 2:
            empty_f = np.empty(0, dtype=float)
            empty_i = np.empty(0, dtype=np.int64)
            return FeatureTable(empty_i, empty_i.copy(), empty_f, empty_f.copy(),
                                empty_f.copy(), empty_f.copy())
        per = n - 1
        origin = np.repeat(np.arange(n, dtype=np.int64), per)
        dest = np.empty(n * per, dtype=np.int64)
        dist = np.empty(n * per, dtype=float)
        interv = np.empty(n * per, dtype=float)
        idx = np.arange(n, dtype=np.int64)

        def fill_block(lo: int) -> None:
            hi = min(lo + _FEATURE_BLOCK, n)
            b = hi - lo
            d = self._distance_block(self._lat_rad[lo:hi], self._lon_rad[lo:hi])
            order = np.argsort(d, axis=1)
            d_sorted = np.take_along_axis(d, order, axis=1)
            cum_excl = np.concatenate(
                [np.zeros((b, 1)), np.cumsum(self.populations[order], axis=1)[:, :-1]], axis=1)
            # index of each equal-distance group's first entry (strict-inequality cutoff)
            new_group = np.concatenate(
                [np.ones((b, 1), dtype=bool), d_sorted[:, 1:] != d_sorted[:, :-1]], axis=1)
            start = np.maximum.accumulate(np.where(new_group, idx[None, :], 0), axis=1)
            s = np.empty_like(d)
            np.put_along_axis(s, order, np.take_along_axis(cum_excl, start, axis=1), axis=1)
            s -= self.populations[lo:hi, None] * (d > 0.0)
            keep = idx[None, :] != idx[lo:hi, None]  # drop the self column
            rows = slice(lo * per, hi * per)
            dest[rows] = np.broadcast_to(idx, (b, n))[keep]
            dist[rows] = d[keep]
            interv[rows] = s[keep]

        starts = range(0, n, _FEATURE_BLOCK)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(fill_block, starts))
        else:
            for lo in starts:
                fill_block(lo)
        return FeatureTable(
            origin=origin,
            dest=dest,
            origin_pop=self.populations[origin],
            dest_pop=self.populations[dest],
            distance_km=dist,
            intervening=interv,
        )
