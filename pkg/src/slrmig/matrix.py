"""Sparse origin-destination flow matrix with id registries."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class MigrationMatrix:
    """Nonnegative origin x destination migrant-count table.

    Rows and columns are addressed by opaque zone-id registries; two
    matrices can only be added when their registries match exactly.
    Values are real-valued migrant counts (never rounded).
    """

    def __init__(self, origin_ids, dest_ids, data: sp.spmatrix):
        self.origin_ids: tuple[str, ...] = tuple(origin_ids)
        self.dest_ids: tuple[str, ...] = tuple(dest_ids)
        csr = sp.csr_matrix(data, dtype=float, copy=False)
        if csr.shape != (len(self.origin_ids), len(self.dest_ids)):
            raise ValueError(f"data shape {csr.shape} does not match registries "
                             f"({len(self.origin_ids)} x {len(self.dest_ids)})")
        if csr.nnz and csr.data.min() < 0:
            raise ValueError("migration matrix entries must be >= 0")
        csr.sum_duplicates()
        self._csr = csr
        self._origin_index: dict[str, int] | None = None
        self._dest_index: dict[str, int] | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def zeros(cls, origin_ids, dest_ids) -> "MigrationMatrix":
        return cls(origin_ids, dest_ids,
                   sp.csr_matrix((len(tuple(origin_ids)), len(tuple(dest_ids))), dtype=float))

    @classmethod
    def from_dense(cls, origin_ids, dest_ids, array) -> "MigrationMatrix":
        return cls(origin_ids, dest_ids, sp.csr_matrix(np.asarray(array, dtype=float)))

    @classmethod
    def from_entries(cls, origin_ids, dest_ids, origins, dests, values) -> "MigrationMatrix":
        """Build from parallel id sequences (triplet form)."""
        origin_ids = tuple(origin_ids)
        dest_ids = tuple(dest_ids)
        o_index = {zid: i for i, zid in enumerate(origin_ids)}
        d_index = {zid: i for i, zid in enumerate(dest_ids)}
        rows = np.fromiter((o_index[o] for o in origins), dtype=np.int64, count=len(values))
        cols = np.fromiter((d_index[d] for d in dests), dtype=np.int64, count=len(values))
        coo = sp.coo_matrix((np.asarray(values, dtype=float), (rows, cols)),
                            shape=(len(origin_ids), len(dest_ids)))
        return cls(origin_ids, dest_ids, coo.tocsr())

    # -- registries --------------------------------------------------------

    @property
    def n_origins(self) -> int:
        return len(self.origin_ids)

    @property
    def n_destinations(self) -> int:
        return len(self.dest_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    def origin_index(self) -> dict[str, int]:
        if self._origin_index is None:
            self._origin_index = {zid: i for i, zid in enumerate(self.origin_ids)}
        return self._origin_index

    def dest_index(self) -> dict[str, int]:
        if self._dest_index is None:
            self._dest_index = {zid: i for i, zid in enumerate(self.dest_ids)}
        return self._dest_index

    def same_registries(self, other: "MigrationMatrix") -> bool:
        return self.origin_ids == other.origin_ids and self.dest_ids == other.dest_ids

    def n_valid_cells(self) -> int:
        """Number of ordered pairs, excluding cells whose origin and destination id match."""
        shared = set(self.origin_ids) & set(self.dest_ids)
        return self.n_origins * self.n_destinations - len(shared)

    # -- queries -----------------------------------------------------------

    def total(self) -> float:
        return float(self._csr.sum())

    def row_sums(self) -> np.ndarray:
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        return np.asarray(self._csr.sum(axis=0)).ravel()

    def get(self, origin_id: str, dest_id: str) -> float:
        return float(self._csr[self.origin_index()[origin_id], self.dest_index()[dest_id]])

    def nnz(self) -> int:
        return self._csr.nnz

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def to_triplets(self, min_value: float = 0.0):
        """(origin_id, dest_id, value) arrays in row-major registry order."""
        coo = self._csr.tocoo()
        keep = coo.data >= min_value if min_value > 0.0 else slice(None)
        rows, cols, vals = coo.row[keep], coo.col[keep], coo.data[keep]
        o = np.array(self.origin_ids, dtype=object)[rows]
        d = np.array(self.dest_ids, dtype=object)[cols]
        return o, d, vals

    def sparse(self) -> sp.csr_matrix:
        """Underlying CSR storage (shared, do not mutate)."""
        return self._csr

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "MigrationMatrix") -> "MigrationMatrix":
        if not isinstance(other, MigrationMatrix):
            return NotImplemented
        if not self.same_registries(other):
            raise ValueError("cannot add migration matrices with different registries")
        return MigrationMatrix(self.origin_ids, self.dest_ids, self._csr + other._csr)

    def equals(self, other: "MigrationMatrix") -> bool:
        return (self.same_registries(other)
                and (self._csr != other._csr).nnz == 0)

    def embedded(self, origin_ids, dest_ids) -> "MigrationMatrix":
        """Re-home all entries into larger registries containing the current ids."""
        origin_ids = tuple(origin_ids)
        dest_ids = tuple(dest_ids)
        o_index = {zid: i for i, zid in enumerate(origin_ids)}
        d_index = {zid: i for i, zid in enumerate(dest_ids)}
        try:
            row_map = np.array([o_index[z] for z in self.origin_ids], dtype=np.int64)
            col_map = np.array([d_index[z] for z in self.dest_ids], dtype=np.int64)
        except KeyError as missing:
            raise ValueError(f"target registries do not contain id {missing}") from None
        coo = self._csr.tocoo()
        out = sp.coo_matrix((coo.data, (row_map[coo.row], col_map[coo.col])),
                            shape=(len(origin_ids), len(dest_ids)))
        return MigrationMatrix(origin_ids, dest_ids, out.tocsr())

    def restrict_rows(self, origin_ids) -> "MigrationMatrix":
        """New matrix holding only the requested origin rows (in the given order)."""
        idx = [self.origin_index()[z] for z in origin_ids]
        return MigrationMatrix(tuple(origin_ids), self.dest_ids, self._csr[idx, :])

    def __repr__(self) -> str:
        return (f"MigrationMatrix({self.n_origins} origins x {self.n_destinations} "
                f"destinations, {self.nnz()} nonzero, total {self.total():.6g})")
