"""Matrix and codebook containers plus their on-disk formats.

Articles are stored in compressed-sparse-row (CSR) form: a flat array of
column ids with one offset per row boundary.  The binary variant keeps only
the ids (every stored element is implicitly 1.0); the value variant carries
one float per stored id.  Column ids are 32-bit unsigned, offsets 64-bit, so
a matrix can exceed 4G nonzeros while each element still costs 4 bytes.

All containers are immutable after construction: their numpy buffers are
marked read-only, which makes them safe to share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

SBM1_MAGIC = b"SBM1"
SOMC_MAGIC = b"SOMC"
_SBM1_HEADER = struct.Struct("<4sIQIQ")  # magic, version, n_rows, n_cols, nnz
_SOMC_HEADER = struct.Struct("<4sIIII")  # magic, version, side_x, side_y, dim


class FormatError(ValueError):
    """A stream or text source does not parse as the expected format."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _check_csr(offsets: np.ndarray, indices: np.ndarray, n_rows: int, n_cols: int) -> None:
    if offsets.shape != (n_rows + 1,):
        raise ValueError(f"offsets must have length n_rows+1={n_rows + 1}, got {offsets.shape}")
    if offsets[0] != 0:
        raise ValueError("offsets[0] must be 0")
    if offsets[-1] != indices.shape[0]:
        raise ValueError(f"offsets[-1]={offsets[-1]} does not match nnz={indices.shape[0]}")
    if np.any(np.diff(offsets) < 0):
        raise ValueError("offsets must be non-decreasing")
    if indices.size:
        if int(indices.max()) >= n_cols:
            raise ValueError(f"column id {int(indices.max())} out of range (n_cols={n_cols})")
        # strictly increasing inside each row; row boundaries may go backwards
        inner = np.ones(indices.size, dtype=bool)
        starts = offsets[:-1]
        inner[starts[starts < indices.size]] = False
        if np.any(indices[1:][inner[1:]] <= indices[:-1][inner[1:]]):
            raise ValueError("row indices must be strictly increasing (sorted, no duplicates)")


@dataclass(frozen=True)
class SparseBinaryMatrix:
    """CSR index-only incidence matrix; stored elements are implicitly 1."""

    n_rows: int
    n_cols: int
    offsets: np.ndarray  # int64, n_rows+1
    indices: np.ndarray  # uint32, nnz

    def __post_init__(self):
        offsets = _freeze(np.ascontiguousarray(self.offsets, dtype=np.int64))
        indices = _freeze(np.ascontiguousarray(self.indices, dtype=np.uint32))
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "indices", indices)
        _check_csr(self.offsets, self.indices, self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.offsets[-1])

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.offsets[i] : self.offsets[i + 1]]

    def row_lengths(self) -> np.ndarray:
        """Stored-element count per row (the per-article annotation count)."""
        return np.diff(self.offsets)

    @classmethod
    def from_rows(cls, rows, n_cols: int) -> "SparseBinaryMatrix":
        """Build from per-row collections of column ids (deduplicated, sorted)."""
        offsets = np.zeros(len(rows) + 1, dtype=np.int64)
        chunks = []
        for i, row in enumerate(rows):
            ids = np.unique(np.fromiter(row, dtype=np.int64, count=len(row)))
            if ids.size and (ids[0] < 0 or ids[-1] >= n_cols):
                bad = int(ids[0]) if ids[0] < 0 else int(ids[-1])
                raise ValueError(f"row {i}: column id {bad} out of range (n_cols={n_cols})")
            offsets[i + 1] = offsets[i] + ids.size
            chunks.append(ids.astype(np.uint32))
        indices = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.uint32)
        return cls(len(rows), n_cols, offsets, indices)

    def to_rows(self) -> list[set[int]]:
        return [set(map(int, self.row(i))) for i in range(self.n_rows)]

    def to_dense(self) -> "DenseMatrix":
        """Expand to a dense 0/1 matrix (rows small enough to materialize)."""
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        if self.indices.size:
            rows = np.repeat(np.arange(self.n_rows), self.row_lengths())
            out[rows, self.indices.astype(np.int64)] = 1.0
        return DenseMatrix(self.n_rows, self.n_cols, out)


@dataclass(frozen=True)
class SparseValueMatrix:
    """CSR index+value matrix (one float per stored id)."""

    n_rows: int
    n_cols: int
    offsets: np.ndarray  # int64, n_rows+1
    indices: np.ndarray  # uint32, nnz
    values: np.ndarray  # float64, nnz

    def __post_init__(self):
        offsets = _freeze(np.ascontiguousarray(self.offsets, dtype=np.int64))
        indices = _freeze(np.ascontiguousarray(self.indices, dtype=np.uint32))
        values = _freeze(np.ascontiguousarray(self.values, dtype=np.float64))
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        _check_csr(self.offsets, self.indices, self.n_rows, self.n_cols)
        if self.values.shape != self.indices.shape:
            raise ValueError("values and indices must have identical length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("stored values must be finite")

    @property
    def nnz(self) -> int:
        return int(self.offsets[-1])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        sl = slice(self.offsets[i], self.offsets[i + 1])
        return self.indices[sl], self.values[sl]

    def row_lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @classmethod
    def from_binary(cls, m: SparseBinaryMatrix) -> "SparseValueMatrix":
        """Same structure with every stored value set to 1.0."""
        return cls(m.n_rows, m.n_cols, m.offsets, m.indices, np.ones(m.nnz, dtype=np.float64))

    def to_dense(self) -> "DenseMatrix":
        out = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        if self.indices.size:
            rows = np.repeat(np.arange(self.n_rows), self.row_lengths())
            out[rows, self.indices.astype(np.int64)] = self.values
        return DenseMatrix(self.n_rows, self.n_cols, out)


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major dense matrix (the baseline input representation)."""

    n_rows: int
    n_cols: int
    values: np.ndarray  # float64, (n_rows, n_cols)

    def __post_init__(self):
        values = _freeze(np.ascontiguousarray(self.values, dtype=np.float64))
        object.__setattr__(self, "values", values)
        if self.values.shape != (self.n_rows, self.n_cols):
            raise ValueError(f"expected shape {(self.n_rows, self.n_cols)}, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("entries must be finite")


@dataclass(frozen=True)
class Codebook:
    """Node weight vectors on a 2-D grid.

    Node k sits at grid position (k mod side_x, k div side_x).  Weights are
    kept in double precision in memory and persisted as 4-byte floats.
    """

    side_x: int
    side_y: int
    dim: int
    weights: np.ndarray  # float64, (side_x*side_y, dim)

    def __post_init__(self):
        if self.side_x < 1 or self.side_y < 1 or self.dim < 1:
            raise ValueError("grid sides and dim must be positive")
        if self.side_x * self.side_y < 2:
            raise ValueError("map needs at least 2 nodes (second-best unit is tracked)")
        weights = _freeze(np.ascontiguousarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "weights", weights)
        if self.weights.shape != (self.n_nodes, self.dim):
            raise ValueError(f"expected weights shape {(self.n_nodes, self.dim)}, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def n_nodes(self) -> int:
        return self.side_x * self.side_y

    def node_position(self, k: int) -> tuple[int, int]:
        return k % self.side_x, k // self.side_x

    def grid_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-node (x, y) grid coordinates as int64 arrays."""
        k = np.arange(self.n_nodes, dtype=np.int64)
        return k % self.side_x, k // self.side_x

    def replace_weights(self, weights: np.ndarray) -> "Codebook":
        return Codebook(self.side_x, self.side_y, self.dim, weights)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered descriptor identifiers; position in the list is the column index."""

    terms: tuple[str, ...]
    index: dict[str, int] = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self):
        idx = {t: i for i, t in enumerate(self.terms)}
        if len(idx) != len(self.terms):
            raise ValueError("duplicate terms in vocabulary")
        object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def column_of(self, term: str) -> int:
        return self.index[term]


# ---------------------------------------------------------------------------
# SBM1: index-only CSR persistence
#
# Little-endian throughout: magic "SBM1", u32 version (=1), u64 n_rows,
# u32 n_cols, u64 nnz, then (n_rows+1) u64 offsets, then nnz u32 indices.
# ---------------------------------------------------------------------------


def _writer(sink):
    if hasattr(sink, "write"):
        return sink, False
    return open(sink, "wb"), True


def _reader(source):
    if hasattr(source, "read"):
        return source, False
    return open(source, "rb"), True


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated stream while reading {what} ({len(buf)}/{n} bytes)")
    return buf


def write_sbm1(m: SparseBinaryMatrix, sink) -> None:
    fh, close = _writer(sink)
    try:
        fh.write(_SBM1_HEADER.pack(SBM1_MAGIC, 1, m.n_rows, m.n_cols, m.nnz))
        fh.write(m.offsets.astype("<u8").tobytes())
        fh.write(m.indices.astype("<u4").tobytes())
    finally:
        if close:
            fh.close()


def read_sbm1(source) -> SparseBinaryMatrix:
    fh, close = _reader(source)
    try:
        magic, version, n_rows, n_cols, nnz = _SBM1_HEADER.unpack(
            _read_exact(fh, _SBM1_HEADER.size, "header")
        )
        if magic != SBM1_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {SBM1_MAGIC!r}")
        if version != 1:
            raise FormatError(f"unsupported SBM1 version {version}")
        offsets = np.frombuffer(_read_exact(fh, 8 * (n_rows + 1), "offsets"), dtype="<u8")
        indices = np.frombuffer(_read_exact(fh, 4 * nnz, "indices"), dtype="<u4")
        if offsets.size and offsets[-1] != nnz:
            raise FormatError(f"header nnz={nnz} does not match offsets[-1]={int(offsets[-1])}")
        try:
            return SparseBinaryMatrix(n_rows, n_cols, offsets.astype(np.int64), indices)
        except ValueError as exc:
            raise FormatError(f"invalid matrix in stream: {exc}") from exc
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# SOMC: codebook persistence
#
# Little-endian: magic "SOMC", u32 version (=1), u32 side_x, u32 side_y,
# u32 dim, then side_x*side_y*dim IEEE-754 single-precision weights.
# ---------------------------------------------------------------------------


def write_somc(cb: Codebook, sink) -> None:
    fh, close = _writer(sink)
    try:
        fh.write(_SOMC_HEADER.pack(SOMC_MAGIC, 1, cb.side_x, cb.side_y, cb.dim))
        fh.write(cb.weights.astype("<f4").tobytes())
    finally:
        if close:
            fh.close()


def read_somc(source) -> Codebook:
    fh, close = _reader(source)
    try:
        magic, version, side_x, side_y, dim = _SOMC_HEADER.unpack(
            _read_exact(fh, _SOMC_HEADER.size, "header")
        )
        if magic != SOMC_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {SOMC_MAGIC!r}")
        if version != 1:
            raise FormatError(f"unsupported SOMC version {version}")
        n = side_x * side_y * dim
        weights = np.frombuffer(_read_exact(fh, 4 * n, "weights"), dtype="<f4")
        try:
            return Codebook(side_x, side_y, dim, weights.astype(np.float64).reshape(side_x * side_y, dim))
        except ValueError as exc:
            raise FormatError(f"invalid codebook in stream: {exc}") from exc
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# LibSVM text interchange: `label idx:val idx:val ...` per line.
# ---------------------------------------------------------------------------


def read_libsvm_text(source, n_cols: int, one_based: bool = True):
    """Parse LibSVM-style text into a value matrix.

    Returns (matrix, labels); the leading label token of each line is not
    part of the matrix.  Indices may be 1-based (conventional) or 0-based.
    Duplicate indices on one line are rejected: with explicit values there
    is no single right merge.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = text.splitlines()
    base = 1 if one_based else 0
    labels: list[str] = []
    offsets = [0]
    all_ids: list[np.ndarray] = []
    all_vals: list[np.ndarray] = []
    for ln, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        labels.append(tokens[0])
        ids = np.empty(len(tokens) - 1, dtype=np.int64)
        vals = np.empty(len(tokens) - 1, dtype=np.float64)
        for t, tok in enumerate(tokens[1:]):
            try:
                idx_s, val_s = tok.split(":", 1)
                idx = int(idx_s) - base
                val = float(val_s)
            except ValueError as exc:
                raise FormatError(f"line {ln}: malformed token {tok!r}") from exc
            if idx < 0 or idx >= n_cols:
                raise FormatError(f"line {ln}: index {idx_s} out of range (n_cols={n_cols})")
            ids[t] = idx
            vals[t] = val
        order = np.argsort(ids, kind="stable")
        ids, vals = ids[order], vals[order]
        if ids.size > 1 and np.any(np.diff(ids) == 0):
            raise FormatError(f"line {ln}: duplicate index")
        all_ids.append(ids.astype(np.uint32))
        all_vals.append(vals)
        offsets.append(offsets[-1] + ids.size)
    indices = np.concatenate(all_ids) if all_ids else np.empty(0, dtype=np.uint32)
    values = np.concatenate(all_vals) if all_vals else np.empty(0, dtype=np.float64)
    matrix = SparseValueMatrix(len(labels), n_cols, np.asarray(offsets, dtype=np.int64), indices, values)
    return matrix, labels


def write_libsvm_text(m: SparseValueMatrix, sink, labels=None, one_based: bool = True) -> None:
    """Inverse of read_libsvm_text; labels default to 0."""
    fh, close = (sink, False) if hasattr(sink, "write") else (open(sink, "w", encoding="utf-8"), True)
    base = 1 if one_based else 0
    try:
        for i in range(m.n_rows):
            ids, vals = m.row(i)
            label = "0" if labels is None else str(labels[i])
            parts = [label] + [f"{int(j) + base}:{v:g}" for j, v in zip(ids, vals)]
            fh.write(" ".join(parts) + "\n")
    finally:
        if close:
            fh.close()
