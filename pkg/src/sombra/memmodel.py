"""Analytic byte-footprint model for the three training algorithms.

Exact integer arithmetic throughout.  Article storage follows the on-disk
element widths (4-byte floats, 4-byte column ids, 8-byte row offsets);
scratch covers the per-article search state plus the double-precision
accumulator buffers a batch epoch needs.  Figure-style storage comparisons
count articles+codebook only, which the storage_only flag selects.
"""

from __future__ import annotations

from dataclasses import dataclass

MIB = 2**20
GIB = 2**30

ALGORITHMS = ("dense", "sparse", "binary")


@dataclass(frozen=True)
class MemoryEstimate:
    algorithm: str
    articles_bytes: int
    codebook_bytes: int
    scratch_bytes: int
    total_bytes: int
    fits: bool

    def __post_init__(self):
        parts = (self.articles_bytes, self.codebook_bytes, self.scratch_bytes)
        if any(p < 0 for p in parts):
            raise ValueError("byte counts must be non-negative")
        if self.total_bytes != sum(parts):
            raise ValueError("total_bytes must equal the sum of the parts")


def _require_non_negative(**kwargs) -> None:
    for name, value in kwargs.items():
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value}")


def _scratch_bytes(n: int, d: int, m: int) -> int:
    # per article: f32 best distance, f32 squared norm, 2x i32 unit indices;
    # per node: f64 numerator row and f64 denominator
    return n * (4 + 4 + 2 * 4) + m * d * 8 + m * 8


def _make(algorithm, articles, codebook, scratch, budget_bytes, storage_only) -> MemoryEstimate:
    relevant = articles + codebook if storage_only else articles + codebook + scratch
    fits = True if budget_bytes is None else relevant <= budget_bytes
    return MemoryEstimate(algorithm, articles, codebook, scratch, articles + codebook + scratch, fits)


def estimate_dense(n: int, d: int, m: int, budget_bytes: int | None = None,
                   storage_only: bool = False) -> MemoryEstimate:
    """Dense rows of 4-byte floats."""
    _require_non_negative(n=n, d=d, m=m)
    return _make("dense", n * d * 4, m * d * 4, _scratch_bytes(n, d, m), budget_bytes, storage_only)


def estimate_sparse_value(n: int, nnz_total: int, d: int = 0, m: int = 0,
                          budget_bytes: int | None = None,
                          storage_only: bool = False) -> MemoryEstimate:
    """Index+value rows: 4-byte id and 4-byte float per element, 8-byte offsets."""
    _require_non_negative(n=n, nnz_total=nnz_total, d=d, m=m)
    articles = nnz_total * 8 + (n + 1) * 8
    return _make("sparse", articles, m * d * 4, _scratch_bytes(n, d, m), budget_bytes, storage_only)


def estimate_sparse_binary(n: int, nnz_total: int, d: int = 0, m: int = 0,
                           budget_bytes: int | None = None,
                           storage_only: bool = False) -> MemoryEstimate:
    """Index-only rows: a single 4-byte id per element, 8-byte offsets."""
    _require_non_negative(n=n, nnz_total=nnz_total, d=d, m=m)
    articles = nnz_total * 4 + (n + 1) * 8
    return _make("binary", articles, m * d * 4, _scratch_bytes(n, d, m), budget_bytes, storage_only)


def estimate(algorithm: str, n: int, d: int, m: int, avg_nnz: float,
             budget_bytes: int | None = None, storage_only: bool = False) -> MemoryEstimate:
    nnz_total = int(round(n * avg_nnz))
    if algorithm == "dense":
        return estimate_dense(n, d, m, budget_bytes, storage_only)
    if algorithm == "sparse":
        return estimate_sparse_value(n, nnz_total, d, m, budget_bytes, storage_only)
    if algorithm == "binary":
        return estimate_sparse_binary(n, nnz_total, d, m, budget_bytes, storage_only)
    raise ValueError(f"unknown algorithm {algorithm!r}")


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    n: int
    d: int
    m: int
    avg_nnz: float
    estimate: MemoryEstimate


SWEEP_COLUMNS = ("algorithm", "N", "D", "M", "avg_nnz", "articles_bytes",
                 "codebook_bytes", "scratch_bytes", "total_bytes", "fits")


def sweep(budget_bytes: int | None, n_values, d_values, m_values, algorithms,
          avg_nnz: float = 10.0, storage_only: bool = False) -> list[SweepRow]:
    """One row per (algorithm, N, D, M) combination with a fit flag."""
    n_values, d_values, m_values = list(n_values), list(d_values), list(m_values)
    algorithms = list(algorithms)
    if not (n_values and d_values and m_values and algorithms):
        raise ValueError("sweep ranges must be non-empty")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    rows = []
    for a in algorithms:
        for n in n_values:
            for d in d_values:
                for m in m_values:
                    est = estimate(a, int(n), int(d), int(m), avg_nnz, budget_bytes, storage_only)
                    rows.append(SweepRow(a, int(n), int(d), int(m), float(avg_nnz), est))
    return rows


def write_sweep_csv(rows, sink) -> None:
    fh, close = (sink, False) if hasattr(sink, "write") else (open(sink, "w", encoding="utf-8"), True)
    try:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            e = r.estimate
            fh.write(f"{r.algorithm},{r.n},{r.d},{r.m},{r.avg_nnz:g},"
                     f"{e.articles_bytes},{e.codebook_bytes},{e.scratch_bytes},"
                     f"{e.total_bytes},{str(e.fits).lower()}\n")
    finally:
        if close:
            fh.close()
