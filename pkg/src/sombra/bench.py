"""Timing harness for the best-matching-unit cycle.

Times exactly the distance + top-2 search over prepared buffers (the phase
that dominates an epoch), never the update.  Median over repetitions after
one untimed warmup; the unit assignments feed a checksum so the measured
work cannot be elided and can be cross-checked against the engine's pass.
Absolute times are machine-local; only orderings and scaling shapes are
meaningful comparisons.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from . import memmodel
from ._kernels import resolve_workers
from .core import Codebook, DenseMatrix, SparseBinaryMatrix, SparseValueMatrix
from .engine import EUCLIDEAN_FULL, _BmuPass, init_codebook
from .ingest import synth_generate

BACKENDS = ("dense", "sparse", "binary")
DEFAULT_BUDGET = 2 * memmodel.GIB

_BACKEND_TYPES = {
    "dense": DenseMatrix,
    "sparse": SparseValueMatrix,
    "binary": SparseBinaryMatrix,
}


@dataclass(frozen=True)
class BenchResult:
    backend: str
    n: int
    d: int
    m: int
    avg_nnz: float
    reps: int
    workers: int
    median_seconds: float
    min_seconds: float
    ns_per_article_node: float
    checksum: int

    def __post_init__(self):
        if self.reps < 3:
            raise ValueError("repetitions must be >= 3")
        if self.min_seconds > self.median_seconds:
            raise ValueError("min must not exceed median")


def bmu_checksum(bmu1: np.ndarray, bmu2: np.ndarray) -> int:
    return int(np.asarray(bmu1, dtype=np.int64).sum()) * 100003 + int(
        np.asarray(bmu2, dtype=np.int64).sum()
    )


def _avg_nnz(x) -> float:
    if isinstance(x, DenseMatrix):
        return float(np.count_nonzero(x.values)) / max(1, x.n_rows)
    return x.nnz / max(1, x.n_rows)


def time_bmu_cycle(backend: str, x, cb: Codebook, reps: int,
                   workers: int | None = None) -> BenchResult:
    """Median/min wall time of one BMU cycle for the given backend."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    if not isinstance(x, _BACKEND_TYPES[backend]):
        raise ValueError(
            f"backend {backend!r} expects {_BACKEND_TYPES[backend].__name__}, got {type(x).__name__}"
        )
    if reps < 3:
        raise ValueError("repetitions must be >= 3")
    used_workers = resolve_workers(workers)
    p = _BmuPass(x, cb, EUCLIDEAN_FULL)
    bmu1 = np.empty(p.n, dtype=np.int64)
    bmu2 = np.empty(p.n, dtype=np.int64)
    dst1 = np.empty(p.n)
    p.run(bmu1, bmu2, dst1)  # warmup (also JIT on first use)
    times = []
    checksum = 0
    for _ in range(reps):
        t0 = time.perf_counter()
        p.run(bmu1, bmu2, dst1)
        times.append(time.perf_counter() - t0)
        checksum = bmu_checksum(bmu1, bmu2)
    return BenchResult(
        backend=backend,
        n=x.n_rows,
        d=x.n_cols,
        m=cb.n_nodes,
        avg_nnz=_avg_nnz(x),
        reps=reps,
        workers=used_workers,
        median_seconds=statistics.median(times),
        min_seconds=min(times),
        ns_per_article_node=statistics.median(times) / max(1, x.n_rows * cb.n_nodes) * 1e9,
        checksum=checksum,
    )


@dataclass(frozen=True)
class BenchSweepRow:
    backend: str
    n: int
    d: int
    m: int
    avg_nnz: float
    estimate: memmodel.MemoryEstimate
    skipped: bool
    result: BenchResult | None


BENCH_COLUMNS = memmodel.SWEEP_COLUMNS + (
    "reps", "workers", "median_seconds", "min_seconds", "ns_per_article_node", "skipped",
)


def _square_side(m: int) -> int:
    side = int(round(m**0.5))
    if side * side != m:
        raise ValueError(f"node count {m} is not a square grid")
    return side


def bench_sweep(n_values, d_values, m_values, backends, reps: int = 5,
                avg_nnz: float = 10.0, budget_bytes: int | None = DEFAULT_BUDGET,
                workers: int | None = None, seed: int = 0) -> list[BenchSweepRow]:
    """Time every (backend, N, D, M) cell whose modeled footprint fits the budget.

    Cells that do not fit are kept as marker rows with skipped=true.  Synthetic
    input reuses the evaluation distribution around avg_nnz (half-width 5).
    """
    if reps < 3:
        raise ValueError("repetitions must be >= 3")
    for b in backends:
        if b not in BACKENDS:
            raise ValueError(f"unknown backend {b!r}")
    lo = max(0, int(round(avg_nnz)) - 5)
    hi = int(round(avg_nnz)) + 5
    rows: list[BenchSweepRow] = []
    matrices: dict[tuple[int, int], SparseBinaryMatrix] = {}
    for n in n_values:
        for d in d_values:
            key = (int(n), int(d))
            if key not in matrices:
                matrices[key] = synth_generate(key[0], key[1], nnz_low=lo, nnz_high=hi, seed=seed)
            sbm = matrices[key]
            for m in m_values:
                side = _square_side(int(m))
                cb = init_codebook(side, side, int(d), seed)
                for backend in backends:
                    est = memmodel.estimate(
                        "sparse" if backend == "sparse" else backend,
                        int(n), int(d), int(m), avg_nnz, budget_bytes,
                    )
                    if not est.fits:
                        rows.append(BenchSweepRow(backend, int(n), int(d), int(m),
                                                  float(avg_nnz), est, True, None))
                        continue
                    if backend == "dense":
                        x = sbm.to_dense()
                    elif backend == "sparse":
                        x = SparseValueMatrix.from_binary(sbm)
                    else:
                        x = sbm
                    result = time_bmu_cycle(backend, x, cb, reps, workers=workers)
                    rows.append(BenchSweepRow(backend, int(n), int(d), int(m),
                                              float(avg_nnz), est, False, result))
                del cb
    return rows


def write_bench_csv(rows, sink) -> None:
    fh, close = (sink, False) if hasattr(sink, "write") else (open(sink, "w", encoding="utf-8"), True)
    try:
        fh.write(",".join(BENCH_COLUMNS) + "\n")
        for r in rows:
            e = r.estimate
            base = (f"{r.backend},{r.n},{r.d},{r.m},{r.avg_nnz:g},"
                    f"{e.articles_bytes},{e.codebook_bytes},{e.scratch_bytes},"
                    f"{e.total_bytes},{str(e.fits).lower()}")
            if r.result is None:
                fh.write(base + f",,,,,,{str(r.skipped).lower()}\n")
            else:
                res = r.result
                fh.write(base + f",{res.reps},{res.workers},{res.median_seconds:.6e},"
                                f"{res.min_seconds:.6e},{res.ns_per_article_node:.4f},"
                                f"{str(r.skipped).lower()}\n")
    finally:
        if close:
            fh.close()
