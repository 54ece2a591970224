"""Batch self-organizing-map training.

One epoch = best-matching-unit search over all articles, accumulation of
numerator/denominator sums weighted by the Gaussian grid neighborhood, then
a single codebook update.  Three input backends share the loop: dense rows,
CSR index+value rows, and CSR index-only rows whose dot products degenerate
to gather-sums.

All accumulation runs in double precision.  Every kernel writes each output
element from exactly one thread in a fixed order, so training is bit-exact
for a fixed seed regardless of the worker count.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels, quality
from .core import Codebook, DenseMatrix, SparseBinaryMatrix, SparseValueMatrix

EUCLIDEAN_FULL = "euclidean_full"
NORMALIZED_REDUCED = "normalized_reduced"
DISTANCE_MODES = (EUCLIDEAN_FULL, NORMALIZED_REDUCED)
ADJACENCY_MODES = ("manhattan1", "chebyshev1")

DENSE_CHUNK = 2048  # article rows per BLAS block in the dense BMU pass


@dataclass
class TrainConfig:
    """Schedule and mode flags for a training run.

    sigma0 defaults to half the smaller grid side; epochs defaults to the
    number of epochs needed to shrink sigma below 1 plus two refinement
    epochs.
    """

    side_x: int
    side_y: int
    epochs: int | None = None
    decay: float = 1.7
    sigma0: float | None = None
    distance_mode: str = EUCLIDEAN_FULL
    adjacency_mode: str = "manhattan1"
    cutoff: float | None = None
    seed: int = 0
    deterministic_reduction: bool = True
    eps: float = 1e-12

    def resolved_sigma0(self) -> float:
        if self.sigma0 is not None:
            return float(self.sigma0)
        return min(self.side_x, self.side_y) / 2.0

    def resolved_epochs(self) -> int:
        if self.epochs is not None:
            return int(self.epochs)
        s0 = self.resolved_sigma0()
        return max(0, math.ceil(math.log(s0) / math.log(self.decay))) + 2

    def validate(self) -> None:
        if self.side_x < 1 or self.side_y < 1 or self.side_x * self.side_y < 2:
            raise ValueError("grid must have at least 2 nodes")
        if self.decay <= 1.0:
            raise ValueError(f"decay must exceed 1, got {self.decay}")
        if self.resolved_sigma0() <= 0.0:
            raise ValueError(f"sigma0 must be positive, got {self.resolved_sigma0()}")
        if self.resolved_epochs() < 1:
            raise ValueError(f"epochs must be >= 1, got {self.resolved_epochs()}")
        if self.distance_mode not in DISTANCE_MODES:
            raise ValueError(f"unknown distance_mode {self.distance_mode!r}")
        if self.adjacency_mode not in ADJACENCY_MODES:
            raise ValueError(f"unknown adjacency_mode {self.adjacency_mode!r}")
        if self.cutoff is not None and self.cutoff <= 0.0:
            raise ValueError("cutoff must be positive when set")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")


@dataclass
class EpochReport:
    epoch: int
    sigma: float
    quantization_error: float
    topographic_error: float
    bmu_seconds: float
    update_seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass
class EpochScratch:
    """Reusable per-epoch buffers.

    row_sq_norms holds the per-article squared norm (for index-only input
    this is just the stored-element count); it is computed once when the
    scratch is created.  node_sq_norms is refreshed every epoch.
    """

    row_sq_norms: np.ndarray
    node_sq_norms: np.ndarray
    dst: np.ndarray
    bmu1: np.ndarray
    bmu2: np.ndarray
    num: np.ndarray
    den: np.ndarray

    @classmethod
    def for_instance(cls, x, n_nodes: int) -> "EpochScratch":
        n = x.n_rows
        return cls(
            row_sq_norms=row_squared_norms(x),
            node_sq_norms=np.zeros(n_nodes),
            dst=np.zeros(n),
            bmu1=np.zeros(n, dtype=np.int64),
            bmu2=np.zeros(n, dtype=np.int64),
            num=np.zeros((n_nodes, x.n_cols)),
            den=np.zeros(n_nodes),
        )


def init_codebook(side_x: int, side_y: int, dim: int, seed: int) -> Codebook:
    """Uniform random weights in [0, 1); identical seed, identical codebook."""
    if side_x < 1 or side_y < 1 or dim < 1:
        raise ValueError("side_x, side_y and dim must be positive")
    if side_x * side_y < 2:
        raise ValueError("map needs at least 2 nodes")
    rng = np.random.default_rng(seed)
    return Codebook(side_x, side_y, dim, rng.random((side_x * side_y, dim)))


def sigma_at(cfg: TrainConfig, epoch: int) -> float:
    """Neighborhood radius at a 1-based epoch: sigma0 / decay**epoch."""
    if epoch < 1:
        raise ValueError(f"epoch must be >= 1, got {epoch}")
    return cfg.resolved_sigma0() / cfg.decay**epoch


def neighborhood_weight(pos_a, pos_b, sigma: float, cutoff: float | None = None) -> float:
    """Gaussian grid coupling exp(-|a-b|^2 / (2 sigma^2)), optionally truncated."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    dx = pos_a[0] - pos_b[0]
    dy = pos_a[1] - pos_b[1]
    d2 = dx * dx + dy * dy
    if cutoff is not None and d2 > (cutoff * sigma) ** 2:
        return 0.0
    return math.exp(-d2 / (2.0 * sigma * sigma))


def node_squared_norms(cb: Codebook) -> np.ndarray:
    """Per-node sum of squared weights, recomputed once per epoch.

    Summed in strict index order, so the result matches a naive per-element
    loop exactly.
    """
    out = np.empty(cb.n_nodes)
    _kernels.row_norms_dense(cb.weights, out)
    return out


def row_squared_norms(x) -> np.ndarray:
    """Per-article squared norm; equals the row nnz for index-only input."""
    if isinstance(x, SparseBinaryMatrix):
        return np.diff(x.offsets).astype(np.float64)
    if isinstance(x, SparseValueMatrix):
        out = np.empty(x.n_rows)
        _kernels.row_norms_csr(x.offsets, x.values, out)
        return out
    if isinstance(x, DenseMatrix):
        out = np.empty(x.n_rows)
        _kernels.row_norms_dense(x.values, out)
        return out
    raise TypeError(f"unsupported input type {type(x).__name__}")


def distance_sparse(indices, values, node_weights, row_sq_norm: float, node_sq_norm: float) -> float:
    """Squared Euclidean distance from precomputed norms and a sparse dot."""
    idx = np.asarray(indices, dtype=np.int64)
    dot = float(np.dot(np.asarray(values, dtype=np.float64), node_weights[idx]))
    return float(node_sq_norm) + float(row_sq_norm) - 2.0 * dot


def distance_binary(indices, node_weights, row_nnz: float, node_sq_norm: float = 0.0,
                    mode: str = EUCLIDEAN_FULL) -> float:
    """Index-only distance; the dot product is a gather-sum (no multiplies).

    euclidean_full gives the exact squared Euclidean distance.  In
    normalized_reduced mode the caller passes L2-normalized node weights and
    the constant node term is dropped; values may be negative, only the
    ordering matters.
    """
    idx = np.asarray(indices, dtype=np.int64)
    dot = float(node_weights[idx].sum())
    if mode == EUCLIDEAN_FULL:
        return float(node_sq_norm) + float(row_nnz) - 2.0 * dot
    if mode == NORMALIZED_REDUCED:
        return float(row_nnz) - 2.0 * dot
    raise ValueError(f"unknown distance mode {mode!r}")


def normalize_codebook(cb: Codebook) -> tuple[Codebook, np.ndarray]:
    """L2-normalize each node row; zero rows stay zero (their norm is 0)."""
    norms = np.sqrt(node_squared_norms(cb))
    w = np.array(cb.weights)
    nz = norms > 0.0
    w[nz] /= norms[nz, None]
    return cb.replace_weights(w), norms


def _check_dims(x, cb: Codebook) -> None:
    if x.n_cols != cb.dim:
        raise ValueError(f"input has {x.n_cols} columns but codebook dim is {cb.dim}")


class _BmuPass:
    """A prepared best-matching-unit pass over one input/codebook pair.

    Preparation (norms, optional normalization, codebook transpose) happens
    once; run() executes exactly the distance + top-2 search.  The bench
    harness times run() alone, which mirrors the per-cycle cost the update
    phase never touches.
    """

    def __init__(self, x, cb: Codebook, mode: str = EUCLIDEAN_FULL, row_sq: np.ndarray | None = None):
        _check_dims(x, cb)
        if mode not in DISTANCE_MODES:
            raise ValueError(f"unknown distance mode {mode!r}")
        self.x = x
        self.n = x.n_rows
        self.m = cb.n_nodes
        self.row_sq = row_squared_norms(x) if row_sq is None else row_sq
        if mode == EUCLIDEAN_FULL:
            search = cb.weights
            self.node_sq = node_squared_norms(cb)
            self.unit_node_sq = None
        else:
            normalized, norms = normalize_codebook(cb)
            search = normalized.weights
            self.node_sq = np.zeros(cb.n_nodes)
            # squared norm of each normalized row: 1, or 0 for zero rows
            self.unit_node_sq = (norms > 0.0).astype(np.float64)
        if isinstance(x, DenseMatrix):
            self._weights = search
            self._kind = "dense"
        else:
            self._wt = np.ascontiguousarray(search.T)
            self._half_sq = self.node_sq * 0.5  # exact halving
            self._kind = "binary" if isinstance(x, SparseBinaryMatrix) else "value"

    def run(self, bmu1: np.ndarray, bmu2: np.ndarray, dst1: np.ndarray) -> None:
        x = self.x
        if self._kind == "dense":
            wt = self._weights.T
            for i0 in range(0, self.n, DENSE_CHUNK):
                dot = x.values[i0 : i0 + DENSE_CHUNK] @ wt
                _kernels.top2_from_dot(dot, self.node_sq, self.row_sq, i0, bmu1, bmu2, dst1)
        elif self._kind == "binary":
            _kernels.bmu_pass_binary(
                x.offsets, x.indices, self.row_sq, self._half_sq, self._wt, bmu1, bmu2, dst1
            )
        else:
            _kernels.bmu_pass_value(
                x.offsets, x.indices, x.values, self.row_sq, self._half_sq, self._wt,
                bmu1, bmu2, dst1,
            )


def find_bmu_pair(x, cb: Codebook, mode: str = EUCLIDEAN_FULL, workers: int | None = None):
    """Best and second-best node per article plus the best distance.

    Ties break toward the smaller node index; the second unit is the best
    over all nodes other than the first (not the second distinct distance).
    """
    if cb.n_nodes < 2:
        raise ValueError("second-best unit needs at least 2 nodes")
    _kernels.resolve_workers(workers)
    p = _BmuPass(x, cb, mode)
    bmu1 = np.empty(p.n, dtype=np.int64)
    bmu2 = np.empty(p.n, dtype=np.int64)
    dst1 = np.empty(p.n)
    p.run(bmu1, bmu2, dst1)
    return bmu1, bmu2, dst1


def _grid_of(grid) -> tuple[int, int]:
    if isinstance(grid, Codebook):
        return grid.side_x, grid.side_y
    side_x, side_y = grid
    return int(side_x), int(side_y)


def _h_table(side_x: int, side_y: int, sigma: float, cutoff: float | None) -> np.ndarray:
    """Gaussian weight per integer squared grid distance (exact table)."""
    d2 = np.arange((side_x - 1) ** 2 + (side_y - 1) ** 2 + 1, dtype=np.float64)
    htab = np.exp(-d2 / (2.0 * sigma * sigma))
    if cutoff is not None:
        htab[d2 > (cutoff * sigma) ** 2] = 0.0
    return htab


def _accumulate_into(x, bmu1, sigma, side_x, side_y, cutoff, num, den) -> None:
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    m = side_x * side_y
    k = np.arange(m, dtype=np.int64)
    gx, gy = k % side_x, k // side_x
    htab = _h_table(side_x, side_y, sigma, cutoff)
    num[:] = 0.0
    if isinstance(x, DenseMatrix):
        _kernels.accumulate_dense(x.values, bmu1, htab, gx, gy, num, den)
    elif isinstance(x, SparseBinaryMatrix):
        _kernels.accumulate_csr(x.offsets, x.indices, np.empty(0), bmu1, htab, gx, gy, num, den)
    elif isinstance(x, SparseValueMatrix):
        _kernels.accumulate_csr(x.offsets, x.indices, x.values, bmu1, htab, gx, gy, num, den)
    else:
        raise TypeError(f"unsupported input type {type(x).__name__}")


def accumulate_updates(x, bmu1, sigma: float, grid, cutoff: float | None = None):
    """Epoch sums: den[k] = sum_i h(k, bmu_i); num[k] = sum_i h(k, bmu_i) * x_i."""
    side_x, side_y = _grid_of(grid)
    bmu1 = np.ascontiguousarray(bmu1, dtype=np.int64)
    if bmu1.size and (bmu1.min() < 0 or bmu1.max() >= side_x * side_y):
        raise ValueError("bmu1 contains out-of-range node indices")
    num = np.zeros((side_x * side_y, x.n_cols))
    den = np.zeros(side_x * side_y)
    _accumulate_into(x, bmu1, sigma, side_x, side_y, cutoff, num, den)
    return num, den


def apply_updates(cb: Codebook, num: np.ndarray, den: np.ndarray, eps: float = 1e-12) -> Codebook:
    """num/den per node; nodes whose denominator is below eps keep their weights."""
    if num.shape != cb.weights.shape or den.shape != (cb.n_nodes,):
        raise ValueError("num/den shapes do not match the codebook")
    w = np.array(cb.weights)
    live = den >= eps
    w[live] = num[live] / den[live, None]
    return cb.replace_weights(w)


def train_epoch(x, cb: Codebook, cfg: TrainConfig, epoch: int,
                scratch: EpochScratch | None = None,
                workers: int | None = None) -> tuple[Codebook, EpochReport]:
    """One batch epoch: sigma, norms, BMU pass, accumulate, apply, metrics."""
    cfg.validate()
    _check_dims(x, cb)
    if epoch < 1 or epoch > cfg.resolved_epochs():
        raise ValueError(f"epoch {epoch} outside 1..{cfg.resolved_epochs()}")
    _kernels.resolve_workers(workers)
    if scratch is None:
        scratch = EpochScratch.for_instance(x, cb.n_nodes)
    sigma = sigma_at(cfg, epoch)

    t0 = time.perf_counter()
    p = _BmuPass(x, cb, cfg.distance_mode, row_sq=scratch.row_sq_norms)
    scratch.node_sq_norms[:] = p.node_sq if p.unit_node_sq is None else p.unit_node_sq
    p.run(scratch.bmu1, scratch.bmu2, scratch.dst)
    bmu_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    _accumulate_into(x, scratch.bmu1, sigma, cb.side_x, cb.side_y, cfg.cutoff, scratch.num, scratch.den)
    updated = apply_updates(cb, scratch.num, scratch.den, cfg.eps)
    update_seconds = time.perf_counter() - t1

    te = quality.topographic_error(scratch.bmu1, scratch.bmu2, (cb.side_x, cb.side_y), cfg.adjacency_mode)
    if p.unit_node_sq is None:
        qe = float(np.mean(scratch.dst)) if scratch.dst.size else 0.0
    else:
        # reduced distances omit the normalized node norm; add it back so the
        # reported error is a true squared distance (>= 0)
        qe = float(np.mean(scratch.dst + p.unit_node_sq[scratch.bmu1])) if scratch.dst.size else 0.0
    report = EpochReport(
        epoch=epoch,
        sigma=float(sigma),
        quantization_error=max(0.0, qe),
        topographic_error=te,
        bmu_seconds=bmu_seconds,
        update_seconds=update_seconds,
    )
    return updated, report


def train(x, cfg: TrainConfig, initial: Codebook | None = None,
          workers: int | None = None) -> tuple[Codebook, list[EpochReport]]:
    """Run the full schedule; returns the trained codebook and per-epoch reports."""
    cfg.validate()
    if x.n_rows < 1:
        raise ValueError("training input must contain at least one row")
    if initial is None:
        cb = init_codebook(cfg.side_x, cfg.side_y, x.n_cols, cfg.seed)
    else:
        if initial.dim != x.n_cols:
            raise ValueError(f"input has {x.n_cols} columns but initial codebook dim is {initial.dim}")
        if (initial.side_x, initial.side_y) != (cfg.side_x, cfg.side_y):
            raise ValueError("initial codebook grid does not match the configuration")
        cb = initial
    scratch = EpochScratch.for_instance(x, cb.n_nodes)
    reports: list[EpochReport] = []
    for epoch in range(1, cfg.resolved_epochs() + 1):
        cb, report = train_epoch(x, cb, cfg, epoch, scratch=scratch, workers=workers)
        reports.append(report)
    return cb, reports


def write_reports_jsonl(reports, sink) -> None:
    fh, close = (sink, False) if hasattr(sink, "write") else (open(sink, "w", encoding="utf-8"), True)
    try:
        for report in reports:
            fh.write(report.to_json() + "\n")
    finally:
        if close:
            fh.close()
