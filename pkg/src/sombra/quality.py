"""Map-quality metrics and plot-ready grid exports.

Pure functions over immutable inputs.  Adjacency defaults to the 4-neighbor
(Manhattan radius 1) reading; the conventional 8-neighbor variant is offered
as chebyshev1.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .core import Codebook, DenseMatrix

ADJACENCY_MODES = ("manhattan1", "chebyshev1")


@dataclass
class QualityReport:
    topographic_error: float
    quantization_error: float
    n_articles: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _coords(nodes: np.ndarray, side_x: int) -> tuple[np.ndarray, np.ndarray]:
    nodes = np.asarray(nodes, dtype=np.int64)
    return nodes % side_x, nodes // side_x


def adjacent(k1: int, k2: int, grid, mode: str = "manhattan1") -> bool:
    """Whether two node indices are grid neighbors (a node neighbors itself)."""
    return bool(adjacency_mask(np.array([k1]), np.array([k2]), grid, mode)[0])


def adjacency_mask(bmu1, bmu2, grid, mode: str = "manhattan1") -> np.ndarray:
    side_x, side_y = int(grid[0]), int(grid[1])
    b1 = np.asarray(bmu1, dtype=np.int64)
    b2 = np.asarray(bmu2, dtype=np.int64)
    for arr in (b1, b2):
        if arr.size and (arr.min() < 0 or arr.max() >= side_x * side_y):
            raise ValueError("node index out of range for the grid")
    x1, y1 = _coords(b1, side_x)
    x2, y2 = _coords(b2, side_x)
    dx = np.abs(x1 - x2)
    dy = np.abs(y1 - y2)
    if mode == "manhattan1":
        return dx + dy <= 1
    if mode == "chebyshev1":
        return np.maximum(dx, dy) <= 1
    raise ValueError(f"unknown adjacency mode {mode!r}")


def topographic_error(bmu1, bmu2, grid, mode: str = "manhattan1") -> float:
    """Fraction of articles whose best and second-best units are not adjacent."""
    b1 = np.asarray(bmu1)
    if b1.size == 0:
        raise ValueError("topographic error of an empty assignment is undefined")
    mask = adjacency_mask(bmu1, bmu2, grid, mode)
    return float(np.count_nonzero(~mask)) / b1.size


def quantization_error(dst1) -> float:
    """Mean best distance over all articles."""
    d = np.asarray(dst1, dtype=np.float64)
    if d.size == 0:
        raise ValueError("quantization error of an empty assignment is undefined")
    return float(d.mean())


def umatrix(cb: Codebook) -> DenseMatrix:
    """Mean Euclidean distance from each node to its 4-neighborhood.

    Edge nodes average over the neighbors that exist.  Returned as a
    side_y x side_x grid matching the node layout.
    """
    sy, sx = cb.side_y, cb.side_x
    w = cb.weights.reshape(sy, sx, cb.dim)
    acc = np.zeros((sy, sx))
    cnt = np.zeros((sy, sx))
    if sx > 1:
        dh = np.linalg.norm(w[:, 1:, :] - w[:, :-1, :], axis=2)
        acc[:, 1:] += dh
        acc[:, :-1] += dh
        cnt[:, 1:] += 1
        cnt[:, :-1] += 1
    if sy > 1:
        dv = np.linalg.norm(w[1:, :, :] - w[:-1, :, :], axis=2)
        acc[1:, :] += dv
        acc[:-1, :] += dv
        cnt[1:, :] += 1
        cnt[:-1, :] += 1
    out = np.divide(acc, cnt, out=np.zeros_like(acc), where=cnt > 0)
    return DenseMatrix(sy, sx, out)


def bmu_density(bmu1, grid) -> np.ndarray:
    """Article count per node as a side_y x side_x integer grid."""
    side_x, side_y = int(grid[0]), int(grid[1])
    b1 = np.asarray(bmu1, dtype=np.int64)
    if b1.size and (b1.min() < 0 or b1.max() >= side_x * side_y):
        raise ValueError("node index out of range for the grid")
    counts = np.bincount(b1, minlength=side_x * side_y)
    return counts.reshape(side_y, side_x)


def write_grid_csv(grid2d: np.ndarray, side_x: int, side_y: int, sink) -> None:
    """Row-major CSV with a `# side_x=.. side_y=..` header line."""
    fh, close = (sink, False) if hasattr(sink, "write") else (open(sink, "w", encoding="utf-8"), True)
    try:
        fh.write(f"# side_x={side_x} side_y={side_y}\n")
        for row in np.asarray(grid2d):
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row.tolist()) + "\n")
    finally:
        if close:
            fh.close()
