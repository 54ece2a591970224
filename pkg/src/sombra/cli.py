"""Command-line entry point: gen, ingest, train, quality, estimate, bench, export.

Everything reads and writes files or stdout; nothing needs a terminal.  Exit
codes: 0 success, 1 runtime/IO/parse failure (one-line error on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench as bench_mod
from . import memmodel, quality
from .core import (
    FormatError,
    SparseBinaryMatrix,
    SparseValueMatrix,
    Vocabulary,
    read_sbm1,
    read_somc,
    write_sbm1,
    write_somc,
)
from .engine import TrainConfig, find_bmu_pair, train, write_reports_jsonl
from .ingest import load_vocab, parse_medline_xml, save_vocab, synth_generate


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        sx, sy = text.lower().split("x")
        return int(sx), int(sy)
    except ValueError as exc:
        raise ValueError(f"grid must look like WxH, got {text!r}") from exc


def parse_sweep_spec(spec: str) -> dict[str, list[int]]:
    """Parse `N=10000,100000;D=1000:5000:3;M=2500` into value lists.

    Comma-separated values; `lo:hi:count` expands to a linear range.
    """
    out: dict[str, list[int]] = {}
    for clause in spec.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        key, sep, body = clause.partition("=")
        if not sep or not body:
            raise ValueError(f"bad sweep clause {clause!r}")
        values: list[int] = []
        for item in body.split(","):
            item = item.strip()
            if ":" in item:
                lo_s, hi_s, cnt_s = item.split(":")
                pts = np.linspace(float(lo_s), float(hi_s), int(cnt_s))
                values.extend(int(round(v)) for v in pts)
            else:
                values.append(int(float(item)))
        out[key.strip().upper()] = values
    return out


def _out_stream(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _cmd_gen(args) -> int:
    m = synth_generate(args.n, args.d, nnz_low=args.nnz_low, nnz_high=args.nnz_high,
                       seed=args.seed, clusters=args.clusters,
                       cluster_overlap=args.cluster_overlap)
    write_sbm1(m, args.output)
    return 0


def _cmd_ingest(args) -> int:
    fixed_vocab = load_vocab(args.vocab) if args.vocab else None
    parses = [parse_medline_xml(path, vocab=fixed_vocab) for path in args.xml]
    if fixed_vocab is not None:
        vocab = fixed_vocab
    else:
        vocab = Vocabulary(tuple(sorted({t for p in parses for t in p.vocab.terms})))
    pmids: list[str] = []
    seen: set[str] = set()
    rows: list[list[int]] = []
    dropped = sum(p.dropped_unknown for p in parses)
    for parsed in parses:
        for i, pmid in enumerate(parsed.pmids):
            if pmid in seen:
                continue
            seen.add(pmid)
            pmids.append(pmid)
            cols = parsed.matrix.row(i)
            if fixed_vocab is None:
                rows.append([vocab.index[parsed.vocab.terms[c]] for c in cols])
            else:
                rows.append([int(c) for c in cols])
    matrix = SparseBinaryMatrix.from_rows(rows, len(vocab))
    write_sbm1(matrix, args.output)
    vocab_out = args.vocab_out or (args.output + ".vocab.txt")
    pmids_out = args.pmids_out or (args.output + ".pmids.txt")
    save_vocab(vocab, vocab_out)
    with open(pmids_out, "w", encoding="utf-8") as fh:
        for pmid in pmids:
            fh.write(pmid + "\n")
    print(f"ingested {matrix.n_rows} articles, {len(vocab)} terms, "
          f"{matrix.nnz} stored elements, {dropped} unknown dropped")
    return 0


def _cmd_train(args) -> int:
    sbm = read_sbm1(args.input)
    if args.d is not None and args.d != sbm.n_cols:
        raise ValueError(f"--d {args.d} does not match file column count {sbm.n_cols}")
    if args.backend == "binary":
        x = sbm
    elif args.backend == "sparse":
        x = SparseValueMatrix.from_binary(sbm)
    else:
        x = sbm.to_dense()
    side_x, side_y = _parse_grid(args.grid)
    cfg = TrainConfig(
        side_x=side_x,
        side_y=side_y,
        epochs=args.epochs,
        decay=args.decay,
        sigma0=args.sigma0,
        distance_mode=args.distance_mode,
        adjacency_mode=args.adjacency,
        cutoff=args.cutoff,
        seed=args.seed,
        deterministic_reduction=args.deterministic,
    )
    cb, reports = train(x, cfg, workers=args.workers)
    write_somc(cb, args.output)
    if args.report:
        write_reports_jsonl(reports, args.report)
    last = reports[-1]
    print(f"trained {len(reports)} epochs on {x.n_rows} articles: "
          f"quantization_error={last.quantization_error:.6g} "
          f"topographic_error={last.topographic_error:.6g}")
    return 0


def _cmd_quality(args) -> int:
    sbm = read_sbm1(args.input)
    cb = read_somc(args.codebook)
    if sbm.n_cols != cb.dim:
        raise ValueError(f"matrix has {sbm.n_cols} columns but codebook dim is {cb.dim}")
    bmu1, bmu2, dst1 = find_bmu_pair(sbm, cb, workers=args.workers)
    grid = (cb.side_x, cb.side_y)
    report = quality.QualityReport(
        topographic_error=quality.topographic_error(bmu1, bmu2, grid, args.adjacency),
        quantization_error=quality.quantization_error(dst1),
        n_articles=sbm.n_rows,
    )
    print(report.to_json())
    if args.umatrix:
        quality.write_grid_csv(quality.umatrix(cb).values, cb.side_x, cb.side_y, args.umatrix)
    if args.density:
        quality.write_grid_csv(quality.bmu_density(bmu1, grid), cb.side_x, cb.side_y, args.density)
    return 0


def _cmd_estimate(args) -> int:
    spec = parse_sweep_spec(args.sweep)
    for key in ("N", "D", "M"):
        if key not in spec:
            raise ValueError(f"sweep spec must define {key}")
    algorithms = args.algorithms.split(",") if args.algorithms else list(memmodel.ALGORITHMS)
    rows = memmodel.sweep(args.budget, spec["N"], spec["D"], spec["M"], algorithms,
                          avg_nnz=args.avg_nnz, storage_only=args.storage_only)
    fh, close = _out_stream(args.output)
    try:
        memmodel.write_sweep_csv(rows, fh)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_bench(args) -> int:
    spec = parse_sweep_spec(args.sweep)
    for key in ("N", "D", "M"):
        if key not in spec:
            raise ValueError(f"sweep spec must define {key}")
    backends = args.backends.split(",")
    avg_nnz = float(spec["NNZ"][0]) if "NNZ" in spec else args.avg_nnz
    rows = bench_mod.bench_sweep(spec["N"], spec["D"], spec["M"], backends,
                                 reps=args.reps, avg_nnz=avg_nnz,
                                 budget_bytes=args.budget, workers=args.workers,
                                 seed=args.seed)
    fh, close = _out_stream(args.output)
    try:
        bench_mod.write_bench_csv(rows, fh)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_export(args) -> int:
    if args.format != "csv":
        raise ValueError(f"unsupported export format {args.format!r}")
    cb = read_somc(args.codebook)
    fh, close = _out_stream(args.output)
    try:
        fh.write(f"# side_x={cb.side_x} side_y={cb.side_y} dim={cb.dim}\n")
        for k in range(cb.n_nodes):
            fh.write(",".join(repr(float(v)) for v in cb.weights[k]) + "\n")
    finally:
        if close:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sombra",
                                     description="Batch SOM training, quality metrics and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic index-only matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nnz-low", type=int, default=5)
    p.add_argument("--nnz-high", type=int, default=15)
    p.add_argument("--clusters", type=int, default=None)
    p.add_argument("--cluster-overlap", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("ingest", help="parse Medline baseline XML into a matrix")
    p.add_argument("xml", nargs="+")
    p.add_argument("--vocab", default=None, help="existing vocabulary file to index against")
    p.add_argument("--vocab-out", default=None)
    p.add_argument("--pmids-out", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("train", help="train a codebook")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--backend", choices=("dense", "sparse", "binary"), default="binary")
    p.add_argument("--grid", required=True, help="grid size as WxH, e.g. 20x20")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma0", type=float, default=None)
    p.add_argument("--decay", type=float, default=1.7)
    p.add_argument("--distance-mode", choices=("euclidean_full", "normalized_reduced"),
                   default="euclidean_full")
    p.add_argument("--adjacency", choices=("manhattan1", "chebyshev1"), default="manhattan1")
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--d", type=int, default=None, help="expected column count (checked against the file)")
    p.add_argument("--report", default=None, help="write per-epoch reports as JSON lines")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("quality", help="evaluate a codebook against a matrix")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-c", "--codebook", required=True)
    p.add_argument("--adjacency", choices=("manhattan1", "chebyshev1"), default="manhattan1")
    p.add_argument("--umatrix", default=None, help="write the U-matrix CSV here")
    p.add_argument("--density", default=None, help="write the BMU density CSV here")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_quality)

    p = sub.add_parser("estimate", help="memory-footprint sweep as CSV")
    p.add_argument("--budget", type=int, default=None, help="fit budget in bytes")
    p.add_argument("--sweep", required=True, help='e.g. "N=10000,100000;D=1000,5000;M=2500"')
    p.add_argument("--algorithms", default=None, help="comma list of dense,sparse,binary")
    p.add_argument("--avg-nnz", type=float, default=10.0)
    p.add_argument("--storage-only", action="store_true",
                   help="fit articles+codebook only (figure-style storage accounting)")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("bench", help="time BMU cycles over a sweep, emit CSV")
    p.add_argument("--sweep", required=True)
    p.add_argument("--backends", default="binary,sparse")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--budget", type=int, default=bench_mod.DEFAULT_BUDGET)
    p.add_argument("--avg-nnz", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("export", help="export a codebook")
    p.add_argument("-c", "--codebook", required=True)
    p.add_argument("--format", default="csv")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_export)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (FormatError, ValueError, TypeError, OSError, MemoryError) as exc:
        print(f"sombra: error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return dispatch()


if __name__ == "__main__":
    sys.exit(main())
