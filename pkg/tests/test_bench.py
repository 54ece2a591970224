import io

import numpy as np
import pytest

from sombra.bench import (
    BenchResult,
    bench_sweep,
    bmu_checksum,
    time_bmu_cycle,
    write_bench_csv,
)
from sombra.core import SparseValueMatrix
from sombra.engine import find_bmu_pair, init_codebook
from sombra.ingest import synth_generate
from sombra.memmodel import MIB


@pytest.fixture(scope="module")
def tiny_instance():
    x = synth_generate(300, 60, seed=3)
    cb = init_codebook(5, 5, 60, seed=4)
    return x, cb


class TestTimeBmuCycle:
    def test_result_fields(self, tiny_instance):
        x, cb = tiny_instance
        res = time_bmu_cycle("binary", x, cb, reps=3)
        assert res.backend == "binary"
        assert (res.n, res.d, res.m) == (300, 60, 25)
        assert res.reps == 3
        assert res.min_seconds <= res.median_seconds
        assert res.ns_per_article_node > 0
        assert res.avg_nnz == pytest.approx(x.nnz / x.n_rows)

    def test_checksum_matches_engine_pass(self, tiny_instance):
        x, cb = tiny_instance
        res = time_bmu_cycle("binary", x, cb, reps=3)
        bmu1, bmu2, _ = find_bmu_pair(x, cb)
        assert res.checksum == bmu_checksum(bmu1, bmu2)

    def test_all_backends_same_checksum(self, tiny_instance):
        x, cb = tiny_instance
        r_bin = time_bmu_cycle("binary", x, cb, reps=3)
        r_val = time_bmu_cycle("sparse", SparseValueMatrix.from_binary(x), cb, reps=3)
        r_dense = time_bmu_cycle("dense", x.to_dense(), cb, reps=3)
        assert r_bin.checksum == r_val.checksum == r_dense.checksum

    def test_repeat_medians_close(self, tiny_instance):
        # informational run-to-run noise check, deliberately generous
        x, cb = tiny_instance
        a = time_bmu_cycle("binary", x, cb, reps=5)
        b = time_bmu_cycle("binary", x, cb, reps=5)
        assert a.checksum == b.checksum

    def test_backend_input_mismatch(self, tiny_instance):
        x, cb = tiny_instance
        with pytest.raises(ValueError, match="expects"):
            time_bmu_cycle("dense", x, cb, reps=3)

    def test_too_few_reps(self, tiny_instance):
        x, cb = tiny_instance
        with pytest.raises(ValueError, match=">= 3"):
            time_bmu_cycle("binary", x, cb, reps=2)

    def test_result_invariant_validation(self):
        with pytest.raises(ValueError):
            BenchResult("binary", 1, 1, 4, 1.0, 2, 1, 1.0, 0.5, 1.0, 0)
        with pytest.raises(ValueError):
            BenchResult("binary", 1, 1, 4, 1.0, 3, 1, 0.5, 1.0, 1.0, 0)


class TestBenchSweep:
    def test_rows_for_every_cell(self):
        rows = bench_sweep([100, 200], [30], [4], ["binary", "sparse"], reps=3, avg_nnz=5)
        assert len(rows) == 2 * 1 * 1 * 2
        assert all(not r.skipped and r.result is not None for r in rows)

    def test_over_budget_cell_becomes_marker_row(self):
        rows = bench_sweep([100], [30], [4], ["dense"], reps=3, avg_nnz=5,
                           budget_bytes=1)  # nothing fits in one byte
        assert len(rows) == 1
        assert rows[0].skipped and rows[0].result is None
        assert not rows[0].estimate.fits

    def test_non_square_node_count_rejected(self):
        with pytest.raises(ValueError, match="square"):
            bench_sweep([10], [30], [7], ["binary"], reps=3, avg_nnz=5)

    def test_csv_schema(self):
        rows = bench_sweep([100], [30], [4], ["binary"], reps=3, avg_nnz=5,
                           budget_bytes=64 * MIB)
        rows += bench_sweep([100], [30], [4], ["dense"], reps=3, avg_nnz=5, budget_bytes=1)
        buf = io.StringIO()
        write_bench_csv(rows, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0].startswith("algorithm,N,D,M,avg_nnz,articles_bytes")
        assert lines[0].endswith("median_seconds,min_seconds,ns_per_article_node,skipped")
        assert lines[1].endswith(",false")
        assert lines[2].endswith(",true")
        assert len(lines[1].split(",")) == len(lines[0].split(","))
        assert len(lines[2].split(",")) == len(lines[0].split(","))
