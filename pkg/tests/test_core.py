import io

import numpy as np
import pytest

from sombra.core import (
    Codebook,
    DenseMatrix,
    FormatError,
    SparseBinaryMatrix,
    SparseValueMatrix,
    Vocabulary,
    read_libsvm_text,
    read_sbm1,
    read_somc,
    write_libsvm_text,
    write_sbm1,
    write_somc,
)


class TestFromRows:
    def test_basic(self):
        m = SparseBinaryMatrix.from_rows([{0, 2}, {1}], 3)
        assert m.offsets.tolist() == [0, 2, 3]
        assert m.indices.tolist() == [0, 2, 1]

    def test_empty_row_allowed(self):
        m = SparseBinaryMatrix.from_rows([set()], 5)
        assert m.offsets.tolist() == [0, 0]
        assert m.indices.tolist() == []

    def test_dedup_and_sort(self):
        m = SparseBinaryMatrix.from_rows([[2, 2, 0]], 3)
        assert m.offsets.tolist() == [0, 2]
        assert m.indices.tolist() == [0, 2]

    def test_out_of_range_names_row_and_id(self):
        with pytest.raises(ValueError, match=r"row 1.*9"):
            SparseBinaryMatrix.from_rows([{0}, {9}], 4)

    def test_negative_id_rejected(self):
        with pytest.raises(ValueError, match="row 0"):
            SparseBinaryMatrix.from_rows([[-1]], 4)

    def test_row_lengths(self):
        m = SparseBinaryMatrix.from_rows([{0, 1, 2}, set(), {3}], 4)
        assert m.row_lengths().tolist() == [3, 0, 1]
        assert m.nnz == 4


class TestCsrInvariants:
    def test_bad_offsets_rejected(self):
        with pytest.raises(ValueError):
            SparseBinaryMatrix(2, 3, np.array([0, 2, 1]), np.array([0, 1], dtype=np.uint32))

    def test_unsorted_row_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SparseBinaryMatrix(1, 3, np.array([0, 2]), np.array([2, 0], dtype=np.uint32))

    def test_duplicate_in_row_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SparseBinaryMatrix(1, 3, np.array([0, 2]), np.array([1, 1], dtype=np.uint32))

    def test_trailing_empty_rows(self):
        m = SparseBinaryMatrix(3, 2, np.array([0, 1, 1, 1]), np.array([0], dtype=np.uint32))
        assert m.row_lengths().tolist() == [1, 0, 0]

    def test_buffers_read_only(self):
        m = SparseBinaryMatrix.from_rows([{0}], 2)
        with pytest.raises(ValueError):
            m.indices[0] = 1


class TestDense:
    def test_to_dense(self):
        m = SparseBinaryMatrix(2, 3, np.array([0, 2, 3]), np.array([0, 2, 1], dtype=np.uint32))
        assert m.to_dense().values.tolist() == [[1, 0, 1], [0, 1, 0]]

    def test_empty_matrix(self):
        m = SparseBinaryMatrix.from_rows([], 4)
        d = m.to_dense()
        assert d.values.shape == (0, 4)

    def test_round_trip_random(self, rng):
        rows = [set(rng.choice(50, size=rng.integers(0, 8), replace=False).tolist()) for _ in range(100)]
        m = SparseBinaryMatrix.from_rows(rows, 50)
        dense = m.to_dense()
        back = SparseBinaryMatrix.from_rows(
            [set(np.nonzero(r)[0].tolist()) for r in dense.values], 50
        )
        assert np.array_equal(back.offsets, m.offsets)
        assert np.array_equal(back.indices, m.indices)

    def test_dense_matrix_validation(self):
        with pytest.raises(ValueError):
            DenseMatrix(2, 2, np.array([[1.0, 2.0]]))
        with pytest.raises(ValueError):
            DenseMatrix(1, 2, np.array([[np.nan, 0.0]]))


class TestValueMatrix:
    def test_from_binary_unit_values(self):
        m = SparseBinaryMatrix(2, 3, np.array([0, 2, 3]), np.array([0, 2, 1], dtype=np.uint32))
        v = SparseValueMatrix.from_binary(m)
        assert v.values.tolist() == [1.0, 1.0, 1.0]
        assert np.array_equal(v.offsets, m.offsets)
        assert np.array_equal(v.indices, m.indices)

    def test_from_binary_empty(self):
        v = SparseValueMatrix.from_binary(SparseBinaryMatrix.from_rows([], 2))
        assert v.values.size == 0

    def test_structure_preserved(self, rng):
        rows = [set(rng.choice(20, size=5, replace=False).tolist()) for _ in range(30)]
        m = SparseBinaryMatrix.from_rows(rows, 20)
        v = SparseValueMatrix.from_binary(m)
        assert v.row_lengths().tolist() == m.row_lengths().tolist()

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            SparseValueMatrix(1, 2, np.array([0, 1]), np.array([0], dtype=np.uint32),
                              np.array([np.inf]))


class TestSbm1Format:
    def test_exact_byte_count(self):
        # header: 4 magic + 4 version + 8 rows + 4 cols + 8 nnz = 28 bytes,
        # then 3 x 8 offset bytes and 3 x 4 index bytes
        m = SparseBinaryMatrix(2, 3, np.array([0, 2, 3]), np.array([0, 2, 1], dtype=np.uint32))
        buf = io.BytesIO()
        write_sbm1(m, buf)
        assert len(buf.getvalue()) == 28 + 24 + 12 == 64

    def test_round_trip(self, rng):
        rows = [set(rng.choice(64, size=rng.integers(0, 10), replace=False).tolist()) for _ in range(40)]
        m = SparseBinaryMatrix.from_rows(rows, 64)
        buf = io.BytesIO()
        write_sbm1(m, buf)
        buf.seek(0)
        back = read_sbm1(buf)
        assert back.n_rows == m.n_rows and back.n_cols == m.n_cols
        assert np.array_equal(back.offsets, m.offsets)
        assert np.array_equal(back.indices, m.indices)

    def test_bad_magic(self):
        buf = io.BytesIO(b"NOPE" + b"\x00" * 60)
        with pytest.raises(FormatError, match="magic"):
            read_sbm1(buf)

    def test_truncated(self):
        m = SparseBinaryMatrix.from_rows([{0, 1}], 3)
        buf = io.BytesIO()
        write_sbm1(m, buf)
        data = buf.getvalue()[:-3]
        with pytest.raises(FormatError, match="truncated"):
            read_sbm1(io.BytesIO(data))

    def test_non_monotone_offsets_is_error_not_crash(self):
        m = SparseBinaryMatrix.from_rows([{0}, {1}], 3)
        buf = io.BytesIO()
        write_sbm1(m, buf)
        raw = bytearray(buf.getvalue())
        # offsets start at byte 28; corrupt the middle offset to 200
        raw[36:44] = (200).to_bytes(8, "little")
        with pytest.raises(FormatError):
            read_sbm1(io.BytesIO(bytes(raw)))

    def test_file_path_round_trip(self, tmp_path):
        m = SparseBinaryMatrix.from_rows([{1}], 2)
        path = tmp_path / "t.sbm1"
        write_sbm1(m, path)
        back = read_sbm1(path)
        assert np.array_equal(back.indices, m.indices)


class TestSomcFormat:
    def test_round_trip_single_precision(self, rng):
        w = rng.random((12, 5))
        cb = Codebook(4, 3, 5, w)
        buf = io.BytesIO()
        write_somc(cb, buf)
        assert len(buf.getvalue()) == 20 + 12 * 5 * 4
        buf.seek(0)
        back = read_somc(buf)
        assert (back.side_x, back.side_y, back.dim) == (4, 3, 5)
        assert np.array_equal(back.weights, w.astype(np.float32).astype(np.float64))

    def test_bad_magic(self):
        with pytest.raises(FormatError, match="magic"):
            read_somc(io.BytesIO(b"XXXX" + b"\x00" * 16))


class TestLibsvm:
    def test_one_based(self):
        m, labels = read_libsvm_text(io.StringIO("0 1:1 3:1\n"), 4)
        assert m.row(0)[0].tolist() == [0, 2]
        assert labels == ["0"]

    def test_value_retained(self):
        m, _ = read_libsvm_text(io.StringIO("1 2:0.5\n"), 4)
        assert m.row(0)[1].tolist() == [0.5]

    def test_out_of_range_names_line(self):
        with pytest.raises(FormatError, match="line 1"):
            read_libsvm_text(io.StringIO("0 9:1\n"), 4)

    def test_malformed_token_names_line(self):
        with pytest.raises(FormatError, match="line 2"):
            read_libsvm_text(io.StringIO("0 1:1\n0 junk\n"), 4)

    def test_zero_based(self):
        m, _ = read_libsvm_text(io.StringIO("0 0:2 3:4\n"), 4, one_based=False)
        assert m.row(0)[0].tolist() == [0, 3]

    def test_duplicate_index_rejected(self):
        with pytest.raises(FormatError, match="duplicate"):
            read_libsvm_text(io.StringIO("0 1:1 1:2\n"), 4)

    def test_round_trip(self, rng):
        rows = [set(rng.choice(9, size=3, replace=False).tolist()) for _ in range(5)]
        m = SparseValueMatrix.from_binary(SparseBinaryMatrix.from_rows(rows, 9))
        buf = io.StringIO()
        write_libsvm_text(m, buf)
        buf.seek(0)
        back, _ = read_libsvm_text(buf, 9)
        assert np.array_equal(back.indices, m.indices)
        assert np.array_equal(back.values, m.values)


class TestCodebook:
    def test_grid_positions(self):
        cb = Codebook(3, 2, 1, np.zeros((6, 1)))
        assert cb.node_position(0) == (0, 0)
        assert cb.node_position(4) == (1, 1)
        gx, gy = cb.grid_coords()
        assert gx.tolist() == [0, 1, 2, 0, 1, 2]
        assert gy.tolist() == [0, 0, 0, 1, 1, 1]

    def test_single_node_rejected(self):
        with pytest.raises(ValueError):
            Codebook(1, 1, 3, np.zeros((1, 3)))


class TestVocabulary:
    def test_duplicate_rejected(self):
        with pytest.raises(ValueError):
            Vocabulary(("D1", "D1"))

    def test_lookup(self):
        v = Vocabulary(("D000001", "D012345"))
        assert len(v) == 2
        assert v.column_of("D012345") == 1
        assert "D000001" in v
