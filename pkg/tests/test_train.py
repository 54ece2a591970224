import hashlib
import io

import numpy as np
import pytest

from sombra.core import SparseBinaryMatrix, SparseValueMatrix, write_somc
from sombra.engine import (
    NORMALIZED_REDUCED,
    EpochScratch,
    TrainConfig,
    find_bmu_pair,
    init_codebook,
    train,
    train_epoch,
    write_reports_jsonl,
)
from sombra.ingest import synth_generate
from sombra.quality import quantization_error

from oracles import reference_epoch


def small_instance(seed, n=120, d=24, side=5):
    x = synth_generate(n, d, nnz_low=2, nnz_high=6, seed=seed)
    cfg = TrainConfig(side, side, epochs=4, seed=seed + 1)
    return x, cfg


class TestTrainEpoch:
    def test_matches_naive_reference(self, rng):
        x, cfg = small_instance(5)
        cb = init_codebook(5, 5, 24, seed=9)
        scratch = EpochScratch.for_instance(x, cb.n_nodes)
        out, report = train_epoch(x, cb, cfg, 1, scratch=scratch)
        sigma = cfg.resolved_sigma0() / cfg.decay
        ref_w, e1, e2, ed = reference_epoch(x.to_dense().values, cb.weights, sigma, 5, 5)
        assert np.array_equal(scratch.bmu1, e1)
        assert np.array_equal(scratch.bmu2, e2)
        np.testing.assert_allclose(scratch.dst, ed, atol=1e-9)
        np.testing.assert_allclose(out.weights, ref_w, atol=1e-12)
        assert report.sigma == pytest.approx(sigma)

    def test_bit_identical_across_runs(self):
        x, cfg = small_instance(11)
        cb = init_codebook(5, 5, 24, seed=2)
        a, _ = train_epoch(x, cb, cfg, 1)
        b, _ = train_epoch(x, cb, cfg, 1)
        assert np.array_equal(a.weights, b.weights)

    def test_epoch_out_of_schedule_rejected(self):
        x, cfg = small_instance(3)
        cb = init_codebook(5, 5, 24, seed=2)
        with pytest.raises(ValueError, match="epoch"):
            train_epoch(x, cb, cfg, 5)

    def test_normalized_reduced_mode_trains(self):
        x, _ = small_instance(7)
        cfg = TrainConfig(5, 5, epochs=3, seed=1, distance_mode=NORMALIZED_REDUCED)
        cb, reports = train(x, cfg)
        assert len(reports) == 3
        for r in reports:
            assert r.quantization_error >= 0.0
            assert 0.0 <= r.topographic_error <= 1.0
        assert np.all(cb.weights >= 0.0) and np.all(cb.weights <= 1.0 + 1e-12)


class TestTrain:
    def test_k1_equals_single_epoch_call(self):
        x, _ = small_instance(13)
        cfg = TrainConfig(5, 5, epochs=1, seed=4)
        cb0 = init_codebook(5, 5, 24, seed=4)
        via_train, reports = train(x, cfg)
        via_epoch, _ = train_epoch(x, cb0, cfg, 1)
        assert len(reports) == 1
        assert np.array_equal(via_train.weights, via_epoch.weights)

    def test_reports_have_strictly_decreasing_sigma(self):
        x, cfg = small_instance(17)
        _, reports = train(x, cfg)
        sigmas = [r.sigma for r in reports]
        assert len(reports) == cfg.resolved_epochs()
        assert all(b < a for a, b in zip(sigmas, sigmas[1:]))

    def test_dimension_mismatch_names_both(self):
        x, cfg = small_instance(19)
        bad = init_codebook(5, 5, 99, seed=0)
        with pytest.raises(ValueError, match="24.*99"):
            train(x, cfg, initial=bad)

    def test_cross_backend_bmu_and_codebook_agreement(self):
        # same init: the three backends must assign identical unit pairs every
        # epoch and land on codebooks equal within 1e-4 relative
        sbm, cfg = small_instance(23, n=400, d=60, side=6)
        cfg = TrainConfig(6, 6, epochs=4, seed=31)
        backends = {
            "binary": sbm,
            "value": SparseValueMatrix.from_binary(sbm),
            "dense": sbm.to_dense(),
        }
        codebooks = {k: init_codebook(6, 6, 60, seed=77) for k in backends}
        scratches = {k: EpochScratch.for_instance(x, 36) for k, x in backends.items()}
        for epoch in range(1, 5):
            outs = {}
            for k, x in backends.items():
                codebooks[k], _ = train_epoch(x, codebooks[k], cfg, epoch, scratch=scratches[k])
                outs[k] = (scratches[k].bmu1.copy(), scratches[k].bmu2.copy())
            assert np.array_equal(outs["binary"][0], outs["value"][0])
            assert np.array_equal(outs["binary"][0], outs["dense"][0])
            assert np.array_equal(outs["binary"][1], outs["value"][1])
            assert np.array_equal(outs["binary"][1], outs["dense"][1])
        w_bin = codebooks["binary"].weights
        np.testing.assert_allclose(codebooks["value"].weights, w_bin, rtol=1e-4)
        np.testing.assert_allclose(codebooks["dense"].weights, w_bin, rtol=1e-4)

    def test_quantization_error_drops_on_clustered_data(self):
        x = synth_generate(600, 80, seed=41, clusters=4)
        cfg = TrainConfig(8, 8, epochs=6, seed=5)
        cb0 = init_codebook(8, 8, 80, seed=5)
        trained, _ = train(x, cfg)
        _, _, d0 = find_bmu_pair(x, cb0)
        _, _, d1 = find_bmu_pair(x, trained)
        assert quantization_error(d1) < quantization_error(d0)

    def test_empty_input_rejected(self):
        x = SparseBinaryMatrix.from_rows([], 8)
        with pytest.raises(ValueError, match="at least one row"):
            train(x, TrainConfig(3, 3, epochs=2))


class TestReports:
    def test_jsonl_shape(self, tmp_path):
        x, cfg = small_instance(29)
        _, reports = train(x, cfg)
        buf = io.StringIO()
        write_reports_jsonl(reports, buf)
        lines = buf.getvalue().strip().splitlines()
        assert len(lines) == len(reports)
        import json

        first = json.loads(lines[0])
        assert set(first) == {"epoch", "sigma", "quantization_error", "topographic_error",
                              "bmu_seconds", "update_seconds"}


class TestGolden:
    # frozen from the first verified build of this engine (binary backend,
    # single-precision persisted form); guards against silent numeric drift
    GOLDEN_SHA256 = "f0b5df2bc35e54f79bcd55b203f8f2b491c83ef5264317647e4644b54836fc4d"

    def test_reference_run_reproduces_archived_hash(self):
        x = synth_generate(2000, 200, seed=42)
        cfg = TrainConfig(20, 20, epochs=5, seed=42)
        cb, _ = train(x, cfg)
        buf = io.BytesIO()
        write_somc(cb, buf)
        digest = hashlib.sha256(buf.getvalue()).hexdigest()
        assert digest == self.GOLDEN_SHA256
