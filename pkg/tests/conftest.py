import os

# Launch a small thread pool even on single-core runners so worker-count
# determinism can actually vary the count.  Must happen before numba loads.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import numpy as np  # noqa: E402
import pytest  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jit kernels once so per-test timings stay honest."""
    from sombra.engine import TrainConfig, train
    from sombra.ingest import synth_generate

    x = synth_generate(40, 12, nnz_low=1, nnz_high=4, seed=0)
    train(x, TrainConfig(2, 2, epochs=1, seed=0))
    xd = x.to_dense()
    train(xd, TrainConfig(2, 2, epochs=1, seed=0))
    from sombra.core import SparseValueMatrix

    train(SparseValueMatrix.from_binary(x), TrainConfig(2, 2, epochs=1, seed=0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
