import numpy as np
import pytest

from cimu.cima_array import Mode
from cimu.errors import ShapeMismatch
from cimu.verify_oracle import (EXACT, SqnrConfig, linearity_sweep, measure_sqnr, reference_mvm,
                                reference_mvm_loops, sqnr_db, sqnr_sweep)


def test_reference_examples():
    assert reference_mvm(np.eye(4, dtype=int), [1, -2, 3, 4]).tolist() == [1, -2, 3, 4]
    assert reference_mvm(np.ones((3, 5), int), np.zeros(5, int)).tolist() == [0, 0, 0]
    assert reference_mvm([[1, 2], [-1, 0], [3, 1]], [2, -1]).tolist() == [0, -2, 5]
    with pytest.raises(ShapeMismatch):
        reference_mvm(np.ones((2, 3)), np.ones(2))


def test_reference_matches_loops(rng):
    A = rng.integers(-128, 128, (7, 300))
    x = rng.integers(-128, 128, 300)
    assert reference_mvm(A, x).tolist() == reference_mvm_loops(A, x)


def test_sqnr_db():
    assert sqnr_db([1, 2], [1, 2]) == EXACT
    assert sqnr_db([10, 0], [9, 0]) == pytest.approx(20.0)


@pytest.mark.parametrize("mode", list(Mode))
def test_exact_at_255(mode):
    assert measure_sqnr(n=255, ba=5, bx=3, mode=mode, trials=20) == EXACT


def test_sparse_xnor_bound_is_exact():
    assert measure_sqnr(n=2304, ba=3, bx=3, mode=Mode.XNOR, sparsity=0.9, trials=16) == EXACT


def test_lossy_is_finite():
    v = measure_sqnr(n=2304, ba=4, bx=4, trials=16)
    assert v != EXACT and np.isfinite(v)


def test_deterministic_and_order_free():
    a = measure_sqnr(n=600, ba=3, bx=2, trials=24, seed=5)
    b = measure_sqnr(SqnrConfig(n=600, ba=3, bx=2, trials=24, seed=5))
    assert a == b
    assert measure_sqnr(n=600, ba=3, bx=2, trials=24, seed=6) != a


def test_curve_text():
    c = sqnr_sweep(n=255, mode=Mode.AND, ba_values=[1, 2], bx_values=[1], trials=4)
    txt = c.to_text()
    assert "estimator=" in txt and txt.strip().splitlines()[-1] == "1\texact\texact"


def test_linearity_adc_identity():
    t = linearity_sweep("adc", 255)
    assert np.array_equal(t.per_column, np.repeat(t.k[:, None], 256, axis=1))
    assert t.sigma.max() == 0


def test_linearity_abn_monotone():
    t = linearity_sweep("abn", 255)
    assert np.all(np.diff(t.mean) >= 0)
    # transition code is the first t with 63*k < t*F
    k = t.k
    assert np.array_equal(t.mean, np.minimum(63 * k // 255 + 1, 64))


def test_linearity_noise_visible():
    t = linearity_sweep("adc", 255, noise_sigma=1.0, ks=[50, 100])
    assert np.all(t.sigma > 0)
