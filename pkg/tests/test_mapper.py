import numpy as np
import pytest
from hypothesis import given, strategies as st

from cimu.cima_array import Mode
from cimu.converters import DAC_MAX
from cimu.errors import PlanError, ShapeMismatch, UnsupportedKernel
from cimu.mapper import (BatchNormParams, Layer, NetworkGraph, choose_full_scale, conv_channel_tiles,
                         flatten_conv_weights, fold_batchnorm, lower_conv3, lower_fc, lower_network,
                         network_plans, tile_cols, tile_rows)
from cimu.near_mem import run_post_ops
from cimu.numfmt import Kind

X, T = Kind.XNOR_SIGNED, Kind.TWOS_COMPLEMENT


def conv(c_out, ba=1, bx=1, fmt=X, **kw):
    return Layer("CONV3", c_out, ba, bx, fmt, **kw)


def test_conv_128_to_128():
    plans = lower_conv3(conv(128), (32, 32, 128))
    assert len(plans) == 1
    p = plans[0]
    assert (p.n_rows, p.m_logical, p.row_quanta, p.n_conf) == (1152, 128, 2, 1152)
    assert p.n_mvm == 32 * 32 and p.stride_reuse


def test_conv_256_full_array():
    (p,) = lower_conv3(conv(256), (8, 8, 256))
    assert (p.n_rows, p.m_logical, p.active_columns) == (2304, 256, 256)
    assert not p.extension


def test_conv_4b_splits_columns():
    plans = lower_conv3(conv(128, 4, 4, T), (8, 8, 64))
    assert [p.col_range for p in plans] == [(0, 64), (64, 128)]
    assert sum(p.matrix_segments for p in plans) == 2 * 192


def test_conv_stride_reuse_words():
    (p,) = lower_conv3(conv(16, pad=1), (6, 6, 128))
    # per output row: one full 9C window, then 3C per step
    assert p.input_words == 6 * (36 + 5 * 12)


def test_conv_channel_tiling_is_an_extension():
    plans = lower_conv3(conv(16), (4, 4, 300))
    assert len(plans) == 2 and all(p.extension for p in plans)
    assert conv_channel_tiles(300) == [(0, 256), (256, 300)]


def test_unsupported_pad():
    with pytest.raises(UnsupportedKernel):
        lower_conv3(conv(8, pad=2), (8, 8, 3))


def test_fc_tiles():
    plans = lower_fc(Layer("FC", 1024), 1024)
    assert len(plans) == 4 and {p.n_rows for p in plans} == {1024}
    plans = lower_fc(Layer("FC", 10), 4096)
    assert sorted({p.row_range for p in plans}) == [(0, 2304), (2304, 4096)]
    (p,) = lower_fc(Layer("FC", 10), 1024)
    assert p.m_logical == 10 and p.active_columns == 64


def test_tile_rows():
    assert tile_rows(2304) == [(0, 2304)]
    assert tile_rows(2305) == [(0, 2304), (2304, 2305)]
    assert tile_cols(300, 1) == [(0, 256), (256, 300)]


@given(st.integers(2, 5000), st.integers(0, 2**32 - 1))
def test_row_split_sums_match(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(-8, 8, (3, n))
    x = rng.integers(-8, 8, n)
    parts = sum(A[:, a:b] @ x[a:b] for a, b in tile_rows(n, max_rows=rng.integers(1, n + 1)))
    assert np.array_equal(parts, A @ x)


def test_choose_full_scale():
    assert choose_full_scale(255) == (255, False)
    assert choose_full_scale(100) == (100, False)
    assert choose_full_scale(2304) == (2304, True)
    assert choose_full_scale(2304, 2049) == (255, False)
    assert choose_full_scale(2304, 2048) == (2304, True)


def test_abn_fold_identity_bn_crosses_mid_scale():
    n = 1152
    t, neg = fold_batchnorm(BatchNormParams.identity(4), "abn", mode=Mode.XNOR, n_rows=n, full_scale=n)
    # sign(2s - n) flips at s = n/2 -> t = 63/2 rounded half-up
    assert t.tolist() == [32] * 4 and not neg.any()


def test_abn_fold_clamps():
    bn = BatchNormParams(np.zeros(2), np.ones(2), np.ones(2), np.array([1e6, -1e6]), 0.0)
    t, _ = fold_batchnorm(bn, "abn", mode=Mode.XNOR, n_rows=100, full_scale=100)
    assert t.tolist() == [0, DAC_MAX]


@given(st.integers(0, 2**32 - 1))
def test_adc_fold_within_one_lsb(seed):
    rng = np.random.default_rng(seed)
    C = 8
    bn = BatchNormParams(rng.normal(0, 20, C), rng.uniform(0.5, 4, C), rng.uniform(-2, 2, C),
                         rng.normal(0, 3, C), 1e-5)
    op = fold_batchnorm(bn, "adc", shift=8)
    y = rng.integers(-200, 200, (50, C))
    got = run_post_ops(y, [op])
    ref = bn.apply(y)
    assert np.max(np.abs(got - ref)) <= 1.0


def desk_graph(fmt=X, b=1):
    return NetworkGraph((8, 8, 3), [
        Layer("CONV3", 16, b, b, fmt, name="c1"),
        Layer("BATCHNORM", 16),
        Layer("ACT", 16, act="sign" if fmt is X else "relu"),
        Layer("POOL2", 16, pool="max"),
        Layer("CONV3", 16, b, b, fmt, pad=0, name="c2"),
        Layer("BATCHNORM", 16),
        Layer("ACT", 16, act="sign" if fmt is X else "relu"),
        Layer("FC", 10, b, b, fmt, name="fc"),
    ]).random_weights(3)


def test_shapes_chain():
    g = desk_graph()
    assert g.shapes()[-1] == (10,)
    assert [s.final_shape for s in lower_network(g)] == [(4, 4, 16), (2, 2, 16), (10,)]


def test_paths_chosen():
    stages = lower_network(desk_graph())
    assert [s.path for s in stages] == ["abn", "abn", "adc"]
    stages = lower_network(desk_graph(T, 4))
    assert [s.path for s in stages] == ["adc", "adc", "adc"]


def test_xnor_feeder_needs_sign():
    g = NetworkGraph((4, 4, 3), [Layer("CONV3", 8, 1, 1, X), Layer("FC", 2, 1, 1, X)]).random_weights()
    with pytest.raises(PlanError):
        lower_network(g)


def test_shape_mismatch():
    g = NetworkGraph((4, 4, 3), [Layer("CONV3", 8, weights=np.zeros((8, 2, 3, 3), int))])
    with pytest.raises(ShapeMismatch):
        g.shapes()


def test_flatten_order():
    w = np.arange(2 * 3 * 3 * 3).reshape(2, 3, 3, 3)  # (out, in, ky, kx)
    f = flatten_conv_weights(w)
    # row index = kx*3*C + ky*C + c
    assert f[1, 1 * 9 + 2 * 3 + 0] == w[1, 0, 2, 1]


def test_network_plans_cover_layers():
    stages = lower_network(desk_graph(T, 4))
    plans = network_plans(stages)
    assert all(p.lowered for p in plans)
    assert sum(p.n_mvm for p in plans) == 64 + 4 + 1
