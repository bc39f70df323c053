import numpy as np
import pytest
from hypothesis import given, strategies as st

from cimu.cima_array import Mode
from cimu.converters import AdcModel, adc_quantize
from cimu.core import run_mvm
from cimu.errors import InvalidPostOps, ModeFormatMismatch, PlaneCountMismatch
from cimu.near_mem import (Activation, Bias, BatchNorm, Clamp, RecombineContext, Scale, apply_post_ops,
                           output_width, recombine, signed_plane_value)
from cimu.numfmt import twos, xnor


def test_signed_plane_value():
    assert signed_plane_value(40, Mode.XNOR, 40) == 40
    assert signed_plane_value(0, Mode.XNOR, 255) == -255
    assert signed_plane_value(7, Mode.AND, 0) == 7


def test_xnor_1b_recombine_is_affine_in_code():
    adc = AdcModel(255)
    ctx = RecombineContext(xnor(1), xnor(1), [255])
    for D in (0, 17, 128, 255):
        assert recombine(np.array([[D]]), ctx, adc) == 2 * D - 255


def test_xnor_1b_against_pm1_dot(rng):
    A = rng.choice([-1, 1], size=(32, 255))
    x = rng.choice([-1, 1], size=255)
    assert np.array_equal(run_mvm(A, x, xnor(1), xnor(1)).y, A @ x)


def test_n4_hand_case():
    # x = 3 does not fit a 2-b two's complement input, so B_x = 3 is used here
    A = np.array([[3, -2, 0, 1]])
    x = np.array([1, 1, 0, 3])
    r = run_mvm(A, x, twos(3), twos(3), full_scale=255)
    assert r.y.tolist() == [4]


def test_zero_vector_gives_zero(rng):
    A = rng.choice(xnor(4).values(), size=(16, 40))
    assert np.all(run_mvm(A, np.zeros(40, int), xnor(4), xnor(4)).y == 0)


def test_plane_count_checked():
    ctx = RecombineContext(twos(2), twos(3), [0, 0, 0])
    with pytest.raises(PlaneCountMismatch):
        recombine(np.zeros((2, 2), int), ctx, AdcModel(255))


def test_mode_pairing_checked():
    with pytest.raises(ModeFormatMismatch):
        RecombineContext(twos(2), xnor(2), [0, 0])
    with pytest.raises(ModeFormatMismatch):
        RecombineContext(twos(2), twos(2), [0, 0], mode=Mode.XNOR)


def test_post_op_examples():
    assert apply_post_ops(5, [], 16).value == 5
    assert apply_post_ops(-3, [Activation("sign")]).value == -1
    assert apply_post_ops(0, [Activation("sign")]).value == 1
    assert apply_post_ops(5, [Scale(3, 1)]).value == 8
    assert apply_post_ops(-5, [Activation("relu")]).value == 0
    assert apply_post_ops(10, [Bias(-3), Clamp(0, 4)]).value == 4
    assert apply_post_ops(7, [BatchNorm(3, 1, 2)]).value == 6  # (21 + 1 + 2) >> 2


def test_post_ops_run_in_order():
    assert apply_post_ops(-5, [Activation("relu"), Bias(2)]).value == 2
    assert apply_post_ops(-5, [Bias(2), Activation("relu")]).value == 0


def test_saturation():
    assert apply_post_ops(40_000, [], 16).value == 32767
    assert apply_post_ops(-40_000, [], 16).value == -32768
    assert apply_post_ops(40_000, [], 32).value == 40_000


def test_invalid_post_ops():
    with pytest.raises(InvalidPostOps):
        apply_post_ops(1, [Scale(1.5, 0)])
    with pytest.raises(InvalidPostOps):
        apply_post_ops(1, [Scale(1, -1)])
    with pytest.raises(InvalidPostOps):
        apply_post_ops(1, [Activation("tanh")])
    with pytest.raises(InvalidPostOps):
        apply_post_ops(1, [Clamp(3, 2)])
    with pytest.raises(InvalidPostOps):
        apply_post_ops(1, [], 8)


@pytest.mark.parametrize("bx,ba,w", [(1, 1, 16), (4, 4, 32), (4, 1, 16), (3, 3, 32)])
def test_output_width(bx, ba, w):
    assert output_width(bx, ba) == w


@given(st.integers(-(2**20), 2**20), st.integers(-100, 100), st.integers(0, 12))
def test_scale_rounds_half_up(y, g, sh):
    from fractions import Fraction
    import math
    got = apply_post_ops(y, [Scale(g, sh)], 32).value
    want = math.floor(Fraction(y * g, 2**sh) + Fraction(1, 2))
    assert got == max(min(want, 2**31 - 1), -(2**31))


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_recombine_exact_for_exact_codes(ba, bx, seed):
    # feed true column sums through an exact ADC: recombination must rebuild A @ x
    from cimu import numfmt
    from cimu.cima_array import column_sums
    rng = np.random.default_rng(seed)
    fa, fx = twos(ba), twos(bx)
    A = rng.choice(fa.values(), size=(3, 50))
    x = rng.choice(fx.values(), size=50)
    a_bits = numfmt.decompose_array(A, fa)  # (3, 50, ba)
    x_bits = numfmt.decompose_array(x, fx).T  # (bx, 50)
    sums = np.stack([column_sums(a_bits[:, :, j].T, x_bits, Mode.AND, np.ones(50)) for j in range(ba)], 1)
    adc = AdcModel(255)
    codes = adc_quantize(sums, adc)
    y = recombine(codes, RecombineContext(fa, fx, [50] * bx), adc)
    assert np.array_equal(y, A @ x)
