import numpy as np
import pytest
from hypothesis import given, strategies as st

from cimu.cima_array import (COLS, N_SEGMENTS, ROWS, SEGMENT_BITS, CimaArray, MaskVector, Mode,
                             column_sums)
from cimu.errors import CapacityExceeded, ModeFormatMismatch, QuantaOutOfRange, SegmentOutOfRange
from cimu.numfmt import twos, xnor


def test_capacity_is_590kb():
    assert ROWS * COLS == 589_824 == N_SEGMENTS * SEGMENT_BITS


def test_write_segment_first_cell():
    arr = CimaArray().write_segment(0, np.ones(SEGMENT_BITS))
    assert arr.cells[0, 0] == 1
    assert arr.cells[3, 0] == 0  # segment 0 covers rows 0..2


def test_all_segments_fill_every_cell():
    arr = CimaArray()
    for k in range(N_SEGMENTS):
        arr.write_segment(k, np.ones(SEGMENT_BITS))
    assert arr.cells.all()


def test_segment_bounds():
    with pytest.raises(SegmentOutOfRange):
        CimaArray().write_segment(768, np.zeros(SEGMENT_BITS))


@pytest.mark.parametrize("rq,n", [(4, 2304), (1, 576), (2, 1152)])
def test_row_gating(rq, n):
    assert CimaArray().gate_banks(rq, 4).n_conf == n


def test_bad_quanta():
    with pytest.raises(QuantaOutOfRange):
        CimaArray().gate_banks(4, 0)
    with pytest.raises(QuantaOutOfRange):
        CimaArray().gate_banks(5, 1)


def test_column_mapping():
    cm = CimaArray().load_matrix(np.zeros((256, 2304), int), twos(1))
    assert cm.n_physical == 256
    cm = CimaArray().load_matrix(np.zeros((64, 10), int), twos(4))
    assert cm.n_physical == 256
    assert list(cm.columns[5]) == [20, 21, 22, 23]
    with pytest.raises(CapacityExceeded):
        CimaArray().load_matrix(np.zeros((65, 10), int), twos(4))
    with pytest.raises(CapacityExceeded):
        CimaArray().load_matrix(np.zeros((1, 2305), int), twos(1))


def test_load_goes_through_segments():
    arr = CimaArray()
    arr.load_matrix(np.ones((8, 100), int) * -1, twos(2))
    assert arr.segments_written == 34  # ceil(100 / 3)


def test_xnor_ramp():
    arr = CimaArray()
    arr.cells[:] = 1
    for k in (0, 1, 100, 2304):
        plane = np.zeros(ROWS, np.uint8)
        plane[:k] = 1
        assert (arr.evaluate(plane, Mode.XNOR).sums == k).all()


def test_and_zero_plane():
    arr = CimaArray()
    arr.cells[:] = 1
    assert (arr.evaluate(np.zeros(ROWS, np.uint8), Mode.AND).sums == 0).all()


def test_mode_mismatch():
    arr = CimaArray()
    arr.load_matrix(np.ones((2, 2), int), xnor(1))
    with pytest.raises(ModeFormatMismatch):
        arr.evaluate(np.zeros(ROWS, np.uint8), Mode.AND)


def test_gated_columns_read_zero():
    arr = CimaArray()
    arr.cells[:] = 1
    arr.gate_banks(1, 1)
    s = arr.evaluate(np.ones(ROWS, np.uint8), Mode.AND).sums
    assert (s[:64] == 576).all() and (s[64:] == 0).all()


def popcount_reference(a, x, mode, enable):
    n, c = a.shape
    out = []
    for j in range(c):
        t = 0
        for i in range(n):
            if not enable[i]:
                continue
            if mode is Mode.AND:
                t += a[i, j] & x[i]
            else:
                t += 1 if a[i, j] == x[i] else 0
        out.append(t)
    return out


@given(st.integers(0, 2**32 - 1), st.sampled_from(list(Mode)))
def test_column_sums_match_popcount(seed, mode):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, (16, 8))
    x = rng.integers(0, 2, 16)
    en = rng.integers(0, 2, 16)
    got = column_sums(a, x[None], mode, en)[0]
    assert got.tolist() == popcount_reference(a, x, mode, en)


def test_masked_rows_contribute_nothing(rng):
    arr = CimaArray()
    arr.cells[:] = rng.integers(0, 2, arr.cells.shape)
    plane = rng.integers(0, 2, ROWS).astype(np.uint8)
    bits = np.ones(ROWS, np.uint8)
    bits[::2] = 0
    res = arr.evaluate(plane, Mode.XNOR, MaskVector.from_bits(bits))
    assert res.n_nonmasked == ROWS // 2
    ref = popcount_reference(arr.cells[1::2, :4], plane[1::2], Mode.XNOR, np.ones(ROWS // 2))
    assert res.sums[:4].tolist() == ref
