import numpy as np
import pytest
from hypothesis import given, strategies as st

from cimu import numfmt
from cimu.cima_array import ROWS, Mode
from cimu.errors import BankBusy, ElementTooWide, GeometryNotConvolutional, PlaneOutOfRange
from cimu.io_frontend import (PackedWordStream, ReshapingBuffer, derive_sparsity, elements_per_word, pack,
                              unpack, words_for)


@pytest.mark.parametrize("n,b,w", [(2304, 1, 72), (2304, 8, 576), (10, 3, 1), (11, 3, 2), (0, 4, 0)])
def test_word_counts(n, b, w):
    assert words_for(n, b) == w
    assert len(pack(np.zeros(n, int), b)) == w


def test_no_straddling():
    assert elements_per_word(3) == 10
    s = pack(np.full(11, 7), 3)
    assert s.words[0] == (1 << 30) - 1  # 10 elements, top two bits padding
    assert s.words[1] == 7


@given(st.integers(1, 8), st.data())
def test_pack_roundtrip(b, data):
    codes = data.draw(st.lists(st.integers(0, (1 << b) - 1), max_size=300))
    s = pack(codes, b)
    assert unpack(s).tolist() == list(codes)
    again = PackedWordStream.from_bytes(s.to_bytes(), b, len(codes))
    assert unpack(again).tolist() == list(codes)


def test_pack_rejects_wide_codes():
    with pytest.raises(ElementTooWide):
        pack([8], 3)
    with pytest.raises(ElementTooWide):
        pack([0], 9)


def filled(width, codes, channels=None):
    buf = ReshapingBuffer(width, channels)
    buf.fill_back_bank(pack(codes, width))
    buf.commit_back()
    buf.swap()
    return buf


def test_fill_then_swap():
    buf = filled(4, [1, 2, 3])
    assert buf.front_elements.tolist() == [1, 2, 3]


def test_fill_while_streaming():
    buf = filled(4, [1, 2, 3])
    buf.begin_stream()
    buf.fill_back_bank(pack([9, 9], 4))  # allowed: that is the point of double buffering
    with pytest.raises(BankBusy):
        buf.swap()
    buf.end_stream()
    buf.swap()
    assert buf.front_elements.tolist() == [9, 9]


def test_second_fill_overwrites_uncommitted_back():
    buf = ReshapingBuffer(4)
    buf.fill_back_bank(pack([1, 1], 4))
    buf.fill_back_bank(pack([5], 4))
    buf.swap()
    assert buf.front_elements.tolist() == [5]


def test_committed_back_is_busy():
    buf = ReshapingBuffer(4)
    buf.fill_back_bank(pack([1], 4))
    buf.commit_back()
    with pytest.raises(BankBusy):
        buf.fill_back_bank(pack([2], 4))


def test_read_plane():
    codes = np.zeros(10, int)
    codes[7] = 0b101
    buf = filled(3, codes)
    assert [buf.read_plane(i)[7] for i in range(3)] == [1, 0, 1]
    assert buf.read_plane(0)[10:].sum() == 0
    with pytest.raises(PlaneOutOfRange):
        buf.read_plane(3)


def test_single_plane_is_raw_bits(rng):
    bits = rng.integers(0, 2, 100)
    assert np.array_equal(filled(1, bits).read_plane(0)[:100], bits)


@given(st.sampled_from([numfmt.NumberFormat(k, b) for k in numfmt.Kind for b in range(1, 9)]), st.data())
def test_plane_roundtrip(fmt, data):
    v = np.array(data.draw(st.lists(st.sampled_from(fmt.values().tolist()), min_size=1, max_size=64)))
    buf = filled(fmt.width, numfmt.encode(v, fmt))
    # plane i is code bit i; code bit k carries weight index B-1-k
    bits = np.stack([buf.read_plane(fmt.width - 1 - k)[: v.size] for k in range(fmt.width)], axis=1)
    assert np.array_equal(numfmt.compose_array(bits, fmt), v)


def test_stride_shift_fifo():
    C = 2
    p = [np.full(3 * C, k) for k in range(4)]
    buf = filled(3, np.concatenate(p[:3]), channels=C)
    buf.stride_shift(p[3])
    buf.commit_back()
    buf.swap()
    assert buf.front_elements.tolist() == np.concatenate(p[1:]).tolist()


def test_stride_reuse_saves_transfers():
    C = 128
    full = words_for(9 * C, 1)
    buf = filled(1, np.zeros(9 * C, int), channels=C)
    before = buf.words_received
    buf.stride_shift(np.zeros(3 * C, int))
    assert (full, buf.words_received - before) == (36, 12)


def test_stride_shift_needs_conv_geometry():
    with pytest.raises(GeometryNotConvolutional):
        filled(1, [1, 0]).stride_shift([1, 1, 1])


def test_sparsity():
    m = derive_sparsity(np.zeros(ROWS, int), Mode.XNOR)
    assert m.zero_tally == ROWS and m.mask.sum() == 0
    m = derive_sparsity(np.ones(ROWS, int), Mode.XNOR)
    assert m.zero_tally == 0 and m.mask.all()
    v = np.array([2, 0, -2, 0, 4])
    m = derive_sparsity(v, Mode.XNOR, 576)
    assert m.mask[:5].tolist() == [1, 0, 1, 0, 1]
    assert m.zero_tally == 576 - 3
    assert derive_sparsity(v, Mode.AND).zero_tally == 0
