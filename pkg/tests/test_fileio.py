import numpy as np
import pytest
from hypothesis import given, strategies as st

from cimu.errors import FileFormatError, MissingFile, NetworkParseError, ShapeMismatch
from cimu.fileio import (dump_kv, parse_kv, parse_network, read_network, read_tensor, read_words, write_tensor,
                         write_words)
from cimu.io_frontend import pack, unpack
from cimu.numfmt import twos


@given(st.sampled_from(["int8", "int16", "int32"]), st.lists(st.integers(-128, 127), min_size=1, max_size=30))
def test_tensor_roundtrip(tmp_path_factory, dtype, vals):
    p = tmp_path_factory.mktemp("t") / "a.bin"
    a = np.array(vals)
    write_tensor(p, a, twos(8), dtype=dtype)
    b, fmt = read_tensor(p)
    assert np.array_equal(a, b) and fmt == twos(8)


def test_tensor_layout(tmp_path):
    p = tmp_path / "a.bin"
    write_tensor(p, np.array([[1, -2], [3, 300]]))
    assert p.read_bytes() == np.array([1, -2, 3, 300], "<i2").tobytes()
    assert "shape = 2x2" in (tmp_path / "a.bin.hdr").read_text()


def test_tensor_errors(tmp_path):
    with pytest.raises(MissingFile):
        read_tensor(tmp_path / "none.bin")
    p = tmp_path / "a.bin"
    write_tensor(p, np.arange(6))
    (tmp_path / "a.bin.hdr").write_text("shape = 4\ndtype = int8\n")
    with pytest.raises(ShapeMismatch):
        read_tensor(p)
    (tmp_path / "a.bin.hdr").write_text("shape = 6\ndtype = float\n")
    with pytest.raises(FileFormatError):
        read_tensor(p)
    (tmp_path / "a.bin.hdr").write_text("shape = 6\ndtype = int8\ncolour = red\n")
    with pytest.raises(FileFormatError):
        read_tensor(p)


def test_fractional_tensor(tmp_path):
    p = tmp_path / "bn.bin"
    write_tensor(p, np.array([3, -8, 16]), frac_bits=3)
    a, _ = read_tensor(p)
    assert a.tolist() == [0.375, -1.0, 2.0]


def test_words_roundtrip(tmp_path):
    s = pack([1, 2, 3, 4, 5], 3)
    write_words(tmp_path / "x.words", s)
    assert unpack(read_words(tmp_path / "x.words")).tolist() == [1, 2, 3, 4, 5]
    assert (tmp_path / "x.words").stat().st_size == 4


def test_kv():
    text = dump_kv({"a": 1, "b": 0.5, "c": (1, 2), "d": True})
    assert text == "a = 1\nb = 0.5\nc = 1,2\nd = 1\n"
    assert parse_kv(text + "# note\n\n") == {"a": "1", "b": "0.5", "c": "1,2", "d": "1"}


NET_B = """
name = net_b
input = 32x32x3
format = xnor
L1: 128 CONV3 - BN - SIGN
L2: 128 CONV3 - POOL - BN - SIGN
L3: 256 CONV3 - BN - SIGN
L4: 256 CONV3 - POOL - BN - SIGN
L5: 256 CONV3 - BN - SIGN
L6: 256 CONV3 - POOL - BN - SIGN
L7-8: 1024 FC - BN - SIGN
L9: 10 FC - BN
"""


def test_parse_network_b():
    g = parse_network(NET_B)
    assert g.name == "net_b" and g.input_shape == (32, 32, 3)
    compute = [l for l in g.layers if l.kind in ("CONV3", "FC")]
    assert [l.out_channels for l in compute] == [128, 128, 256, 256, 256, 256, 1024, 1024, 10]
    assert g.shapes()[-1] == (10,)


def test_layer_options(tmp_path):
    write_tensor(tmp_path / "w.bin", np.ones((4, 3, 3, 3), int), twos(2))
    g = read_network_text(tmp_path, "input = 4x4x3\nL1: 4 CONV3 - RELU ba=2 bx=3 pad=0 weights=w.bin\n")
    conv = g.layers[0]
    assert (conv.ba, conv.bx, conv.pad, conv.weights.shape) == (2, 3, 0, (4, 3, 3, 3))
    assert g.layers[1].act == "relu"


def read_network_text(d, text):
    p = d / "net.txt"
    p.write_text(text)
    return read_network(p)


@pytest.mark.parametrize("text", [
    "L1: 8 CONV3\n",                               # no input line
    "input = 4x4x3\nL1: 8 CONV5\n",                # unknown kind
    "input = 4x4x3\nL2: 8 CONV3\n",                # numbering
    "input = 4x4x3\nL1: 8 CONV3 - DROPOUT\n",      # unknown element
    "input = 4x4x3\nL1: 8 CONV3 color=blue\n",     # unknown key
    "input = 4x4x3\nL1: 8 CONV3 ba=9\n",
    "input = 4x4x3\nhello\n",
    "input = 4x4x3\nformat = float\nL1: 8 FC\n",
])
def test_malformed_networks(text):
    with pytest.raises(NetworkParseError):
        parse_network(text)
