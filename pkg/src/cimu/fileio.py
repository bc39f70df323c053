"""File formats used by the command-line frontend.

* tensors: flat little-endian int8/int16/int32 data plus a ``<file>.hdr``
  sidecar of ``key = value`` lines (shape, dtype, kind, width, frac_bits);
* packed input vectors: raw little-endian 32-b words with the same kind of
  sidecar (width, count);
* network descriptions: one layer chain per line, written like a published
  layer list (``L2: 128 CONV3 - POOL - BN - SIGN``) with optional ``key=value``
  settings;
* reports: ``key = value`` text, one metric per line.

Every writer goes through :func:`atomic_write`.
"""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import FileFormatError, InputError, MissingFile, NetworkParseError, ShapeMismatch
from .io_frontend import PackedWordStream
from .mapper import BatchNormParams, Layer, NetworkGraph
from .numfmt import Kind, NumberFormat

DTYPES = {"int8": "<i1", "int16": "<i2", "int32": "<i4"}


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    raw = data.encode() if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path, mode="r"):
    try:
        with open(path, mode) as f:
            return f.read()
    except FileNotFoundError:
        raise MissingFile(f"no such file: {path}") from None
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


# ---------------------------------------------------------------------------
# key = value text


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}" if abs(v) < 1e15 else f"{float(v):.6e}"
    if isinstance(v, (tuple, list, np.ndarray)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def dump_kv(d: dict) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in d.items())


def parse_kv(text: str, source: str = "<text>") -> dict:
    out = {}
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FileFormatError(f"{source}:{i}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise FileFormatError(f"{source}:{i}: empty key")
        out[k] = v
    return out


def write_report(path, d: dict) -> None:
    atomic_write(path, dump_kv(d))


# ---------------------------------------------------------------------------
# tensors


def header_path(path) -> Path:
    return Path(str(path) + ".hdr")


def _parse_shape(s: str, source: str) -> tuple:
    try:
        shape = tuple(int(t) for t in re.split(r"[x,]", s) if t.strip())
    except ValueError:
        raise FileFormatError(f"{source}: bad shape {s!r}") from None
    if not shape or any(d < 0 for d in shape):
        raise FileFormatError(f"{source}: bad shape {s!r}")
    return shape


def smallest_dtype(a) -> str:
    a = np.asarray(a)
    lo, hi = (int(a.min()), int(a.max())) if a.size else (0, 0)
    for name in ("int8", "int16", "int32"):
        info = np.iinfo(name)
        if info.min <= lo and hi <= info.max:
            return name
    raise FileFormatError("values do not fit in int32")


def write_tensor(path, a, fmt: NumberFormat | None = None, dtype: str | None = None, frac_bits: int = 0) -> None:
    a = np.asarray(a)
    dtype = dtype or smallest_dtype(a)
    if dtype not in DTYPES:
        raise FileFormatError(f"dtype must be one of {sorted(DTYPES)}")
    info = np.iinfo(dtype)
    if a.size and (a.min() < info.min or a.max() > info.max):
        raise FileFormatError(f"values do not fit in {dtype}")
    hdr = {"shape": "x".join(str(d) for d in a.shape) if a.ndim else "1", "dtype": dtype}
    if fmt is not None:
        hdr.update(kind=fmt.kind.value, width=fmt.width)
    if frac_bits:
        hdr["frac_bits"] = frac_bits
    atomic_write(path, a.astype(DTYPES[dtype]).tobytes())
    atomic_write(header_path(path), dump_kv(hdr))


def read_tensor(path) -> tuple:
    """``(array, NumberFormat | None)``; fractional tensors come back as float64."""
    hpath = header_path(path)
    hdr = parse_kv(_read(hpath), str(hpath))
    unknown = set(hdr) - {"shape", "dtype", "kind", "width", "frac_bits"}
    if unknown:
        raise FileFormatError(f"{hpath}: unknown keys {sorted(unknown)}")
    for key in ("shape", "dtype"):
        if key not in hdr:
            raise FileFormatError(f"{hpath}: missing '{key}'")
    if hdr["dtype"] not in DTYPES:
        raise FileFormatError(f"{hpath}: dtype must be one of {sorted(DTYPES)}")
    shape = _parse_shape(hdr["shape"], str(hpath))
    raw = _read(path, "rb")
    a = np.frombuffer(raw, dtype=DTYPES[hdr["dtype"]])
    if a.size != int(np.prod(shape)):
        raise ShapeMismatch(f"{path}: {a.size} elements for shape {shape}")
    a = a.reshape(shape).astype(np.int64)
    fmt = None
    if "kind" in hdr or "width" in hdr:
        try:
            fmt = NumberFormat(Kind(hdr["kind"]), int(hdr["width"]))
        except (KeyError, ValueError) as e:
            raise FileFormatError(f"{hpath}: bad kind/width ({e})") from None
    fb = int(hdr.get("frac_bits", 0))
    if fb:
        a = a / float(1 << fb)
    return a, fmt


# ---------------------------------------------------------------------------
# packed words


def write_words(path, stream: PackedWordStream) -> None:
    atomic_write(path, stream.to_bytes())
    atomic_write(header_path(path), dump_kv({"width": stream.width, "count": stream.count}))


def read_words(path) -> PackedWordStream:
    hpath = header_path(path)
    hdr = parse_kv(_read(hpath), str(hpath))
    try:
        width, count = int(hdr["width"]), int(hdr["count"])
    except (KeyError, ValueError):
        raise FileFormatError(f"{hpath}: needs integer 'width' and 'count'") from None
    raw = _read(path, "rb")
    if len(raw) % 4:
        raise FileFormatError(f"{path}: length {len(raw)} is not a whole number of 32-b words")
    return PackedWordStream.from_bytes(raw, width, count)


# ---------------------------------------------------------------------------
# network descriptions

_LAYER_RE = re.compile(r"^L(\d+)(?:-(\d+))?\s*:\s*(.*)$")
_ACTS = {"SIGN": "sign", "RELU": "relu"}
_POOLS = {"POOL": "max", "MAXPOOL": "max", "AVGPOOL": "avg"}
_LAYER_KEYS = {"ba", "bx", "format", "pad", "weights", "bn"}
_GLOBAL_KEYS = {"name", "input", "ba", "bx", "format", "pad"}


def _settings(tokens, allowed, where) -> dict:
    out = {}
    for t in tokens:
        if "=" not in t:
            raise NetworkParseError(f"{where}: unexpected token {t!r}")
        k, v = t.split("=", 1)
        if k not in allowed:
            raise NetworkParseError(f"{where}: unknown key {k!r}")
        out[k] = v
    return out


def _int(v, key, where) -> int:
    try:
        return int(v)
    except ValueError:
        raise NetworkParseError(f"{where}: {key} must be an integer, got {v!r}") from None


def parse_network(text: str, base_dir=".", source: str = "<network>") -> NetworkGraph:
    """Parse a layer-list description into a :class:`NetworkGraph`.

    Example::

        name = net_b
        input = 32x32x3
        format = xnor
        ba = 1
        bx = 1
        L1: 128 CONV3 - BN - SIGN
        L2: 128 CONV3 - POOL - BN - SIGN
        L7-8: 1024 FC - BN - SIGN
        L9: 10 FC - BN

    ``Ln-m`` repeats a chain.  Per-line ``key=value`` tokens (``ba``, ``bx``,
    ``format``, ``pad``, ``weights``, ``bn``) override the defaults; file
    paths are relative to ``base_dir``.
    """
    base_dir = Path(base_dir)
    defaults = {"name": "network", "format": "twos", "ba": "1", "bx": "1", "pad": "1"}
    input_shape = None
    layers = []
    expect = 1
    for i, raw in enumerate(text.splitlines(), 1):
        where = f"{source}:{i}"
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LAYER_RE.match(line)
        if m is None:
            if "=" not in line:
                raise NetworkParseError(f"{where}: expected a layer line or 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in _GLOBAL_KEYS:
                raise NetworkParseError(f"{where}: unknown key {k!r}")
            if layers and k != "name":
                raise NetworkParseError(f"{where}: '{k}' must come before the first layer")
            if k == "input":
                try:
                    input_shape = _parse_shape(v, where)
                except FileFormatError as e:
                    raise NetworkParseError(str(e)) from None
            defaults[k] = v
            continue
        first, last = int(m.group(1)), int(m.group(2) or m.group(1))
        if first != expect or last < first:
            raise NetworkParseError(f"{where}: layer numbers must run consecutively from L{expect}")
        expect = last + 1
        chain, _, rest = m.group(3).partition(";")
        parts = [p.strip() for p in re.split(r"\s+-\s+|\s+[–—]\s+", chain.strip())]
        head = parts[0].split()
        extra = head[2:] + rest.split()
        if len(head) < 2:
            raise NetworkParseError(f"{where}: expected '<channels> CONV3|FC'")
        channels = _int(head[0], "channels", where)
        kind = head[1].upper()
        if kind not in ("CONV3", "FC") or channels < 1:
            raise NetworkParseError(f"{where}: first element must be '<channels> CONV3' or '<channels> FC'")
        # trailing key=value tokens may also sit after the last chain element
        tail = parts[-1].split()
        if len(parts) > 1:
            parts[-1] = tail[0] if tail else ""
            extra += tail[1:]
        opts = {**{k: v for k, v in defaults.items() if k in _LAYER_KEYS}, **_settings(extra, _LAYER_KEYS, where)}
        try:
            kind_fmt = Kind(opts["format"])
        except ValueError:
            raise NetworkParseError(f"{where}: format must be 'twos' or 'xnor'") from None
        ba, bx, pad = (_int(opts[k], k, where) for k in ("ba", "bx", "pad"))
        if not (1 <= ba <= 8 and 1 <= bx <= 8):
            raise NetworkParseError(f"{where}: ba and bx must be in 1..8")
        for n in range(first, last + 1):
            name = f"L{n}"
            weights = None
            if "weights" in opts:
                wpath = base_dir / opts["weights"].replace("{n}", str(n))
                weights, _ = read_tensor(wpath)
            layers.append(Layer(kind, channels, ba, bx, kind_fmt, pad=pad, weights=weights, name=name))
            bn_params = None
            if "bn" in opts:
                bn_arr, _ = read_tensor(base_dir / opts["bn"].replace("{n}", str(n)))
                if bn_arr.ndim != 2 or bn_arr.shape != (4, channels):
                    raise NetworkParseError(f"{where}: bn tensor must have shape 4x{channels}")
                bn_params = BatchNormParams(*bn_arr, eps=0.0)
            for p in parts[1:]:
                tok = p.upper()
                if tok in ("BN", "BATCHNORM"):
                    layers.append(Layer("BATCHNORM", channels, bn=bn_params, name=f"{name}.bn"))
                elif tok in _ACTS:
                    layers.append(Layer("ACT", channels, act=_ACTS[tok], name=f"{name}.act"))
                elif tok in _POOLS:
                    layers.append(Layer("POOL2", channels, pool=_POOLS[tok], name=f"{name}.pool"))
                else:
                    raise NetworkParseError(f"{where}: unknown chain element {p!r}")
    if input_shape is None:
        raise NetworkParseError(f"{source}: missing 'input = HxWxC' line")
    if not layers:
        raise NetworkParseError(f"{source}: no layers")
    return NetworkGraph(input_shape, layers, defaults["name"])


def read_network(path) -> NetworkGraph:
    return parse_network(_read(path), Path(path).parent, str(path))
