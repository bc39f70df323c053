"""Word-to-bit reshaping buffer and sparsity controller.

Packing convention for 32-b words: ``floor(32 / B)`` elements per word,
element ``k`` of a word at bit offset ``k * B`` (little-endian element order),
element code bits LSB-first, unused high bits zero.  Elements never straddle
words.

Convolution windows are stored pixel-column major: ``[col][row][channel]``,
so a stride-1 horizontal step drops the first ``3*C`` elements and appends
the new pixel column at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cima_array import ROWS, MaskVector, Mode
from .errors import BankBusy, ElementTooWide, GeometryNotConvolutional, PlaneOutOfRange, ShapeMismatch

WORD_BITS = 32


def elements_per_word(width: int) -> int:
    return WORD_BITS // width


def words_for(n_elements: int, width: int) -> int:
    return -(-int(n_elements) // elements_per_word(width))


@dataclass
class PackedWordStream:
    words: np.ndarray  # uint32
    width: int
    count: int

    def __len__(self):
        return len(self.words)

    def to_bytes(self) -> bytes:
        return self.words.astype("<u4").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, width: int, count: int) -> "PackedWordStream":
        words = np.frombuffer(data, dtype="<u4").astype(np.uint32)
        if len(words) < words_for(count, width):
            raise ShapeMismatch(f"{len(words)} words cannot hold {count} elements of {width} b")
        return cls(words, width, count)


def pack(codes, width: int) -> PackedWordStream:
    if not 1 <= width <= 8:
        raise ElementTooWide(f"element width {width} outside [1, 8]")
    c = np.asarray(codes, dtype=np.int64).ravel()
    if np.any((c < 0) | (c >= (1 << width))):
        raise ElementTooWide(f"element code does not fit in {width} bits")
    epw = elements_per_word(width)
    n_words = words_for(c.size, width)
    padded = np.zeros(n_words * epw, dtype=np.uint64)
    padded[: c.size] = c
    shifts = (np.arange(epw, dtype=np.uint64) * np.uint64(width))
    words = (padded.reshape(n_words, epw) << shifts).sum(axis=1, dtype=np.uint64)
    return PackedWordStream(words.astype(np.uint32), width, int(c.size))


def unpack(stream: PackedWordStream) -> np.ndarray:
    epw = elements_per_word(stream.width)
    w = np.asarray(stream.words, dtype=np.uint64)
    shifts = np.arange(epw, dtype=np.uint64) * np.uint64(stream.width)
    fields = (w[:, None] >> shifts) & np.uint64((1 << stream.width) - 1)
    return fields.ravel()[: stream.count].astype(np.int64)


class ReshapingBuffer:
    """Double-buffered element store feeding bit-serial planes to the array.

    ``channels`` configures a 3x3xC convolution window; ``None`` means a
    fully connected (plain vector) geometry.
    """

    def __init__(self, width: int, channels: int | None = None):
        if not 1 <= width <= 8:
            raise ElementTooWide(f"element width {width} outside [1, 8]")
        if channels is not None and not 1 <= channels <= 256:
            raise ShapeMismatch("convolution window supports 1..256 channels")
        self.width = width
        self.channels = channels
        self.front = np.zeros(ROWS, dtype=np.int64)
        self.back = np.zeros(ROWS, dtype=np.int64)
        self.front_count = 0
        self.back_count = 0
        self.streaming = False
        self.back_committed = False
        self.words_received = 0

    @property
    def window_size(self) -> int:
        return 9 * self.channels if self.channels else ROWS

    @property
    def front_elements(self) -> np.ndarray:
        return self.front[: self.front_count].copy()

    def fill_back_bank(self, words: PackedWordStream) -> "ReshapingBuffer":
        if self.back_committed:
            raise BankBusy("back bank is committed to the next MVM")
        if words.width != self.width:
            raise ElementTooWide(f"stream width {words.width} != buffer width {self.width}")
        if words.count > ROWS:
            raise ShapeMismatch(f"{words.count} elements exceed {ROWS} rows")
        elems = unpack(words)
        self.back[:] = 0
        self.back[: elems.size] = elems
        self.back_count = elems.size
        self.words_received += len(words)
        return self

    def commit_back(self):
        self.back_committed = True

    def swap(self) -> "ReshapingBuffer":
        if self.streaming:
            raise BankBusy("front bank is streaming the in-flight MVM")
        self.front, self.back = self.back, self.front
        self.front_count, self.back_count = self.back_count, self.front_count
        self.back_committed = False
        return self

    def begin_stream(self):
        self.streaming = True

    def end_stream(self):
        self.streaming = False

    def read_plane(self, i: int) -> np.ndarray:
        """Bit ``i`` (code LSB = 0) of every front element; empty rows read 0."""
        if not 0 <= i < self.width:
            raise PlaneOutOfRange(f"plane {i} outside [0, {self.width})")
        plane = ((self.front >> i) & 1).astype(np.uint8)
        plane[self.front_count :] = 0
        return plane

    def stride_shift(self, new_pixel_column) -> "ReshapingBuffer":
        """Build the next window in the back bank from the front window plus one new pixel column."""
        if self.channels is None:
            raise GeometryNotConvolutional("stride_shift needs a 3x3xC window geometry")
        if self.back_committed:
            raise BankBusy("back bank is committed to the next MVM")
        col = 3 * self.channels
        new = np.asarray(new_pixel_column, dtype=np.int64).ravel()
        if new.size != col:
            raise ShapeMismatch(f"new pixel column must hold {col} elements, got {new.size}")
        if np.any((new < 0) | (new >= (1 << self.width))):
            raise ElementTooWide(f"element code does not fit in {self.width} bits")
        n = self.window_size
        self.back[:] = 0
        self.back[: n - col] = self.front[col:n]
        self.back[n - col : n] = new
        self.back_count = n
        self.words_received += words_for(col, self.width)
        return self


def derive_sparsity(values, mode: Mode, n_active: int = ROWS) -> MaskVector:
    """Mask zero-valued elements (XNOR mode); rows past the data count as zeros."""
    if Mode(mode) is Mode.AND:
        return MaskVector.all_on()
    v = np.asarray(values).ravel()
    m = np.zeros(ROWS, dtype=np.uint8)
    m[: v.size] = v != 0
    return MaskVector.from_bits(m, n_active)
