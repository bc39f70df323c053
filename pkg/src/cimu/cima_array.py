"""Functional model of the 2304 x 256 bit-cell compute array.

Cells store matrix bit-planes: logical output ``m`` of a ``B_A``-bit matrix
occupies physical columns ``m*B_A .. m*B_A + B_A - 1`` (MSB first), row ``n``
holds element ``a[m, n]``.  One evaluation broadcasts a single input bit-plane
over all rows and returns the per-column count of cells whose 1-b product is 1.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import numfmt
from .errors import (
    CapacityExceeded,
    ModeFormatMismatch,
    QuantaOutOfRange,
    SegmentOutOfRange,
    ShapeMismatch,
)
from .numfmt import NumberFormat

ROWS = 2304
COLS = 256
BANKS = 4
ROW_QUANTUM = ROWS // BANKS  # 576
COL_QUANTUM = COLS // BANKS  # 64
SEGMENT_BITS = 768
N_SEGMENTS = ROWS * COLS // SEGMENT_BITS  # 768
ROWS_PER_SEGMENT = SEGMENT_BITS // COLS  # 3


class Mode(enum.Enum):
    XNOR = "xnor"
    AND = "and"


def mode_for(fmt: NumberFormat) -> Mode:
    return Mode.XNOR if fmt.is_xnor else Mode.AND


@dataclass
class MaskVector:
    """Per-row broadcast enables (1 = broadcast) plus the count of suppressed active rows."""

    mask: np.ndarray
    zero_tally: int

    @classmethod
    def all_on(cls, rows: int = ROWS) -> "MaskVector":
        return cls(np.ones(rows, dtype=np.uint8), 0)

    @classmethod
    def from_bits(cls, bits, n_active: int = ROWS) -> "MaskVector":
        m = np.zeros(ROWS, dtype=np.uint8)
        b = np.asarray(bits, dtype=np.uint8)
        m[: b.size] = b
        return cls(m, int(n_active - m[:n_active].sum()))


@dataclass
class ColumnSums:
    sums: np.ndarray
    n_nonmasked: int


@dataclass(frozen=True)
class ColumnMap:
    """Where each logical output lives and how its columns are weighted."""

    fmt: NumberFormat
    n_logical: int
    n_rows: int

    @property
    def columns(self) -> np.ndarray:
        B = self.fmt.width
        return np.arange(self.n_logical * B).reshape(self.n_logical, B)

    @property
    def weights(self) -> np.ndarray:
        return numfmt.bit_weights(self.fmt)

    @property
    def n_physical(self) -> int:
        return self.n_logical * self.fmt.width


def column_sums(a_bits: np.ndarray, x_planes: np.ndarray, mode: Mode, row_enable: np.ndarray) -> np.ndarray:
    """Counts of 1-valued cell outputs per (plane, column).

    a_bits: (N, C) stored bits; x_planes: (P, N) broadcast bits;
    row_enable: (N,) 1 where the row is active and unmasked.
    """
    a = np.asarray(a_bits, dtype=np.float64)
    x = np.asarray(x_planes, dtype=np.float64)
    e = np.asarray(row_enable, dtype=np.float64)
    if mode is Mode.AND:
        s = (x * e) @ a
    else:
        # xnor(a, x) = a*x + (1-a)*(1-x) = (1-x) + a*(2x-1)
        s = ((1.0 - x) * e).sum(axis=1, keepdims=True) + ((2.0 * x - 1.0) * e) @ a
    # float64 sums of 0/1 terms are exact far beyond the 2304-row range
    return np.rint(s).astype(np.int64)


class CimaArray:
    def __init__(self):
        self.cells = np.zeros((ROWS, COLS), dtype=np.uint8)
        self.row_quanta = BANKS
        self.col_quanta = BANKS
        self.loaded_format: NumberFormat | None = None
        self.segments_written = 0

    @property
    def n_conf(self) -> int:
        return ROW_QUANTUM * self.row_quanta

    @property
    def m_phys(self) -> int:
        return COL_QUANTUM * self.col_quanta

    @property
    def bank_enable(self) -> np.ndarray:
        r = np.arange(BANKS)[:, None] < self.row_quanta
        c = np.arange(BANKS)[None, :] < self.col_quanta
        return r & c

    def gate_banks(self, row_quanta: int, col_quanta: int) -> "CimaArray":
        for q in (row_quanta, col_quanta):
            if not 1 <= q <= BANKS:
                raise QuantaOutOfRange(f"bank quanta must be in [1, {BANKS}], got {q}")
        self.row_quanta = int(row_quanta)
        self.col_quanta = int(col_quanta)
        return self

    def write_segment(self, index: int, payload) -> "CimaArray":
        if not 0 <= index < N_SEGMENTS:
            raise SegmentOutOfRange(f"segment {index} outside [0, {N_SEGMENTS})")
        bits = np.asarray(payload, dtype=np.uint8).ravel()
        if bits.size != SEGMENT_BITS:
            raise ShapeMismatch(f"segment payload must be {SEGMENT_BITS} bits, got {bits.size}")
        flat = self.cells.reshape(-1)
        flat[index * SEGMENT_BITS : (index + 1) * SEGMENT_BITS] = bits & 1
        self.segments_written += 1
        return self

    def load_matrix(self, A, fmt: NumberFormat) -> ColumnMap:
        """Store ``A`` (M x N) bit-parallel; every write goes through :meth:`write_segment`."""
        A = np.asarray(A, dtype=np.int64)
        if A.ndim != 2:
            raise ShapeMismatch("matrix must be 2-D")
        M, N = A.shape
        B = fmt.width
        if M * B > COLS:
            raise CapacityExceeded(f"{M} outputs x {B} bits needs {M * B} columns > {COLS}")
        if N > ROWS:
            raise CapacityExceeded(f"input dimensionality {N} > {ROWS}")
        bits = numfmt.decompose_array(A, fmt)  # (M, N, B)
        image = np.zeros((ROWS, COLS), dtype=np.uint8)
        image[:N, : M * B] = bits.transpose(1, 0, 2).reshape(N, M * B)
        n_seg = -(-N // ROWS_PER_SEGMENT)
        flat = image.reshape(-1)
        for k in range(n_seg):
            self.write_segment(k, flat[k * SEGMENT_BITS : (k + 1) * SEGMENT_BITS])
        self.loaded_format = fmt
        return ColumnMap(fmt, M, N)

    def row_enable(self, mask: MaskVector | None) -> np.ndarray:
        e = np.zeros(ROWS, dtype=np.uint8)
        e[: self.n_conf] = 1
        if mask is not None:
            e &= np.asarray(mask.mask, dtype=np.uint8)
        return e

    def evaluate_planes(self, x_planes, mode: Mode, mask: MaskVector | None = None) -> tuple[np.ndarray, int]:
        """Column sums for a stack of planes, shape (P, 256); gated columns read 0."""
        mode = Mode(mode)
        if self.loaded_format is not None and mode is not mode_for(self.loaded_format):
            raise ModeFormatMismatch(f"{mode.value} mode with {self.loaded_format} matrix")
        x = np.atleast_2d(np.asarray(x_planes, dtype=np.uint8))
        if x.shape[1] != ROWS:
            raise ShapeMismatch(f"input plane must have {ROWS} bits, got {x.shape[1]}")
        e = self.row_enable(mask)
        rows = self.n_conf
        cols = self.m_phys
        out = np.zeros((x.shape[0], COLS), dtype=np.int64)
        out[:, :cols] = column_sums(self.cells[:rows, :cols], x[:, :rows], mode, e[:rows])
        return out, int(e.sum())

    def evaluate(self, x_plane, mode: Mode, mask: MaskVector | None = None) -> ColumnSums:
        sums, n = self.evaluate_planes(np.asarray(x_plane)[None, :], mode, mask)
        return ColumnSums(sums[0], n)
