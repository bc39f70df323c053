"""Digital post-conversion datapath.

ADC codes are dequantized to column-sum estimates, offset-corrected into
signed plane values, then shift-and-added across input planes (time) and
matrix planes (space).  Post-ops run on the recombined integer in list order,
with round-half-up at every fixed-point shift, and the result saturates to
the output word width.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import numfmt
from .cima_array import Mode, mode_for
from .converters import AdcModel, adc_dequantize
from .errors import InvalidPostOps, ModeFormatMismatch, PlaneCountMismatch
from .numfmt import NumberFormat


def signed_plane_value(s_hat, mode: Mode, n_nonmasked):
    """XNOR: 2*s - n maps 0/1 cell outputs to a +-1 product sum; AND: identity."""
    s_hat = np.asarray(s_hat, dtype=np.int64)
    if Mode(mode) is Mode.XNOR:
        out = 2 * s_hat - np.asarray(n_nonmasked, dtype=np.int64)
    else:
        out = s_hat
    return int(out) if out.ndim == 0 else out


@dataclass
class RecombineContext:
    fmt_a: NumberFormat
    fmt_x: NumberFormat
    # one per input plane (same order as bit_weights(fmt_x)), or any array
    # broadcastable against the codes for per-vector offsets
    n_nonmasked: Sequence[int]
    mode: Mode | None = None

    def __post_init__(self):
        expected = mode_for(self.fmt_a)
        if mode_for(self.fmt_x) is not expected:
            raise ModeFormatMismatch(f"matrix {self.fmt_a} and input {self.fmt_x} need different modes")
        if self.mode is None:
            self.mode = expected
        elif Mode(self.mode) is not expected:
            raise ModeFormatMismatch(f"{Mode(self.mode).value} mode with {self.fmt_a} operands")
        n = np.asarray(self.n_nonmasked, dtype=np.int64)
        if n.ndim <= 1:
            n = np.broadcast_to(n, (self.fmt_x.width,))
        self.n_nonmasked = n


def recombine(codes, ctx: RecombineContext, adc: AdcModel):
    """Shift-and-add ``codes[i][j]`` (input plane i, matrix plane j[, output m])."""
    c = np.asarray(codes, dtype=np.int64)
    bx, ba = ctx.fmt_x.width, ctx.fmt_a.width
    if c.ndim < 2 or c.shape[:2] != (bx, ba):
        raise PlaneCountMismatch(f"expected ({bx}, {ba}) planes, got {c.shape[:2]}")
    wx = numfmt.bit_weights(ctx.fmt_x)
    wa = numfmt.bit_weights(ctx.fmt_a)
    n = ctx.n_nonmasked
    if n.ndim == 1:
        n = n.reshape((bx, 1) + (1,) * (c.ndim - 2))
    vals = signed_plane_value(adc_dequantize(c, adc), ctx.mode, n)
    y = np.einsum("i,j,ij...->...", wx, wa, vals)
    return int(y) if np.ndim(y) == 0 else y


# ---------------------------------------------------------------------------
# post-ops


def _shift_round(v, shift: int):
    if shift == 0:
        return v
    return (v + (1 << (shift - 1))) >> shift


@dataclass(frozen=True)
class Scale:
    gamma: Union[int, np.ndarray]  # global or per-output
    shift: int = 0


@dataclass(frozen=True)
class Bias:
    beta: Union[int, np.ndarray]


@dataclass(frozen=True)
class BatchNorm:
    """Folded integer-affine batch norm: ``(v * scale + bias) >> shift`` with rounding."""

    scale: Union[int, np.ndarray]
    bias: Union[int, np.ndarray]
    shift: int = 0


@dataclass(frozen=True)
class Activation:
    kind: str = "none"  # none | relu | sign


@dataclass(frozen=True)
class Clamp:
    lo: int
    hi: int


PostOp = Union[Scale, Bias, BatchNorm, Activation, Clamp]


@dataclass
class PostOps:
    ops: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.ops)

    def __len__(self):
        return len(self.ops)


def _is_int(p) -> bool:
    a = np.asarray(p)
    return a.dtype.kind in "iu" or (a.dtype.kind == "O" and all(isinstance(v, int) for v in a.ravel()))


def validate_post_ops(ops) -> list:
    ops = list(ops)
    for op in ops:
        if isinstance(op, (Scale, BatchNorm)):
            if not isinstance(op.shift, (int, np.integer)) or op.shift < 0 or op.shift > 31:
                raise InvalidPostOps(f"shift must be an int in [0, 31]: {op}")
            params = (op.gamma,) if isinstance(op, Scale) else (op.scale, op.bias)
            if not all(_is_int(p) for p in params):
                raise InvalidPostOps(f"non-integer parameter in {op}")
        elif isinstance(op, Bias):
            if not _is_int(op.beta):
                raise InvalidPostOps(f"non-integer parameter in {op}")
        elif isinstance(op, Activation):
            if op.kind not in ("none", "relu", "sign"):
                raise InvalidPostOps(f"unknown activation {op.kind!r}")
        elif isinstance(op, Clamp):
            if op.lo > op.hi:
                raise InvalidPostOps(f"empty clamp range {op}")
        else:
            raise InvalidPostOps(f"unknown post-op {op!r}")
    return ops


def run_post_ops(y, ops):
    """Apply ``ops`` to ``y`` without output saturation."""
    v = np.asarray(y, dtype=np.int64)
    for op in validate_post_ops(ops):
        if isinstance(op, Scale):
            v = _shift_round(v * np.asarray(op.gamma, dtype=np.int64), op.shift)
        elif isinstance(op, Bias):
            v = v + np.asarray(op.beta, dtype=np.int64)
        elif isinstance(op, BatchNorm):
            v = _shift_round(v * np.asarray(op.scale, dtype=np.int64) + np.asarray(op.bias, dtype=np.int64), op.shift)
        elif isinstance(op, Activation):
            if op.kind == "relu":
                v = np.maximum(v, 0)
            elif op.kind == "sign":
                v = np.where(v >= 0, 1, -1)
        elif isinstance(op, Clamp):
            v = np.clip(v, op.lo, op.hi)
    return v


@dataclass
class OutputWord:
    value: Union[int, np.ndarray]
    width: int


def saturate(v, width: int):
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    return np.clip(v, lo, hi)


def apply_post_ops(y, ops, width: int = 32) -> OutputWord:
    if width not in (16, 32):
        raise InvalidPostOps(f"output width must be 16 or 32, got {width}")
    v = saturate(run_post_ops(y, ops), width)
    return OutputWord(int(v) if v.ndim == 0 else v, width)


def output_width(bx: int, ba: int) -> int:
    return 16 if bx + ba <= 5 else 32
