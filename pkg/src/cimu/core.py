"""End-to-end MVM through the compute-in-memory unit.

:class:`Cimu` strings the blocks together the way the hardware does::

    values -> codes -> 32-b words -> reshaping buffer -> bit planes
           -> array column sums -> ADC / ABN -> recombination -> post-ops

:func:`simulate_mvm` is a batched form of the same arithmetic (same kernels,
no buffer or segment bookkeeping) used by the SQNR sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numfmt
from .cima_array import COL_QUANTUM, ROW_QUANTUM, ROWS, CimaArray, ColumnMap, MaskVector, Mode, column_sums, mode_for
from .converters import AbnModel, AdcModel, abn_binarize, adc_quantize
from .errors import ModeFormatMismatch, PlanError, ShapeMismatch, UnrepresentableValue
from .io_frontend import ReshapingBuffer, derive_sparsity, pack
from .mapper import choose_full_scale
from .near_mem import RecombineContext, apply_post_ops, output_width, recombine
from .numfmt import NumberFormat


def encode_inputs(values, fmt: NumberFormat) -> np.ndarray:
    """Codes for input elements; zeros that the format cannot hold become code 0.

    Such elements are always masked by the sparsity controller, so their
    bits are never broadcast.
    """
    v = np.asarray(values, dtype=np.int64)
    if fmt.is_xnor and fmt.width == 1:
        filled = np.where(v == 0, -1, v)
        codes = numfmt.encode(filled, fmt)
        return np.where(v == 0, 0, codes)
    return numfmt.encode(v, fmt)


@dataclass
class MvmResult:
    y: np.ndarray | None  # recombined integer per logical output (ADC path)
    outputs: np.ndarray  # saturated post-op values, or +-1 for the ABN path
    sums: np.ndarray  # (B_x, M_phys) raw column sums
    codes: np.ndarray  # (B_x, M_phys) ADC codes / ABN bits
    n_nonmasked: int
    zero_tally: int
    full_scale: int
    exact: bool


@dataclass
class CimuStats:
    mvms: int = 0
    planes: int = 0
    words_in: int = 0
    segments: int = 0


class Cimu:
    def __init__(self, noise_sigma: float = 0.0, seed: int = 0):
        self.array = CimaArray()
        self.noise_sigma = float(noise_sigma)
        self.seed = int(seed)
        self.column_map: ColumnMap | None = None
        self.buffer: ReshapingBuffer | None = None
        self.values = np.zeros(ROWS, dtype=np.int64)  # front-bank element values
        self.n_inputs = 0
        self.invocations = 0
        self.stats = CimuStats()

    # -- matrix -------------------------------------------------------------

    def load_matrix(self, A, fmt_a: NumberFormat, gate: bool = True) -> ColumnMap:
        before = self.array.segments_written
        cm = self.array.load_matrix(A, fmt_a)
        self.stats.segments += self.array.segments_written - before
        if gate:
            rq = max(1, -(-cm.n_rows // ROW_QUANTUM))
            cq = max(1, -(-cm.n_physical // COL_QUANTUM))
            self.array.gate_banks(rq, cq)
        self.column_map = cm
        return cm

    # -- inputs -------------------------------------------------------------

    def set_input(self, values, fmt_x: NumberFormat, channels: int | None = None):
        """Full reload of the input vector through packed words and a bank swap."""
        v = np.asarray(values, dtype=np.int64).ravel()
        if v.size > ROWS:
            raise ShapeMismatch(f"input of {v.size} elements exceeds {ROWS} rows")
        self._check_values(v, fmt_x)
        if self.buffer is None or self.buffer.width != fmt_x.width or self.buffer.channels != channels:
            self.buffer = ReshapingBuffer(fmt_x.width, channels)
        words = pack(encode_inputs(v, fmt_x), fmt_x.width)
        self.buffer.fill_back_bank(words)
        self.buffer.commit_back()
        self.buffer.swap()
        self.stats.words_in += len(words)
        self.values[:] = 0
        self.values[: v.size] = v
        self.n_inputs = v.size
        self.fmt_x = fmt_x

    def shift_input(self, new_pixel_column):
        """Stride-1 reuse: keep two pixel columns, append one new one."""
        v = np.asarray(new_pixel_column, dtype=np.int64).ravel()
        self._check_values(v, self.fmt_x)
        before = self.buffer.words_received
        self.buffer.stride_shift(encode_inputs(v, self.fmt_x))
        self.buffer.commit_back()
        self.buffer.swap()
        self.stats.words_in += self.buffer.words_received - before
        n = self.buffer.window_size
        col = v.size
        self.values[: n - col] = self.values[col:n].copy()
        self.values[n - col : n] = v
        self.n_inputs = n

    @staticmethod
    def _check_values(v, fmt):
        ok = fmt.representable(v) | (v == 0)
        if not np.all(ok):
            raise UnrepresentableValue(f"{int(v[~ok][0])} is not representable in {fmt}")

    # -- compute ------------------------------------------------------------

    def mask(self, sparsity: bool = True) -> MaskVector:
        mode = mode_for(self.fmt_x)
        vals = self.values[: self.n_inputs]
        if mode is Mode.AND:
            return derive_sparsity(vals, mode, self.array.n_conf)
        if not sparsity and self.fmt_x.width > 1:
            # only rows past the data are suppressed
            return MaskVector.from_bits(np.ones(self.n_inputs, dtype=np.uint8), self.array.n_conf)
        return derive_sparsity(vals, mode, self.array.n_conf)

    def run(self, *, path: str = "adc", full_scale: int | None = None, post_ops=(), out_width: int | None = None,
            thresholds=None, sparsity: bool = True) -> MvmResult:
        cm = self.column_map
        if cm is None or self.buffer is None:
            raise PlanError("load a matrix and an input vector first")
        fmt_a, fmt_x = cm.fmt, self.fmt_x
        mode = mode_for(fmt_a)
        if mode_for(fmt_x) is not mode:
            raise ModeFormatMismatch(f"matrix {fmt_a} with input {fmt_x}")
        mask = self.mask(sparsity)

        self.buffer.begin_stream()
        try:
            # weight order is MSB first; code bit k carries weight index B-1-k
            planes = np.stack([self.buffer.read_plane(fmt_x.width - 1 - i) for i in range(fmt_x.width)])
        finally:
            self.buffer.end_stream()
        sums, n_nn = self.array.evaluate_planes(planes, mode, mask)
        sums = sums[:, : cm.n_physical]
        self.stats.mvms += 1
        self.stats.planes += fmt_x.width
        inv0 = self.invocations
        self.invocations += fmt_x.width

        if path == "abn":
            if fmt_a.width != 1 or fmt_x.width != 1:
                raise PlanError("the ABN path binarizes single-plane (1-b x 1-b) products only")
            F = full_scale or cm.n_rows
            abn = AbnModel(F, np.asarray(thresholds if thresholds is not None else 0), self.noise_sigma, self.seed)
            bits = abn_binarize(sums[0], abn, invocation=inv0)
            bits = np.atleast_2d(bits)
            return MvmResult(None, 2 * bits[0] - 1, sums, bits, n_nn, mask.zero_tally, F, False)

        if full_scale is None:
            full_scale, _ = choose_full_scale(cm.n_rows)
        adc = AdcModel(full_scale, self.noise_sigma, self.seed)
        codes = np.stack([np.asarray(adc_quantize(sums[i], adc, invocation=inv0 + i)) for i in range(fmt_x.width)])
        # (B_x, M*B_A) -> (B_x, B_A, M)
        per_output = codes.reshape(fmt_x.width, cm.n_logical, fmt_a.width).transpose(0, 2, 1)
        ctx = RecombineContext(fmt_a, fmt_x, [n_nn] * fmt_x.width)
        y = np.atleast_1d(recombine(per_output, ctx, adc))
        width = out_width or output_width(fmt_x.width, fmt_a.width)
        out = np.atleast_1d(apply_post_ops(y, post_ops, width).value)
        exact = adc.exact and bool(np.all(sums <= full_scale))
        return MvmResult(y, out, sums, codes, n_nn, mask.zero_tally, full_scale, exact)

    def mvm(self, x, fmt_x: NumberFormat, **kw) -> MvmResult:
        self.set_input(x, fmt_x)
        return self.run(**kw)


def run_mvm(A, x, fmt_a: NumberFormat, fmt_x: NumberFormat, **kw) -> MvmResult:
    """One-shot MVM on a fresh unit."""
    noise_sigma = kw.pop("noise_sigma", 0.0)
    seed = kw.pop("seed", 0)
    unit = Cimu(noise_sigma, seed)
    unit.load_matrix(A, fmt_a)
    return unit.mvm(x, fmt_x, **kw)


def simulate_mvm(A, X, fmt_a: NumberFormat, fmt_x: NumberFormat, *, full_scale: int | None = None,
                 sparsity: bool = True, noise_sigma: float = 0.0, seed: int = 0, invocation: int = 0) -> np.ndarray:
    """Batched BP/BS MVM: ``A`` (M, N), ``X`` (T, N) -> (T, M) recombined integers."""
    A = np.asarray(A, dtype=np.int64)
    X = np.atleast_2d(np.asarray(X, dtype=np.int64))
    M, N = A.shape
    T = X.shape[0]
    if X.shape[1] != N:
        raise ShapeMismatch(f"matrix has {N} columns, vectors have {X.shape[1]}")
    mode = mode_for(fmt_a)
    if mode_for(fmt_x) is not mode:
        raise ModeFormatMismatch(f"matrix {fmt_a} with input {fmt_x}")
    ba, bx = fmt_a.width, fmt_x.width
    a_bits = numfmt.decompose_array(A, fmt_a).transpose(1, 0, 2).reshape(N, M * ba)
    if mode is Mode.XNOR and (sparsity or bx == 1):
        enable = (X != 0).astype(np.uint8)
        x_bits = numfmt.decompose_array(np.where(X == 0, fmt_x.max_value, X), fmt_x)
    else:
        enable = np.ones_like(X, dtype=np.uint8)
        x_bits = numfmt.decompose_array(X, fmt_x)
    # (T, N, B_x) -> (T*B_x, N)
    planes = x_bits.transpose(0, 2, 1).reshape(T * bx, N)
    enable_p = np.repeat(enable, bx, axis=0)
    sums = column_sums(a_bits, planes, mode, enable_p)  # (T*B_x, M*B_A)
    if full_scale is None:
        full_scale, _ = choose_full_scale(N)
    adc = AdcModel(full_scale, noise_sigma, seed)
    codes = np.asarray(adc_quantize(sums, adc, invocation=invocation))
    codes = codes.reshape(T, bx, M, ba).transpose(1, 3, 0, 2)  # (B_x, B_A, T, M)
    n_nn = enable.sum(axis=1)  # (T,)
    ctx = RecombineContext(fmt_a, fmt_x, n_nn[None, None, :, None])
    return recombine(codes, ctx, adc)
