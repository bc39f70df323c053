"""Lower quantized networks (CONV3 / FC / POOL2 / BATCHNORM / ACT) onto the array.

A compute layer plus the BATCHNORM / ACT / POOL2 layers that follow it form a
:class:`Stage`.  Each stage is split into tiles that fit the 2304 x 256 array
(:class:`~cimu.plan.ExecutionPlan`), and its real-valued batch norm is folded
either into a 6-b ABN threshold (single-plane layers ending in ``sign``) or
into integer post-ops for the ADC path.

Convolution windows and weights are flattened pixel-column major,
``[kx][ky][c]``, so that stride-1 reuse shifts whole pixel columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cima_array import COLS, ROWS, ROWS_PER_SEGMENT, Mode, mode_for
from .converters import ADC_MAX, DAC_MAX
from .errors import PlanError, ShapeMismatch, UnsupportedKernel
from .io_frontend import words_for
from .near_mem import Activation, BatchNorm, Clamp, Scale, output_width
from .numfmt import Kind, NumberFormat
from .plan import ExecutionPlan, HostOp

COMPUTE_KINDS = ("CONV3", "FC")
MAX_CONV_CHANNELS = ROWS // 9  # 256


@dataclass
class BatchNormParams:
    mean: np.ndarray
    var: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = 1e-5

    @classmethod
    def identity(cls, channels: int) -> "BatchNormParams":
        return cls(np.zeros(channels), np.ones(channels), np.ones(channels), np.zeros(channels), 0.0)

    @property
    def slope(self) -> np.ndarray:
        return np.asarray(self.gamma, float) / np.sqrt(np.asarray(self.var, float) + self.eps)

    @property
    def offset(self) -> np.ndarray:
        return np.asarray(self.beta, float) - self.slope * np.asarray(self.mean, float)

    def apply(self, y) -> np.ndarray:
        return self.slope * np.asarray(y, float) + self.offset


@dataclass
class Layer:
    kind: str
    out_channels: int = 0
    ba: int = 1
    bx: int = 1
    fmt: Kind = Kind.TWOS_COMPLEMENT
    pad: int = 1
    weights: np.ndarray | None = None  # CONV3: (out, in, 3, 3); FC: (out, in)
    bn: BatchNormParams | None = None
    act: str = "none"
    pool: str = "max"
    name: str = ""

    @property
    def fmt_a(self) -> NumberFormat:
        return NumberFormat(self.fmt, self.ba)

    @property
    def fmt_x(self) -> NumberFormat:
        return NumberFormat(self.fmt, self.bx)


@dataclass
class NetworkGraph:
    input_shape: tuple  # (H, W, C) or (N,)
    layers: list
    name: str = "network"

    def shapes(self) -> list:
        """Output shape after every layer; validates the chain."""
        shape = tuple(self.input_shape)
        out = []
        for i, layer in enumerate(self.layers):
            k = layer.kind
            if k == "CONV3":
                if len(shape) != 3:
                    raise ShapeMismatch(f"layer {i} CONV3 needs an HxWxC input, got {shape}")
                h, w, c = shape
                if layer.weights is not None and layer.weights.shape != (layer.out_channels, c, 3, 3):
                    raise ShapeMismatch(f"layer {i} weights {layer.weights.shape} != {(layer.out_channels, c, 3, 3)}")
                p = layer.pad
                shape = (h + 2 * p - 2, w + 2 * p - 2, layer.out_channels)
                if min(shape[:2]) < 1:
                    raise ShapeMismatch(f"layer {i} CONV3 output is empty")
            elif k == "FC":
                n = int(np.prod(shape))
                if layer.weights is not None and layer.weights.shape != (layer.out_channels, n):
                    raise ShapeMismatch(f"layer {i} weights {layer.weights.shape} != {(layer.out_channels, n)}")
                shape = (layer.out_channels,)
            elif k == "POOL2":
                if len(shape) != 3 or shape[0] < 2 or shape[1] < 2:
                    raise ShapeMismatch(f"layer {i} POOL2 needs an HxWxC input of at least 2x2")
                shape = (shape[0] // 2, shape[1] // 2, shape[2])
            elif k in ("BATCHNORM", "ACT"):
                pass
            else:
                raise ShapeMismatch(f"unknown layer kind {k!r}")
            out.append(shape)
        return out

    def random_weights(self, seed: int = 0) -> "NetworkGraph":
        """Fill missing weights with uniform draws over each layer's matrix format."""
        rng = np.random.default_rng(seed)
        shape = tuple(self.input_shape)
        for layer, out_shape in zip(self.layers, self.shapes()):
            if layer.kind in COMPUTE_KINDS and layer.weights is None:
                vals = layer.fmt_a.values()
                if layer.kind == "CONV3":
                    size = (layer.out_channels, shape[2], 3, 3)
                else:
                    size = (layer.out_channels, int(np.prod(shape)))
                layer.weights = rng.choice(vals, size=size)
            shape = out_shape
        return self


# ---------------------------------------------------------------------------
# tiling and converter range


def tile_rows(n_total: int, max_rows: int = ROWS) -> list:
    """Contiguous row ranges of at most ``max_rows``."""
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    return [(s, min(s + max_rows, n_total)) for s in range(0, n_total, max_rows)]


def tile_cols(m_total: int, ba: int) -> list:
    per_tile = COLS // ba
    return [(s, min(s + per_tile, m_total)) for s in range(0, m_total, per_tile)]


def conv_channel_tiles(c_in: int) -> list:
    return [(s, min(s + MAX_CONV_CHANNELS, c_in)) for s in range(0, c_in, MAX_CONV_CHANNELS)]


def choose_full_scale(n_rows: int, guaranteed_zeros: int = 0, limit: int = ADC_MAX) -> tuple:
    """``(F, lossy)``: the smallest lossless full scale when sums are provably bounded."""
    bound = max(int(n_rows) - int(guaranteed_zeros), 0)
    if bound <= limit:
        return max(min(int(n_rows), limit), 1), False
    return int(n_rows), True


def accumulation_op(n_outputs: int, n_tiles: int) -> HostOp:
    extra = max(n_tiles - 1, 0)
    return HostOp("accumulate", 3 * n_outputs * extra, 2 * n_outputs * extra, n_outputs * extra)


def pool_op(in_shape: tuple, bits: int, mode: str) -> HostOp:
    h, w, c = in_shape
    n_in = (h // 2) * (w // 2) * 4 * c
    n_out = n_in // 4
    if bits == 1 and mode == "max":
        # packed words: one load + one OR per input word, one store per output word
        in_words, out_words = words_for(n_in, 1), words_for(n_out, 1)
        return HostOp("pool", 2 * in_words + out_words, in_words + out_words, n_out)
    return HostOp("pool", 3 * n_in + n_out, n_in + n_out, n_out)


def postop_host_op(n_outputs: int, n_ops: int) -> HostOp:
    return HostOp("post_ops", 3 * n_outputs * max(n_ops, 1), 2 * n_outputs, n_outputs)


# ---------------------------------------------------------------------------
# batch-norm folding


def fold_batchnorm(bn: BatchNormParams, path: str = "adc", *, y_scale: float = 1.0, out_scale: float = 1.0,
                   shift: int = 8, mode: Mode = Mode.XNOR, n_rows: int | None = None,
                   full_scale: int | None = None):
    """Fold batch norm into the conversion path.

    ``adc``: returns a :class:`BatchNorm` post-op computing
    ``round(slope * y_scale / out_scale * y + offset / out_scale)`` in fixed point.

    ``abn``: returns ``(threshold_codes, negate)`` so that the sign test on
    the normalized value becomes ``63 * s >= t * F`` on the column sum,
    with the weights of channels flagged in ``negate`` stored negated.
    """
    a = bn.slope * y_scale
    b = bn.offset
    if path == "adc":
        one = 1 << shift
        scale = np.round(a / out_scale * one).astype(np.int64)
        bias = np.round(b / out_scale * one).astype(np.int64)
        return BatchNorm(scale, bias, shift)
    if n_rows is None or full_scale is None:
        raise ValueError("ABN folding needs n_rows and full_scale")
    a = np.atleast_1d(a)
    b = np.broadcast_to(b, a.shape)
    negate = a < 0
    with np.errstate(divide="ignore"):
        theta = np.where(a != 0, -b / np.where(a != 0, a, 1.0), 0.0)
    theta = np.where(negate, -theta, theta)
    s_star = (theta + n_rows) / 2 if Mode(mode) is Mode.XNOR else theta
    t = np.clip(np.floor(DAC_MAX * s_star / full_scale + 0.5), 0, DAC_MAX).astype(np.int64)
    # constant channels: always +1 when offset >= 0, else as close to always -1 as the DAC allows
    t = np.where(a == 0, np.where(b >= 0, 0, DAC_MAX), t)
    return t, negate


# ---------------------------------------------------------------------------
# stages


@dataclass
class Stage:
    """A compute layer with its fused epilogue, ready for execution."""

    layer: Layer
    in_shape: tuple
    out_shape: tuple  # before pooling
    final_shape: tuple  # after pooling
    weights: np.ndarray  # effective (M, N_total), rows flattened [kx][ky][c] for CONV3
    path: str  # adc | abn
    row_tiles: list
    col_tiles: list
    full_scales: list  # per row tile
    lossy: bool
    thresholds: np.ndarray | None = None
    post_ops: list = field(default_factory=list)
    host_post: bool = False  # post-ops run on the host (row tiling / pre-pool)
    pre_pool: str | None = None  # pooling applied to raw sums on the host before post-ops
    pool: str | None = None  # pooling after post-ops
    out_bits: int = 32
    plans: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def is_conv(self) -> bool:
        return self.layer.kind == "CONV3"

    @property
    def mode(self) -> Mode:
        return mode_for(self.layer.fmt_a)


def flatten_conv_weights(w: np.ndarray) -> np.ndarray:
    """(out, in, ky, kx) -> (out, 9*in) ordered [kx][ky][c]."""
    w = np.asarray(w)
    return w.transpose(0, 3, 2, 1).reshape(w.shape[0], -1)


def conv_row_index(c_in: int, c_range: tuple) -> np.ndarray:
    """Flattened row indices belonging to a channel group."""
    idx = np.arange(9 * c_in).reshape(3, 3, c_in)
    return idx[:, :, c_range[0] : c_range[1]].ravel()


def _requant_ops(next_fmt: NumberFormat | None, act: str) -> list:
    if next_fmt is None:
        return []
    if next_fmt.is_xnor and next_fmt.width == 1:
        if act != "sign":
            raise PlanError(f"a layer feeding {next_fmt} inputs must end in a sign activation")
        return []
    ops = [Clamp(next_fmt.min_value, next_fmt.max_value)]
    if next_fmt.is_xnor:
        ops += [Scale(1, 1), Scale(2, 0)]  # nearest even, ties up
    return ops


def _stage_layers(graph: NetworkGraph):
    """Group layers into (compute layer, epilogue layers)."""
    groups = []
    for layer in graph.layers:
        if layer.kind in COMPUTE_KINDS:
            groups.append((layer, []))
        else:
            if not groups:
                raise PlanError(f"{layer.kind} before the first compute layer")
            groups[-1][1].append(layer)
    return groups


def lower_conv3(layer: Layer, in_shape: tuple, full_scale_policy="auto") -> list:
    """Tiles for one CONV3 layer; one MVM per output pixel, stride reuse along rows."""
    if layer.kind != "CONV3" or layer.pad not in (0, 1):
        raise UnsupportedKernel(f"only 3x3 stride-1 convolutions with pad 0/1 are supported ({layer.kind})")
    h, w, c_in = in_shape
    h_out, w_out = h + 2 * layer.pad - 2, w + 2 * layer.pad - 2
    plans = []
    row_tiles = conv_channel_tiles(c_in)
    col_tiles = tile_cols(layer.out_channels, layer.ba)
    for ri, (c0, c1) in enumerate(row_tiles):
        c = c1 - c0
        n = 9 * c
        F, lossy = resolve_full_scale(n, full_scale_policy)
        words = h_out * (words_for(n, layer.bx) + (w_out - 1) * words_for(3 * c, layer.bx))
        for ci, (m0, m1) in enumerate(col_tiles):
            plans.append(ExecutionPlan(
                name=f"{layer.name or 'conv'}[r{ri}c{ci}]", fmt_a=layer.fmt_a, fmt_x=layer.fmt_x,
                n_rows=n, m_logical=m1 - m0, n_mvm=h_out * w_out, full_scale=F, lossy=lossy,
                row_range=(c0, c1), col_range=(m0, m1), input_words=words,
                matrix_segments=-(-n // ROWS_PER_SEGMENT), stride_reuse=True,
                extension=len(row_tiles) > 1,
            ))
    return plans


def lower_fc(layer: Layer, n_in: int, full_scale_policy="auto") -> list:
    plans = []
    row_tiles = tile_rows(n_in)
    for ri, (r0, r1) in enumerate(row_tiles):
        n = r1 - r0
        F, lossy = resolve_full_scale(n, full_scale_policy)
        for ci, (m0, m1) in enumerate(tile_cols(layer.out_channels, layer.ba)):
            plans.append(ExecutionPlan(
                name=f"{layer.name or 'fc'}[r{ri}c{ci}]", fmt_a=layer.fmt_a, fmt_x=layer.fmt_x,
                n_rows=n, m_logical=m1 - m0, n_mvm=1, full_scale=F, lossy=lossy,
                row_range=(r0, r1), col_range=(m0, m1),
                matrix_segments=-(-n // ROWS_PER_SEGMENT), extension=len(row_tiles) > 1,
            ))
    return plans


def resolve_full_scale(n: int, policy):
    if policy == "auto" or policy is None:
        return choose_full_scale(n)
    F = int(policy)
    return F, F > ADC_MAX or F < n


def lower_network(graph: NetworkGraph, full_scale_policy="auto") -> list:
    """Quantized stages with their execution plans and host work."""
    shapes = graph.shapes()
    groups = _stage_layers(graph)
    stages = []
    shape = tuple(graph.input_shape)
    out_shape_of = {id(layer): s for layer, s in zip(graph.layers, shapes)}
    compute_layers = [g[0] for g in groups]
    for gi, (layer, epilogue) in enumerate(groups):
        next_fmt = compute_layers[gi + 1].fmt_x if gi + 1 < len(compute_layers) else None
        stage = _lower_stage(layer, epilogue, shape, out_shape_of, next_fmt, full_scale_policy)
        stages.append(stage)
        shape = stage.final_shape
    return stages


def _lower_stage(layer, epilogue, in_shape, out_shape_of, next_fmt, policy) -> Stage:
    notes = []
    if layer.kind == "CONV3":
        if layer.weights is None:
            raise PlanError(f"{layer.name}: missing weights")
        plans = lower_conv3(layer, in_shape, policy)
        W = flatten_conv_weights(layer.weights)
        row_tiles = [tuple(conv_row_index(in_shape[2], (c0, c1))) for c0, c1 in conv_channel_tiles(in_shape[2])]
        row_groups = conv_channel_tiles(in_shape[2])
    else:
        n_in = int(np.prod(in_shape))
        if layer.weights is None:
            raise PlanError(f"{layer.name}: missing weights")
        plans = lower_fc(layer, n_in, policy)
        W = np.asarray(layer.weights)
        row_groups = tile_rows(n_in)
        row_tiles = row_groups
    W = np.asarray(W, dtype=np.int64)
    compute_shape = out_shape_of[id(layer)]

    # epilogue ordering: a max pool may move after monotone BN/ACT
    bn = act = None
    pre_pool = pool = None
    seen_post = False
    pool_before_post = None
    for e in epilogue:
        if e.kind == "BATCHNORM":
            if bn is not None:
                raise PlanError("two batch norms after one compute layer")
            bn = e.bn if e.bn is not None else BatchNormParams.identity(layer.out_channels)
            seen_post = True
        elif e.kind == "ACT":
            act = e.act
            seen_post = True
        elif e.kind == "POOL2":
            if pool is not None or pool_before_post is not None:
                raise PlanError("two pools after one compute layer")
            if seen_post:
                pool = e.pool
            else:
                pool_before_post = e.pool
    if pool_before_post is not None:
        if bn is None and act is None:
            pool = pool_before_post
        elif pool_before_post == "max" and (bn is None or np.all(bn.slope > 0)):
            pool = "max"
            notes.append("max pool moved after monotone batch norm / activation")
        else:
            pre_pool = pool_before_post
    act = act or "none"
    if pool == "avg" and next_fmt is not None and next_fmt.is_xnor:
        raise PlanError("average pooling cannot feed an XNOR-format layer")

    single_plane = layer.ba == 1 and layer.bx == 1
    host_post = len(row_groups) > 1 or pre_pool is not None
    path = "abn" if (single_plane and act == "sign" and not host_post) else "adc"

    # full scale per row tile
    n_per_tile = [len(rt) if layer.kind == "CONV3" else rt[1] - rt[0] for rt in row_tiles]
    fs = [resolve_full_scale(n, policy) for n in n_per_tile]
    full_scales = [f for f, _ in fs]
    lossy = path == "adc" and any(l for _, l in fs)

    thresholds = None
    post_ops = []
    if path == "abn":
        bn_ = bn if bn is not None else BatchNormParams.identity(layer.out_channels)
        n = n_per_tile[0]
        full_scales = [n]
        thresholds, negate = fold_batchnorm(bn_, "abn", mode=mode_for(layer.fmt_a),
                                            n_rows=n, full_scale=n)
        thresholds = np.broadcast_to(thresholds, (layer.out_channels,)).copy()
        negate = np.broadcast_to(negate, (layer.out_channels,))
        if np.any(negate):
            if not layer.fmt_a.is_xnor:
                raise PlanError("negative batch-norm slope needs a sign-symmetric weight format")
            W = np.where(negate[:, None], -W, W)
            notes.append(f"{int(negate.sum())} channels stored negated for negative BN slope")
        out_bits = 1
    else:
        if bn is not None:
            post_ops.append(fold_batchnorm(bn, "adc"))
        if act != "none":
            post_ops.append(Activation(act))
        post_ops += _requant_ops(next_fmt, act)
        out_bits = output_width(layer.bx, layer.ba)

    for p in plans:
        p.path = path
        p.output_bits = 1 if path == "abn" else (32 if host_post else out_bits)
        p.post_ops = [] if host_post else post_ops
        if path == "abn":
            p.full_scale = full_scales[0]
            p.lossy = False
            p.thresholds = thresholds[p.col_range[0]:p.col_range[1]]

    final_shape = compute_shape
    m_total = int(np.prod(compute_shape))
    host_ops = []
    if len(row_groups) > 1:
        host_ops.append(accumulation_op(m_total, len(row_groups)))
    pool_in = compute_shape
    if pre_pool is not None:
        host_ops.append(pool_op(pool_in, 32, pre_pool))
        pool_in = (pool_in[0] // 2, pool_in[1] // 2, pool_in[2])
        final_shape = pool_in
    if host_post:
        host_ops.append(postop_host_op(int(np.prod(pool_in)), len(post_ops)))
    if pool is not None:
        bits = 1 if (path == "abn" or act == "sign") else (next_fmt.width if next_fmt is not None else 32)
        host_ops.append(pool_op(pool_in, bits, pool))
        final_shape = (pool_in[0] // 2, pool_in[1] // 2, pool_in[2])
    if plans:
        plans[-1].host_ops = host_ops

    return Stage(layer=layer, in_shape=tuple(in_shape), out_shape=compute_shape, final_shape=final_shape,
                 weights=W, path=path, row_tiles=[np.asarray(rt) if layer.kind == "CONV3" else rt for rt in row_tiles],
                 col_tiles=tile_cols(layer.out_channels, layer.ba), full_scales=full_scales, lossy=lossy,
                 thresholds=thresholds, post_ops=post_ops, host_post=host_post, pre_pool=pre_pool, pool=pool,
                 out_bits=out_bits, plans=plans, notes=notes)


def network_plans(stages) -> list:
    return [p for s in stages for p in s.plans]
