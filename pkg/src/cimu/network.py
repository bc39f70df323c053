"""Run lowered networks on the simulated unit, and an integer reference for them.

The reference works directly on activation tensors with shifted-slice
convolutions and plain integer arithmetic; it shares no code with the
bit-plane path beyond the post-op definitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cima_array import Mode
from .converters import DAC_MAX
from .core import Cimu
from .mapper import NetworkGraph, Stage, lower_network, network_plans
from .near_mem import BatchNorm, Scale, run_post_ops, saturate
from .perf_model import CycleConstants, summarize


def pool2(x, mode: str = "max") -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    h, w = x.shape[0] // 2 * 2, x.shape[1] // 2 * 2
    q = x[:h, :w].reshape(h // 2, 2, w // 2, 2, *x.shape[2:])
    if mode == "max":
        return q.max(axis=(1, 3))
    return (q.sum(axis=(1, 3)) + 2) >> 2


def slice_ops(ops, m0: int, m1: int) -> list:
    """Restrict per-output post-op parameters to outputs ``m0:m1``."""
    out = []
    for op in ops:
        if isinstance(op, BatchNorm):
            op = BatchNorm(_cut(op.scale, m0, m1), _cut(op.bias, m0, m1), op.shift)
        elif isinstance(op, Scale):
            op = Scale(_cut(op.gamma, m0, m1), op.shift)
        out.append(op)
    return out


def _cut(p, m0, m1):
    a = np.asarray(p)
    return a[m0:m1] if a.ndim else a


def _pad(x, p):
    if p == 0:
        return np.asarray(x, dtype=np.int64)
    return np.pad(np.asarray(x, dtype=np.int64), ((p, p), (p, p), (0, 0)))


@dataclass
class NetworkResult:
    outputs: list  # per-stage output tensors
    stages: list
    unit: Cimu = field(repr=False, default=None)

    @property
    def final(self) -> np.ndarray:
        return self.outputs[-1]


def run_stage(stage: Stage, x, unit: Cimu, stride_reuse: bool = True) -> np.ndarray:
    layer = stage.layer
    fmt_a, fmt_x = layer.fmt_a, layer.fmt_x
    W = stage.weights
    M = layer.out_channels
    tiled = stage.host_post
    if stage.is_conv:
        xp = _pad(x, layer.pad)
        h_out, w_out = stage.out_shape[:2]
        acc = np.zeros((h_out, w_out, M), dtype=np.int64)
    else:
        xv = np.asarray(x, dtype=np.int64).ravel()
        acc = np.zeros(M, dtype=np.int64)

    for ri, rows in enumerate(stage.row_tiles):
        F = stage.full_scales[ri] if ri < len(stage.full_scales) else None
        for m0, m1 in stage.col_tiles:
            if stage.is_conv:
                ch = np.asarray(rows)
                c0, c1 = _channel_range(ch, stage.in_shape[2])
                unit.load_matrix(W[m0:m1][:, ch], fmt_a)
            else:
                r0, r1 = rows
                unit.load_matrix(W[m0:m1, r0:r1], fmt_a)
            kw = dict(path=stage.path, full_scale=F)
            if stage.path == "abn":
                kw["thresholds"] = stage.thresholds[m0:m1]
            elif tiled:
                kw["out_width"] = 32
            else:
                kw["post_ops"] = slice_ops(stage.post_ops, m0, m1)
                kw["out_width"] = stage.out_bits
            if stage.is_conv:
                C = c1 - c0
                for i in range(h_out):
                    for j in range(w_out):
                        if j == 0 or not stride_reuse:
                            win = xp[i : i + 3, j : j + 3, c0:c1].transpose(1, 0, 2)
                            unit.set_input(win.ravel(), fmt_x, channels=C)
                        else:
                            unit.shift_input(xp[i : i + 3, j + 2, c0:c1].ravel())
                        r = unit.run(**kw)
                        acc[i, j, m0:m1] += r.y if tiled else r.outputs
            else:
                unit.set_input(xv[r0:r1], fmt_x)
                r = unit.run(**kw)
                acc[m0:m1] += r.y if tiled else r.outputs
    return _host_epilogue(stage, acc)


def _channel_range(rows: np.ndarray, c_in: int) -> tuple:
    ch = np.unique(rows % c_in)
    return int(ch[0]), int(ch[-1]) + 1


def _host_epilogue(stage: Stage, y) -> np.ndarray:
    v = y
    if stage.host_post:
        if stage.pre_pool is not None:
            v = pool2(v, stage.pre_pool)
        v = saturate(run_post_ops(v, stage.post_ops), 32)
    if stage.pool is not None:
        v = pool2(v, stage.pool)
    return v


def run_network(graph_or_stages, x, *, noise_sigma: float = 0.0, seed: int = 0,
                stride_reuse: bool = True, full_scale_policy="auto") -> NetworkResult:
    stages = graph_or_stages
    if isinstance(graph_or_stages, NetworkGraph):
        stages = lower_network(graph_or_stages, full_scale_policy)
    unit = Cimu(noise_sigma, seed)
    outs = []
    v = np.asarray(x, dtype=np.int64)
    for st in stages:
        v = run_stage(st, v, unit, stride_reuse)
        outs.append(v)
    return NetworkResult(outs, stages, unit)


def perf_summary(stages, corner="low", consts: CycleConstants = CycleConstants()):
    return summarize(network_plans(stages), corner, consts)


# ---------------------------------------------------------------------------
# integer reference


def _conv_reference(x, W4, pad):
    """Direct 3x3 convolution as a sum of nine shifted channel contractions."""
    xp = _pad(x, pad)
    h_out, w_out = xp.shape[0] - 2, xp.shape[1] - 2
    y = np.zeros((h_out, w_out, W4.shape[0]), dtype=np.int64)
    for ky in range(3):
        for kx in range(3):
            y += xp[ky : ky + h_out, kx : kx + w_out, :] @ W4[:, :, ky, kx].T
    return y


def _nonzero_count(x, pad):
    nz = (np.asarray(x) != 0).astype(np.int64)
    xp = _pad(nz, pad)
    h_out, w_out = xp.shape[0] - 2, xp.shape[1] - 2
    n = np.zeros((h_out, w_out), dtype=np.int64)
    for ky in range(3):
        for kx in range(3):
            n += xp[ky : ky + h_out, kx : kx + w_out, :].sum(axis=2)
    return n[..., None]


def reference_stage(stage: Stage, x) -> np.ndarray:
    layer = stage.layer
    W = np.asarray(stage.weights, dtype=np.int64)
    if stage.is_conv:
        c_in = stage.in_shape[2]
        W4 = W.reshape(W.shape[0], 3, 3, c_in).transpose(0, 3, 2, 1)  # (out, in, ky, kx)
        y = _conv_reference(x, W4, layer.pad)
    else:
        xv = np.asarray(x, dtype=np.int64).ravel()
        y = np.array([sum(int(a) * int(b) for a, b in zip(row, xv)) for row in W], dtype=np.int64)

    if stage.path == "abn":
        if stage.mode is Mode.XNOR:
            n = _nonzero_count(x, layer.pad) if stage.is_conv else np.count_nonzero(np.asarray(x))
            s2 = y + n  # twice the column sum
        else:
            s2 = 2 * y
        F = stage.full_scales[0]
        out = np.where(DAC_MAX * s2 >= 2 * stage.thresholds * F, 1, -1)
    elif stage.host_post:
        v = pool2(y, stage.pre_pool) if stage.pre_pool is not None else y
        out = saturate(run_post_ops(v, stage.post_ops), 32)
    else:
        out = saturate(run_post_ops(y, stage.post_ops), stage.out_bits)
    if stage.pool is not None:
        out = pool2(out, stage.pool)
    return out


def reference_network(graph_or_stages, x, full_scale_policy="auto") -> list:
    stages = graph_or_stages
    if isinstance(graph_or_stages, NetworkGraph):
        stages = lower_network(graph_or_stages, full_scale_policy)
    outs = []
    v = np.asarray(x, dtype=np.int64)
    for st in stages:
        v = reference_stage(st, v)
        outs.append(v)
    return outs
