"""Brute-force references and measurement harnesses.

``reference_mvm`` is the exact integer oracle.  ``measure_sqnr`` compares the
simulated BP/BS path against it for uniformly drawn operands;
``linearity_sweep`` reproduces the all-ones column transfer measurement for
the ADC and ABN paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cima_array import COLS, ROW_QUANTUM, ROWS, CimaArray, MaskVector, Mode, N_SEGMENTS, SEGMENT_BITS
from .converters import DAC_MAX, AbnModel, AdcModel, abn_binarize, adc_quantize
from .core import simulate_mvm
from .errors import ShapeMismatch
from .numfmt import Kind, NumberFormat

EXACT = "exact"


def reference_mvm(A, x) -> np.ndarray:
    """Exact integer ``A @ x``; no bit decomposition or quantization anywhere."""
    A = np.asarray(A)
    x = np.asarray(x)
    if A.ndim != 2 or x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"cannot multiply {A.shape} by {x.shape}")
    return A.astype(np.int64) @ x.astype(np.int64)


def reference_mvm_loops(A, x) -> list:
    """The same product as nested Python loops over Python ints."""
    return [sum(int(a) * int(b) for a, b in zip(row, x)) for row in np.asarray(A).tolist()]


def sqnr_db(y_ref, y_sim):
    """Pooled SQNR in dB, or :data:`EXACT` when the error is identically zero."""
    ref = np.asarray(y_ref, dtype=np.float64)
    err = ref - np.asarray(y_sim, dtype=np.float64)
    noise = float(np.sum(err * err))
    if noise == 0:
        return EXACT
    return 10.0 * np.log10(float(np.sum(ref * ref)) / noise)


def _format(mode, width) -> NumberFormat:
    kind = Kind.XNOR_SIGNED if Mode(mode) is Mode.XNOR else Kind.TWOS_COMPLEMENT
    return NumberFormat(kind, width)


def draw_operands(rng, n, m, fmt_a, fmt_x, sparsity=0.0, vectors=1):
    A = rng.choice(fmt_a.values(), size=(m, n))
    X = rng.choice(fmt_x.values(), size=(vectors, n))
    zeros = n_zeros(n, sparsity)
    if zeros:
        # exactly `zeros` per vector, so the bound on s is a guarantee
        idx = np.argsort(rng.random((vectors, n)), axis=1)[:, :zeros]
        np.put_along_axis(X, idx, 0, axis=1)
    return A, X


def n_zeros(n: int, sparsity: float) -> int:
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError("sparsity must be in [0, 1]")
    return int(np.floor(sparsity * n + 0.5))


@dataclass
class SqnrConfig:
    n: int = 2304
    ba: int = 4
    bx: int = 4
    mode: Mode = Mode.AND
    sparsity: float = 0.0
    full_scale: int | None = None  # None: the mapper's choice given the forced zeros
    trials: int = 1000
    seed: int = 0
    m: int | None = None  # outputs per MVM, default 256 // ba
    vectors_per_matrix: int = 8
    noise_sigma: float = 0.0


def _full_scale_for(cfg: SqnrConfig) -> int:
    if cfg.full_scale is not None:
        return int(cfg.full_scale)
    from .mapper import choose_full_scale
    return choose_full_scale(cfg.n, n_zeros(cfg.n, cfg.sparsity))[0]


def measure_sqnr(cfg: SqnrConfig | None = None, **kw):
    """SQNR of the simulated path against :func:`reference_mvm` over ``trials`` MVMs.

    Each block of ``vectors_per_matrix`` trials shares one freshly drawn matrix
    and uses its own RNG stream, so results depend only on ``(seed, trials)``.
    """
    cfg = cfg or SqnrConfig(**kw)
    if cfg.trials < 1:
        raise ValueError("trials must be >= 1")
    fmt_a, fmt_x = _format(cfg.mode, cfg.ba), _format(cfg.mode, cfg.bx)
    m = cfg.m or COLS // cfg.ba
    F = _full_scale_for(cfg)
    sig = err = 0.0
    done = 0
    block = 0
    while done < cfg.trials:
        v = min(cfg.vectors_per_matrix, cfg.trials - done)
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(block,)))
        A, X = draw_operands(rng, cfg.n, m, fmt_a, fmt_x, cfg.sparsity, v)
        y_ref = X.astype(np.int64) @ A.T.astype(np.int64)
        y_sim = simulate_mvm(A, X, fmt_a, fmt_x, full_scale=F, noise_sigma=cfg.noise_sigma,
                             seed=cfg.seed, invocation=block)
        d = (y_ref - y_sim).astype(np.float64)
        sig += float(np.sum(y_ref.astype(np.float64) ** 2))
        err += float(np.sum(d * d))
        done += v
        block += 1
    if err == 0:
        return EXACT
    return 10.0 * np.log10(sig / err)


@dataclass
class SqnrCurve:
    n: int
    mode: Mode
    sparsity: float
    trials: int
    seed: int
    full_scale: int | None
    ba_values: list
    bx_values: list
    values: dict = field(default_factory=dict)  # (bx, ba) -> dB or "exact"
    estimator: str = "pooled over outputs and trials"

    def series(self, bx: int) -> list:
        return [self.values[(bx, ba)] for ba in self.ba_values]

    def to_text(self, sep: str = "\t") -> str:
        lines = [
            f"# n={self.n} mode={Mode(self.mode).value} sparsity={self.sparsity} trials={self.trials} "
            f"seed={self.seed} full_scale={self.full_scale if self.full_scale is not None else 'auto'}",
            f"# estimator={self.estimator}",
            sep.join(["bx\\ba"] + [str(b) for b in self.ba_values]),
        ]
        for bx in self.bx_values:
            cells = []
            for v in self.series(bx):
                cells.append(v if v == EXACT else f"{v:.4f}")
            lines.append(sep.join([str(bx)] + cells))
        return "\n".join(lines) + "\n"


def sqnr_sweep(n=2304, mode=Mode.AND, ba_values=range(1, 9), bx_values=(1, 2, 4, 8), sparsity=0.0,
               full_scale=None, trials=1000, seed=0, **kw) -> SqnrCurve:
    curve = SqnrCurve(n, Mode(mode), sparsity, trials, seed, full_scale, list(ba_values), list(bx_values))
    for bx in curve.bx_values:
        for ba in curve.ba_values:
            cfg = SqnrConfig(n=n, ba=ba, bx=bx, mode=Mode(mode), sparsity=sparsity, full_scale=full_scale,
                             trials=trials, seed=seed, **kw)
            curve.values[(bx, ba)] = measure_sqnr(cfg)
    return curve


# ---------------------------------------------------------------------------
# column transfer functions


@dataclass
class LinearityTable:
    path: str
    n: int
    full_scale: int
    noise_sigma: float
    k: np.ndarray
    per_column: np.ndarray  # (len(k), 256): ADC code or ABN transition code

    @property
    def mean(self) -> np.ndarray:
        return self.per_column.mean(axis=1)

    @property
    def sigma(self) -> np.ndarray:
        return self.per_column.std(axis=1)

    def to_text(self, sep: str = "\t") -> str:
        head = "code" if self.path == "adc" else "transition_code"
        lines = [f"# path={self.path} n={self.n} full_scale={self.full_scale} noise_sigma={self.noise_sigma}",
                 sep.join(["k", f"mean_{head}", f"sigma_{head}"])]
        for k, m, s in zip(self.k, self.mean, self.sigma):
            lines.append(sep.join([str(int(k)), f"{m:.4f}", f"{s:.4f}"]))
        return "\n".join(lines) + "\n"


def all_ones_array(n: int) -> CimaArray:
    arr = CimaArray()
    ones = np.ones(SEGMENT_BITS, dtype=np.uint8)
    for seg in range(N_SEGMENTS):
        arr.write_segment(seg, ones)
    arr.gate_banks(max(1, -(-n // ROW_QUANTUM)), 4)
    return arr


def linearity_sweep(path: str = "adc", n: int = 255, full_scale: int | None = None, noise_sigma: float = 0.0,
                    seed: int = 0, ks=None) -> LinearityTable:
    """Sweep the number of input bits set to 1 over an all-ones array.

    ADC path records the output code of every column; ABN path records, per
    column, the lowest DAC code whose reference flips the comparator to 0
    (64 when it never flips).
    """
    if not 1 <= n <= ROWS:
        raise ValueError(f"n must be in [1, {ROWS}]")
    F = int(full_scale or n)
    arr = all_ones_array(n)
    mask = MaskVector.from_bits(np.ones(n, dtype=np.uint8), arr.n_conf)
    ks = np.arange(n + 1) if ks is None else np.asarray(ks)
    planes = np.zeros((len(ks), ROWS), dtype=np.uint8)
    for r, k in enumerate(ks):
        planes[r, :k] = 1
    sums, _ = arr.evaluate_planes(planes, Mode.XNOR, mask)
    if path == "adc":
        adc = AdcModel(F, noise_sigma, seed)
        table = np.stack([np.asarray(adc_quantize(sums[r], adc, invocation=r)) for r in range(len(ks))])
    elif path == "abn":
        table = np.full((len(ks), COLS), DAC_MAX + 1, dtype=np.int64)
        for t in range(DAC_MAX, -1, -1):
            abn = AbnModel(F, t, noise_sigma, seed)
            for r in range(len(ks)):
                out = np.asarray(abn_binarize(sums[r], abn, invocation=r * (DAC_MAX + 1) + t))
                table[r] = np.where(out == 0, t, table[r])
    else:
        raise ValueError(f"unknown path {path!r}")
    return LinearityTable(path, n, F, noise_sigma, ks, table)
