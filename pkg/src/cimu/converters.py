"""Per-column 8-b ADC and binarizing ABN comparator with 6-b reference DAC.

Column sums are in unit-charge counts.  ``full_scale`` is the column sum that
maps to the top ADC code (or the top DAC code for the ABN).  Optional
Gaussian noise is added to the column sum before conversion; the random
stream depends only on ``(seed, invocation)`` and the column position, so
results never depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CodeOutOfRange

ADC_BITS = 8
ADC_MAX = (1 << ADC_BITS) - 1  # 255
DAC_BITS = 6
DAC_MAX = (1 << DAC_BITS) - 1  # 63


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def noise(sigma: float, seed: int, invocation: int, shape) -> np.ndarray:
    if sigma == 0:
        return np.zeros(shape)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(invocation),))
    return np.random.default_rng(ss).normal(0.0, sigma, size=shape)


@dataclass(frozen=True)
class AdcModel:
    full_scale: int
    noise_sigma: float = 0.0
    seed: int = 0
    resolution: int = ADC_BITS

    def __post_init__(self):
        if self.full_scale < 1:
            raise ValueError("full_scale must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def max_code(self) -> int:
        return (1 << self.resolution) - 1

    @property
    def exact(self) -> bool:
        """True when every column sum in [0, full_scale] survives a roundtrip."""
        return self.noise_sigma == 0 and self.full_scale <= self.max_code


@dataclass(frozen=True)
class AbnModel:
    full_scale: int
    threshold_code: object  # int, or one code per column
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        t = np.asarray(self.threshold_code)
        if np.any((t < 0) | (t > DAC_MAX)):
            raise ValueError(f"threshold_code must be in [0, {DAC_MAX}]")
        if self.full_scale < 1:
            raise ValueError("full_scale must be >= 1")

    @property
    def threshold(self):
        return np.asarray(self.threshold_code) * self.full_scale / DAC_MAX


def adc_quantize(s, adc: AdcModel, invocation: int = 0):
    s = np.asarray(s, dtype=np.int64)
    F, top = adc.full_scale, adc.max_code
    if adc.noise_sigma == 0:
        # integer form of round_half_up(s * top / F)
        code = (2 * s * top + F) // (2 * F)
    else:
        v = (s + noise(adc.noise_sigma, adc.seed, invocation, s.shape)) * top / F
        code = round_half_up(v)
    code = np.clip(code, 0, top)
    return int(code) if code.ndim == 0 else code


def adc_dequantize(code, adc: AdcModel):
    c = np.asarray(code, dtype=np.int64)
    top = adc.max_code
    if np.any((c < 0) | (c > top)):
        raise CodeOutOfRange(f"ADC code outside [0, {top}]")
    s_hat = (2 * c * adc.full_scale + top) // (2 * top)
    return int(s_hat) if s_hat.ndim == 0 else s_hat


def abn_binarize(s, abn: AbnModel, invocation: int = 0):
    s = np.asarray(s, dtype=np.int64)
    if abn.noise_sigma == 0:
        out = DAC_MAX * s >= np.asarray(abn.threshold_code, dtype=np.int64) * abn.full_scale
    else:
        v = s + noise(abn.noise_sigma, abn.seed, invocation, s.shape)
        out = v * DAC_MAX >= np.asarray(abn.threshold_code, dtype=np.int64) * abn.full_scale
    out = out.astype(np.int64)
    return int(out) if out.ndim == 0 else out


def abn_transition_point(threshold_code: int, full_scale: int) -> int:
    """Smallest column sum producing a 1 at the given threshold (noise-free)."""
    return -(-threshold_code * full_scale // DAC_MAX)
