"""Element number formats and bit-plane decomposition.

Two formats are supported:

``TWOS_COMPLEMENT``
    Ordinary B-bit two's complement, used with bit-wise AND in the array.

``XNOR_SIGNED``
    Every bit carries +1 (bit set) or -1 (bit clear).  For B >= 2 the bit
    weights are ``(2**(B-2), ..., 2, 1, 1)`` so that zero is representable;
    the format covers exactly the even integers in ``[-2**(B-1), 2**(B-1)]``.
    For B = 1 it covers ``{-1, +1}``.

Bit sequences are ordered most-significant first, matching
:func:`bit_weights`.  A *code* is the same bits packed into an unsigned
integer, with ``bits[0]`` at position ``B-1`` (so bit ``k`` of the code
carries weight ``bit_weights(fmt)[B-1-k]``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import UnrepresentableValue, WidthMismatch

MAX_WIDTH = 8


class Kind(enum.Enum):
    TWOS_COMPLEMENT = "twos"
    XNOR_SIGNED = "xnor"


@dataclass(frozen=True)
class NumberFormat:
    kind: Kind
    width: int

    def __post_init__(self):
        if not isinstance(self.kind, Kind):
            object.__setattr__(self, "kind", Kind(self.kind))
        if not 1 <= int(self.width) <= MAX_WIDTH:
            raise ValueError(f"width must be in [1, {MAX_WIDTH}], got {self.width}")

    @property
    def is_xnor(self) -> bool:
        return self.kind is Kind.XNOR_SIGNED

    @property
    def min_value(self) -> int:
        if self.is_xnor and self.width == 1:
            return -1
        return -(1 << (self.width - 1))

    @property
    def max_value(self) -> int:
        if self.is_xnor:
            return 1 if self.width == 1 else 1 << (self.width - 1)
        return (1 << (self.width - 1)) - 1

    def representable(self, value) -> np.ndarray:
        """Elementwise membership test; works on scalars and arrays."""
        v = np.asarray(value)
        ok = (v >= self.min_value) & (v <= self.max_value)
        if self.is_xnor:
            ok &= (v != 0) if self.width == 1 else (v % 2 == 0)
        return ok

    def values(self) -> np.ndarray:
        """All representable values in ascending order."""
        if self.is_xnor:
            if self.width == 1:
                return np.array([-1, 1])
            return np.arange(self.min_value, self.max_value + 1, 2)
        return np.arange(self.min_value, self.max_value + 1)

    def __str__(self):
        return f"{self.kind.value}{self.width}"


def twos(width: int) -> NumberFormat:
    return NumberFormat(Kind.TWOS_COMPLEMENT, width)


def xnor(width: int) -> NumberFormat:
    return NumberFormat(Kind.XNOR_SIGNED, width)


def parse_format(text: str) -> NumberFormat:
    """Parse ``"twos4"`` / ``"xnor1"`` style names."""
    for kind in Kind:
        if text.startswith(kind.value):
            return NumberFormat(kind, int(text[len(kind.value):]))
    raise ValueError(f"unknown number format {text!r}")


def bit_weights(fmt: NumberFormat) -> np.ndarray:
    B = fmt.width
    if fmt.is_xnor:
        if B == 1:
            return np.array([1], dtype=np.int64)
        return np.array([1 << (B - 2 - i) for i in range(B - 1)] + [1], dtype=np.int64)
    w = np.array([1 << (B - 1 - i) for i in range(B)], dtype=np.int64)
    w[0] = -w[0]
    return w


def _check(values: np.ndarray, fmt: NumberFormat):
    bad = ~fmt.representable(values)
    if np.any(bad):
        first = np.asarray(values)[bad].flat[0]
        raise UnrepresentableValue(f"{int(first)} is not representable in {fmt}")


def decompose_array(values, fmt: NumberFormat) -> np.ndarray:
    """Bits of every element, shape ``values.shape + (B,)``, MSB first."""
    v = np.asarray(values, dtype=np.int64)
    _check(v, fmt)
    B = fmt.width
    shifts = np.arange(B - 1, -1, -1)
    if not fmt.is_xnor:
        u = v & ((1 << B) - 1)
        return ((u[..., None] >> shifts) & 1).astype(np.uint8)
    if B == 1:
        return (v == 1).astype(np.uint8)[..., None]
    # sum(w_i * b_i) = u; canonical: binary u on the top B-1 bits, last bit
    # set only for the top value u == 2**(B-1)
    u = (v + (1 << (B - 1))) // 2
    top = u == (1 << (B - 1))
    hi = np.where(top, (1 << (B - 1)) - 1, u)
    bits = np.empty(v.shape + (B,), dtype=np.uint8)
    bits[..., : B - 1] = (hi[..., None] >> (shifts[:-1] - 1)) & 1
    bits[..., B - 1] = top
    return bits


def compose_array(bits, fmt: NumberFormat) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64)
    if b.shape[-1] != fmt.width:
        raise WidthMismatch(f"expected {fmt.width} bits, got {b.shape[-1]}")
    w = bit_weights(fmt)
    if fmt.is_xnor:
        return (2 * b - 1) @ w
    return b @ w


def decompose(value: int, fmt: NumberFormat) -> tuple:
    """Bit symbols of one value, most significant first."""
    return tuple(int(b) for b in decompose_array(np.int64(value), fmt))


def compose(bits, fmt: NumberFormat) -> int:
    return int(compose_array(np.asarray(bits), fmt))


def bits_to_codes(bits) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64)
    B = b.shape[-1]
    return b @ (1 << np.arange(B - 1, -1, -1))


def codes_to_bits(codes, width: int) -> np.ndarray:
    c = np.asarray(codes, dtype=np.int64)
    return ((c[..., None] >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8)


def encode(values, fmt: NumberFormat) -> np.ndarray:
    """Values to raw ``B``-bit codes (the payload the reshaping buffer packs)."""
    return bits_to_codes(decompose_array(values, fmt))


def decode(codes, fmt: NumberFormat) -> np.ndarray:
    return compose_array(codes_to_bits(codes, fmt.width), fmt)
