"""Parameterized binary floating-point formats hosted exactly in 64-bit floats.

Every format handled here is small enough that each member value, and every
intermediate produced by this package, is exactly representable in a 64-bit
binary float: FP16 and TF32 carry 11-bit significands, so their products need
at most 22 bits, and a 25-bit accumulator state plus a 24-bit addend spans
fewer than 53 bits.  Values are therefore passed around as plain ``float`` /
``numpy.float64`` carriers; no arbitrary-precision arithmetic is needed.

Operations accept scalars or NumPy arrays and are pure, so they are safe to
call concurrently.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RoundingMode",
    "FloatFormat",
    "FP16",
    "TF32",
    "FP32",
    "ACC25",
    "round_to_format",
    "truncate_significand",
    "decompose",
    "trailing_zero_run",
]

# Carrier limits: float64 has a 53-bit significand and covers binades
# [-1074, 1023] including subnormals.
_CARRIER_SIG_BITS = 53
_CARRIER_MIN_EXP = -1074
_CARRIER_MAX_EXP = 1023


class RoundingMode(enum.Enum):
    """Rounding modes: nearest ties-to-even, nearest ties-away, toward zero."""

    RN = "rn"
    RNA = "rna"
    RZ = "rz"

    @classmethod
    def parse(cls, name: str) -> "RoundingMode":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown rounding mode: {name!r}") from None


@dataclass(frozen=True)
class FloatFormat:
    """A binary floating-point format: sign bit, exponent field, stored fraction.

    ``man_bits`` counts stored fractional bits only; the implicit leading 1
    is not included.  The format must fit the 64-bit carrier so that every
    member value is exactly representable.
    """

    exp_bits: int
    man_bits: int
    bias: int
    subnormals_enabled: bool = True

    def __post_init__(self) -> None:
        if self.man_bits < 1:
            raise ValueError("man_bits must be >= 1")
        if self.exp_bits < 2:
            raise ValueError("exp_bits must be >= 2")
        if self.man_bits + self.exp_bits + 1 > 63:
            raise ValueError("format exceeds the 63-bit carrier budget")
        if self.max_normal_exp > _CARRIER_MAX_EXP:
            raise ValueError("format overflows the float64 carrier range")
        if self.min_normal_exp - self.man_bits < _CARRIER_MIN_EXP:
            raise ValueError("format underflows the float64 carrier range")

    @property
    def min_normal_exp(self) -> int:
        """Unbiased exponent of the smallest normal value."""
        return 1 - self.bias

    @property
    def max_normal_exp(self) -> int:
        """Unbiased exponent of the largest finite binade."""
        return (1 << self.exp_bits) - 2 - self.bias

    @property
    def max_finite(self) -> float:
        return math.ldexp(2.0 - math.ldexp(1.0, -self.man_bits), self.max_normal_exp)

    @property
    def min_normal(self) -> float:
        return math.ldexp(1.0, self.min_normal_exp)

    @property
    def min_subnormal(self) -> float:
        return math.ldexp(1.0, self.min_normal_exp - self.man_bits)


FP16 = FloatFormat(exp_bits=5, man_bits=10, bias=15)
TF32 = FloatFormat(exp_bits=8, man_bits=10, bias=127)
FP32 = FloatFormat(exp_bits=8, man_bits=23, bias=127)
# The emulated accumulator's storage format: FP32 exponent, 25-bit significand.
ACC25 = FloatFormat(exp_bits=8, man_bits=24, bias=127)


def _round_general(x: np.ndarray, fmt: FloatFormat, mode: RoundingMode) -> np.ndarray:
    finite = np.isfinite(x)
    a = np.abs(np.where(finite, x, 0.0))
    m, e2 = np.frexp(a)
    e = e2 - 1  # a in [2^e, 2^(e+1)) for a != 0
    if fmt.subnormals_enabled:
        # Below the normal range the quantum is pinned at the smallest
        # subnormal, which realizes gradual underflow.
        qe = np.maximum(e, fmt.min_normal_exp) - fmt.man_bits
    else:
        qe = np.where(e >= fmt.min_normal_exp, e - fmt.man_bits, fmt.min_normal_exp)
    q = np.ldexp(1.0, qe)
    n = a / q  # exact: power-of-two scaling, n < 2^(man_bits+1)
    lo = np.floor(n)
    frac = n - lo
    if mode is RoundingMode.RZ:
        k = lo
    elif mode is RoundingMode.RNA:
        k = lo + (frac >= 0.5)
    else:
        odd = np.fmod(lo, 2.0) != 0.0
        k = lo + ((frac > 0.5) | ((frac == 0.5) & odd))
    r = k * q  # exact: small integer times a power of two
    if mode is RoundingMode.RZ:
        r = np.minimum(r, fmt.max_finite)
    else:
        r = np.where(r > fmt.max_finite, np.inf, r)
    out = np.copysign(r, x)
    return np.where(finite, out, x)


def round_to_format(v, fmt: FloatFormat, mode: RoundingMode):
    """Round ``v`` to the member of ``fmt`` selected by ``mode``.

    Handles gradual underflow (subnormal quantization when the format
    enables subnormals), flush to zero below the smallest subnormal, and
    saturating overflow: values beyond the largest finite member go to
    +-inf under RN/RNA and to the largest finite member under RZ.  NaN and
    +-inf propagate unchanged.  Accepts scalars or arrays elementwise.
    """
    x = np.asarray(v, dtype=np.float64)
    # numpy's float32/float16 casts are correctly rounded RN conversions;
    # use them on the hot path.  Equivalence with the general path is
    # covered exhaustively by the test suite.
    if mode is RoundingMode.RN and fmt == FP32:
        out = x.astype(np.float32).astype(np.float64)
    elif mode is RoundingMode.RN and fmt == FP16:
        out = x.astype(np.float16).astype(np.float64)
    else:
        with np.errstate(invalid="ignore", over="ignore"):
            out = _round_general(x, fmt, mode)
    if np.ndim(v) == 0:
        return float(out)
    return out


def _truncate_raw(x: np.ndarray, significand_bits: int) -> np.ndarray:
    # Sign-magnitude RZ at the value's own binade; the exponent range is
    # unbounded, modeling an accumulator whose mantissa alone is limited.
    # Non-finite values propagate.
    m, e2 = np.frexp(x)
    n = np.trunc(np.ldexp(m, significand_bits))
    return np.ldexp(n, e2 - significand_bits)


def truncate_significand(v, significand_bits: int):
    """Truncate ``v``'s magnitude to ``significand_bits`` total significand bits.

    The count includes the implicit leading 1.  Sign is preserved, zero maps
    to zero, and no exponent clamping is applied.
    """
    if significand_bits < 1:
        raise ValueError("significand_bits must be >= 1")
    x = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("truncate_significand requires finite input")
    out = _truncate_raw(x, significand_bits)
    if np.ndim(v) == 0:
        return float(out)
    return out


def decompose(v: float) -> tuple[int, int, int]:
    """Break a normalized FP32 value into (sign, unbiased exponent, mantissa).

    The mantissa is the 23-bit stored fraction as an integer;
    ``sign * (1 + mantissa * 2**-23) * 2**exponent`` reconstructs ``v``
    exactly.  Zero, subnormal, infinite, NaN, and non-FP32 inputs are
    rejected.
    """
    f = float(v)
    if not math.isfinite(f):
        raise ValueError("decompose requires a finite value")
    if f == 0.0:
        raise ValueError("decompose rejects zero")
    try:
        bits = struct.unpack("<I", struct.pack("<f", f))[0]
    except OverflowError:
        raise ValueError("value outside FP32 range") from None
    if struct.unpack("<f", struct.pack("<I", bits))[0] != f:
        raise ValueError("value is not an FP32 member")
    exp_field = (bits >> 23) & 0xFF
    if exp_field == 0:
        raise ValueError("decompose rejects subnormal values")
    sign = -1 if bits >> 31 else 1
    return sign, exp_field - FP32.bias, bits & 0x7FFFFF


def trailing_zero_run(mantissa_bits: int) -> int:
    """Count consecutive zero bits of a 23-bit FP32 mantissa from bit 12 down.

    The scan starts at the bit just below the part an 11-bit significand
    keeps and proceeds toward the LSB, so the result lies in [0, 13].
    """
    m = int(mantissa_bits) & 0x7FFFFF
    run = 0
    for i in range(12, -1, -1):
        if (m >> i) & 1:
            break
        run += 1
    return run
