"""Splitting FP32 values into low-precision (hi, lo) pairs and measuring them.

Three schemes are supported: the plain two-term FP16 split, the scaled
variant that multiplies the residual by 2**11 before conversion to push it
out of the FP16 subnormal range, and the TF32 two-term split that keeps the
full FP32 exponent range.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .formats import FP16, FP32, TF32, FloatFormat, RoundingMode, round_to_format

__all__ = [
    "SplitKind",
    "SplitScheme",
    "SplitPair",
    "SplitMatrices",
    "Representability",
    "split_value",
    "split_matrix",
    "reconstruct",
    "kept_mantissa_length",
    "classify_representability",
]

# Exponent shift applied to the residual by the scaled scheme: mantissa
# length of FP16 plus the implicit bit.
RESIDUAL_SCALE_LOG2 = FP16.man_bits + 1


class SplitKind(enum.Enum):
    MARKIDIS_HALFHALF = "markidis_halfhalf"
    SCALED_HALFHALF = "scaled_halfhalf"
    TF32TF32 = "tf32tf32"


@dataclass(frozen=True)
class SplitScheme:
    """A two-term decomposition recipe: target format, residual scale, rounding."""

    kind: SplitKind
    rounding: RoundingMode | None = None

    def __post_init__(self) -> None:
        if self.rounding is None:
            # CUDA's default conversion rounding for FP16; RNA is what the
            # TF32 conversion path offers that keeps the most mantissa.
            default = (
                RoundingMode.RNA
                if self.kind is SplitKind.TF32TF32
                else RoundingMode.RN
            )
            object.__setattr__(self, "rounding", default)

    @property
    def low_format(self) -> FloatFormat:
        return TF32 if self.kind is SplitKind.TF32TF32 else FP16

    @property
    def scale_log2(self) -> int:
        return RESIDUAL_SCALE_LOG2 if self.kind is SplitKind.SCALED_HALFHALF else 0


def markidis_halfhalf(rounding: RoundingMode = RoundingMode.RN) -> SplitScheme:
    return SplitScheme(SplitKind.MARKIDIS_HALFHALF, rounding)


def scaled_halfhalf(rounding: RoundingMode = RoundingMode.RN) -> SplitScheme:
    return SplitScheme(SplitKind.SCALED_HALFHALF, rounding)


def tf32tf32(rounding: RoundingMode = RoundingMode.RNA) -> SplitScheme:
    return SplitScheme(SplitKind.TF32TF32, rounding)


@dataclass(frozen=True)
class SplitPair:
    """One value's decomposition: hi + lo * 2**(-scale_log2) approximates it."""

    hi: float
    lo: float
    scale_log2: int


@dataclass(frozen=True)
class SplitMatrices:
    """Elementwise split of a matrix; hi and lo hold low-format values."""

    hi: np.ndarray
    lo: np.ndarray
    scale_log2: int

    @property
    def rows(self) -> int:
        return self.hi.shape[0]

    @property
    def cols(self) -> int:
        return self.hi.shape[1]


class Representability(enum.Enum):
    HIGH_PRECISION = "high_precision"
    DEGRADED = "degraded"
    OUT_OF_RANGE = "out_of_range"


def _split_arrays(x: np.ndarray, scheme: SplitScheme) -> tuple[np.ndarray, np.ndarray]:
    fmt = scheme.low_format
    hi = round_to_format(x, fmt, scheme.rounding)
    # The subtraction is exact in the carrier; scaling by a power of two is
    # exact as well.  Where hi overflowed, the residual is meaningless.
    residual = np.ldexp(x - np.where(np.isfinite(hi), hi, x), scheme.scale_log2)
    lo = round_to_format(residual, fmt, scheme.rounding)
    lo = np.where(np.isfinite(hi), lo, 0.0)
    return hi, lo


def split_value(v: float, scheme: SplitScheme) -> SplitPair:
    """Split one FP32 value into the scheme's (hi, lo) pair.

    Out-of-range inputs do not raise: too-large values saturate hi to
    +-inf, too-small ones produce hi = lo = 0.  Use
    :func:`classify_representability` to detect both.
    """
    f = float(v)
    if not math.isfinite(f):
        raise ValueError("split_value requires a finite value")
    hi, lo = _split_arrays(np.asarray(f, dtype=np.float64), scheme)
    return SplitPair(float(hi), float(lo), scheme.scale_log2)


def split_matrix(m: np.ndarray, scheme: SplitScheme) -> SplitMatrices:
    """Elementwise :func:`split_value` over a matrix."""
    x = np.asarray(m, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("split_matrix expects a 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError("split_matrix requires finite values")
    hi, lo = _split_arrays(x, scheme)
    return SplitMatrices(hi, lo, scheme.scale_log2)


def reconstruct(p: SplitPair | SplitMatrices):
    """Exact carrier evaluation of hi + lo * 2**(-scale_log2)."""
    if isinstance(p, SplitMatrices):
        return p.hi + np.ldexp(p.lo, -p.scale_log2)
    return p.hi + math.ldexp(p.lo, -p.scale_log2)


def _length_from_error(err, e_v):
    # Mantissa bits kept, measured from the reconstruction-error binade: an
    # error of exactly 2**(e_v - 23) means the last fractional bit was lost.
    _, e2 = np.frexp(err)
    return np.clip(e_v - e2, 0, FP32.man_bits)


def kept_mantissa_length(v: float, p: SplitPair) -> int:
    """How many of the 23 FP32 fraction bits the pair reconstructs.

    Returns 23 when the reconstruction is exact, otherwise
    ``e_v - 1 - floor(log2 |v - reconstruct(p)|)`` clamped to [0, 23].
    """
    from .formats import decompose

    _, e_v, _ = decompose(v)  # validates: normalized, nonzero, finite FP32
    rec = reconstruct(p)
    if rec == v:
        return FP32.man_bits
    err = abs(v - rec)
    if not math.isfinite(err):
        return 0
    return int(_length_from_error(err, e_v))


def _unbiased_exponents(x: np.ndarray) -> np.ndarray:
    _, e2 = np.frexp(np.abs(x))
    return e2 - 1


def classify_array(x: np.ndarray, scheme: SplitScheme) -> np.ndarray:
    """Vectorized representability bands; returns int codes 0/1/2.

    0 = high precision, 1 = degraded, 2 = out of range.  Band edges come
    from format arithmetic, not from fitted data:

    * FP16 schemes: hi keeps at least 10 of its 11 significand bits while
      e_v >= -15 (subnormal quantum 2**-24); the scaled residual falls to
      the final subnormal quantum or below once e_v + scale <= -24; above
      e_v = 15 hi can overflow.
    * TF32: the exponent field matches FP32, so only values beyond the
      FP32 normal range are unrepresentable; below e_v = -103 the residual
      term can drop out of the normal range and precision degrades.
    """
    e_v = _unbiased_exponents(x)
    out = np.zeros(x.shape, dtype=np.int64)
    if scheme.kind is SplitKind.TF32TF32:
        # Residual terms reach at most man_bits binades below the value.
        degraded = e_v < FP32.min_normal_exp + FP32.man_bits
        out_of_range = (e_v < FP32.min_normal_exp) | (e_v > FP32.max_normal_exp)
    else:
        s = scheme.scale_log2
        sub_min_exp = FP16.min_normal_exp - FP16.man_bits  # -24
        degraded = e_v < -FP16.bias
        out_of_range = (e_v + s <= sub_min_exp) | (e_v > FP16.max_normal_exp)
    out[degraded] = 1
    out[out_of_range] = 2
    out[x == 0.0] = 0  # zero splits exactly
    return out


def classify_representability(v: float, scheme: SplitScheme) -> Representability:
    """Whether the scheme represents ``v`` fully, with reduced precision, or not at all."""
    f = float(v)
    if not math.isfinite(f):
        raise ValueError("classify_representability requires a finite value")
    code = int(classify_array(np.asarray(f, dtype=np.float64).reshape(1), scheme)[0])
    return (
        Representability.HIGH_PRECISION,
        Representability.DEGRADED,
        Representability.OUT_OF_RANGE,
    )[code]
