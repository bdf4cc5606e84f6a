"""Closed-form and empirical statistics for the splitting schemes.

Exact rational probabilities for the residual-term underflow analysis, the
exhaustive kept-mantissa-length distribution, and the relative residual
metric used throughout the accuracy experiments.  Probabilities are dyadic
rationals, so table checks are equality checks, not tolerance checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .formats import FP16, FP32, RoundingMode, round_to_format
from .splitting import _length_from_error, markidis_halfhalf

__all__ = [
    "MantissaLengthDistribution",
    "UnderflowCurve",
    "ResidualReport",
    "zero_run_probability",
    "gradual_underflow_probability",
    "underflow_probability",
    "underflow_curve",
    "empirical_underflow",
    "exhaustive_length_distribution",
    "relative_residual",
]

_L_F32 = FP32.man_bits  # 23
_L_F16 = FP16.man_bits  # 10
_B_F16 = FP16.bias  # 15
_MAX_RUN = _L_F32 - _L_F16  # 13


@dataclass(frozen=True)
class MantissaLengthDistribution:
    """Exact distribution of kept mantissa length over all 2**23 mantissas."""

    probabilities: dict[int, Fraction]

    @property
    def expectation(self) -> Fraction:
        return sum(
            (Fraction(length) * p for length, p in self.probabilities.items()),
            Fraction(0),
        )


@dataclass(frozen=True)
class UnderflowCurve:
    """Theoretical underflow probabilities per unbiased input exponent."""

    points: list[tuple[int, Fraction, Fraction]]  # (e_v, p_u, p_u_plus_gu)


@dataclass(frozen=True)
class ResidualReport:
    relative_residual: float
    m: int
    n: int
    k: int
    scheme: str
    seed: int


def zero_run_probability(n: int) -> Fraction:
    """Probability that the mantissa's zero run below the kept bits has length n.

    Under i.i.d. uniform mantissa bits the run length below the top 10
    fraction bits is geometric, saturating at 13 where the remaining bits
    run out.
    """
    if n < 0 or n > _MAX_RUN:
        return Fraction(0)
    if n == _MAX_RUN:
        return Fraction(1, 2**_MAX_RUN)
    return Fraction(1, 2 ** (n + 1))


def _tail_probability(lower: int) -> Fraction:
    return sum(
        (zero_run_probability(l) for l in range(max(lower, 0), _MAX_RUN + 1)),
        Fraction(0),
    )


def gradual_underflow_probability(e_v: int) -> Fraction:
    """P that the residual term underflows or gradually underflows in FP16.

    The residual of a value at unbiased exponent e_v lands below the FP16
    normal range whenever its zero run exceeds e_v - 10 + 15 - 2.
    """
    return _tail_probability(e_v - _L_F16 + _B_F16 - 2 + 1)


def underflow_probability(e_v: int) -> Fraction:
    """P that the residual term underflows FP16 entirely (below all subnormals)."""
    return _tail_probability(e_v + _B_F16 - 2 + 1)


def underflow_curve(e_min: int, e_max: int) -> UnderflowCurve:
    if e_min > e_max:
        raise ValueError("e_min must not exceed e_max")
    return UnderflowCurve(
        [
            (e, underflow_probability(e), gradual_underflow_probability(e))
            for e in range(e_min, e_max + 1)
        ]
    )


def empirical_underflow(
    e_v: int,
    samples: int,
    seed: int,
    rounding: RoundingMode = RoundingMode.RZ,
) -> tuple[float, float]:
    """Monte-Carlo rates of residual underflow and underflow-plus-gradual.

    Draws FP32 values with fixed unbiased exponent and uniform mantissa,
    performs the unscaled FP16 split (RZ by default, matching the
    derivation's assumption; RN available for sensitivity), and classifies
    the residual by its binade.  A zero residual occupies the
    all-bits-consumed slot at e_v - 24, mirroring how the closed forms
    count the saturated zero run.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    mant = rng.integers(0, 1 << _L_F32, size=samples, dtype=np.int64)
    v = np.ldexp(1.0 + np.ldexp(mant.astype(np.float64), -_L_F32), e_v)
    hi = round_to_format(v, FP16, rounding)
    d = v - hi  # exact in the carrier
    _, e2 = np.frexp(np.abs(d))
    pos = np.where(d != 0.0, e2 - 1, e_v - (_L_F32 + 1))
    fp16_sub_min_exp = FP16.min_normal_exp - _L_F16  # -24
    rate_u = float(np.count_nonzero(pos < fp16_sub_min_exp)) / samples
    rate_ugu = float(np.count_nonzero(pos < FP16.min_normal_exp)) / samples
    return rate_u, rate_ugu


_ENUM_CHUNK = 1 << 20


def exhaustive_length_distribution(
    split_rounding: RoundingMode,
) -> MantissaLengthDistribution:
    """Kept-length distribution from enumerating every 23-bit mantissa at e_v = 0.

    The enumeration realizes the uniform independent-bit assumption exactly,
    so the resulting probabilities are exact dyadic rationals.
    """
    scheme = markidis_halfhalf(split_rounding)
    counts = np.zeros(FP32.man_bits + 1, dtype=np.int64)
    total = 1 << _L_F32
    for start in range(0, total, _ENUM_CHUNK):
        mant = np.arange(start, min(start + _ENUM_CHUNK, total), dtype=np.int64)
        v = 1.0 + np.ldexp(mant.astype(np.float64), -_L_F32)
        hi = round_to_format(v, FP16, split_rounding)
        lo = round_to_format(np.ldexp(v - hi, scheme.scale_log2), FP16, split_rounding)
        err = np.abs(v - (hi + np.ldexp(lo, -scheme.scale_log2)))
        lengths = np.where(err == 0.0, FP32.man_bits, _length_from_error(err, 0))
        counts += np.bincount(lengths, minlength=FP32.man_bits + 1)
    probabilities = {
        length: Fraction(int(c), total)
        for length, c in enumerate(counts)
        if c
    }
    return MantissaLengthDistribution(probabilities)


def relative_residual(c_test: np.ndarray, c_ref: np.ndarray) -> float:
    """Frobenius-norm relative residual of a result against a reference.

    Norms are accumulated in 64-bit arithmetic.  A zero reference norm with
    a zero numerator reports an exact match (0.0); with a nonzero numerator
    it is a contract violation.
    """
    test = np.asarray(c_test, dtype=np.float64)
    ref = np.asarray(c_ref, dtype=np.float64)
    if test.shape != ref.shape:
        raise ValueError("shapes differ")
    num = float(np.linalg.norm(ref - test))
    den = float(np.linalg.norm(ref))
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ValueError("zero reference norm with nonzero residual")
    return num / den
