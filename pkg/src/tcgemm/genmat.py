"""Seeded random FP32 matrix generators for the accuracy experiments.

Generation uses the counter-based Philox engine, so a matrix is a pure
function of its spec: identical specs produce bit-identical matrices
regardless of how many other matrices were drawn before.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import FP32

__all__ = ["Urand", "ExpRand", "MatrixSpec", "generate", "type_pair", "pair_seed"]

# Fixed odd offset deriving a partner stream from a base seed.
_SEED_MIX = 0x9E3779B97F4A7C15


def pair_seed(seed: int) -> int:
    """Seed for the second matrix of a pair drawn from one experiment seed."""
    return (int(seed) + _SEED_MIX) % (1 << 64)


@dataclass(frozen=True)
class Urand:
    """Uniform distribution on the open interval (lo, hi)."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("Urand requires lo < hi")


@dataclass(frozen=True)
class ExpRand:
    """Uniform exponent in [a, b], uniform mantissa, random sign.

    Each element is (2s - 1) * 2**e * m with e an integer uniform on
    [a, b], m uniform on [1, 2) at FP32 granularity, and s a fair bit.
    """

    a: int
    b: int

    def __post_init__(self) -> None:
        if self.a > self.b:
            raise ValueError("ExpRand requires a <= b")


@dataclass(frozen=True)
class MatrixSpec:
    rows: int
    cols: int
    dist: Urand | ExpRand
    seed: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed % (1 << 64))))


def generate(spec: MatrixSpec) -> np.ndarray:
    """Draw the matrix described by spec as a float32 array."""
    rng = _rng(spec.seed)
    shape = (spec.rows, spec.cols)
    if isinstance(spec.dist, Urand):
        lo, hi = spec.dist.lo, spec.dist.hi
        u = rng.random(shape)
        vals = (lo + u * (hi - lo)).astype(np.float32)
        # Keep the interval open: rounding to FP32 can land on an endpoint.
        vals = np.where(vals <= lo, np.nextafter(np.float32(lo), np.float32(hi)), vals)
        vals = np.where(vals >= hi, np.nextafter(np.float32(hi), np.float32(lo)), vals)
        return vals.astype(np.float32)
    dist = spec.dist
    e = rng.integers(dist.a, dist.b + 1, size=shape)
    mant = rng.integers(0, 1 << FP32.man_bits, size=shape)
    s = rng.integers(0, 2, size=shape)
    m = 1.0 + np.ldexp(mant.astype(np.float64), -FP32.man_bits)
    vals = (2.0 * s - 1.0) * np.ldexp(m, e)
    return vals.astype(np.float32)


# Exponent bands from the four accuracy experiment types: the high band is
# fully representable by the scaled FP16 split, the low band degrades it,
# and the bottom band falls outside its range entirely.
_BAND_HIGH = ExpRand(-15, 14)
_BAND_LOW = ExpRand(-35, -15)
_BAND_OUT = ExpRand(-100, -35)


def type_pair(
    type_id: int, m: int, n: int, k: int, seed: int, caption_type2: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Input pair (A, B) for experiment types 1 through 4.

    Type 1: both matrices in the high band.  Type 2: A high, B out of range
    (set ``caption_type2`` for the low-band partner variant).  Type 3: both
    low.  Type 4: both out of range.
    """
    if type_id == 1:
        da, db = _BAND_HIGH, _BAND_HIGH
    elif type_id == 2:
        da, db = _BAND_HIGH, (_BAND_LOW if caption_type2 else _BAND_OUT)
    elif type_id == 3:
        da, db = _BAND_LOW, _BAND_LOW
    elif type_id == 4:
        da, db = _BAND_OUT, _BAND_OUT
    else:
        raise ValueError(f"type_id must be 1..4, got {type_id}")
    a = generate(MatrixSpec(m, k, da, seed))
    b = generate(MatrixSpec(k, n, db, pair_seed(seed)))
    return a, b
