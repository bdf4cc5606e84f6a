"""Bit-exact emulation of a tensor-core style block multiply-accumulate.

The emulated unit computes D = A * B + C for small fragments: products of
low-precision inputs are exact, the running accumulator is truncated to a
configurable significand width (round toward zero) after every addition, and
a single terminal rounding to FP32 is applied after C is added.

Intermediate sums that do not fit the 53-bit carrier are handled with a
two-term error-free transformation followed by round-to-odd, which makes the
subsequent narrow rounding equal to rounding the exact sum (the intermediate
keeps at least two guard bits over any target width used here).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import FP16, FP32, TF32, FloatFormat, RoundingMode, round_to_format
from .formats import _truncate_raw

__all__ = ["MmaConfig", "emulate_mma", "emulate_mma_chain"]


@dataclass(frozen=True)
class MmaConfig:
    """Numerical contract of the emulated matrix multiply-accumulate unit."""

    input_format: FloatFormat = FP16
    acc_significand_bits: int = 25
    step_rounding: RoundingMode = RoundingMode.RZ
    terminal_rounding: RoundingMode = RoundingMode.RZ
    block_k: int = 16

    def __post_init__(self) -> None:
        if self.block_k < 1:
            raise ValueError("block_k must be >= 1")
        if not 1 <= self.acc_significand_bits <= 53:
            raise ValueError("acc_significand_bits must be in [1, 53]")
        if self.step_rounding is not RoundingMode.RZ:
            raise ValueError("the emulated unit truncates between steps (RZ only)")
        # Products of two inputs must stay exact in the carrier.
        if 2 * (self.input_format.man_bits + 1) > 53:
            raise ValueError("input format products would not be exact in float64")


def _sum_round_to_odd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """53-bit sum of a + b whose last significand bit is forced odd when inexact.

    Rounding the result to 51 or fewer significand bits, in any mode, then
    equals rounding the exact sum.
    """
    with np.errstate(invalid="ignore"):
        s = a + b
        tmp = s - a
        err = (a - (s - tmp)) + (b - tmp)
        m, _ = np.frexp(s)
        even = np.fmod(np.ldexp(m, 53), 2.0) == 0.0
        fix = (err != 0.0) & even & np.isfinite(s)
        nudged = np.nextafter(s, np.where(err > 0.0, np.inf, -np.inf))
    return np.where(fix, nudged, s)


def _accumulate_blocks(
    a_blocks: np.ndarray, b_blocks: np.ndarray, cfg: MmaConfig
) -> np.ndarray:
    """Per-block product accumulation with width-limited truncation.

    ``a_blocks`` has shape (nb, m, k0) and ``b_blocks`` (nb, k0, n); returns
    the (nb, m, n) accumulator states before any terminal rounding.  Blocks
    are independent, so they vectorize; within a block the order is fixed
    ascending t, which pins bit-exact determinism.
    """
    nb, m, k0 = a_blocks.shape
    n = b_blocks.shape[2]
    acc = np.zeros((nb, m, n))
    for t in range(k0):
        p = a_blocks[:, :, t, None] * b_blocks[:, t, None, :]  # exact products
        acc = _truncate_raw(_sum_round_to_odd(acc, p), cfg.acc_significand_bits)
    return acc


def _terminal(acc: np.ndarray, c: np.ndarray, cfg: MmaConfig) -> np.ndarray:
    return round_to_format(_sum_round_to_odd(acc, c), FP32, cfg.terminal_rounding)


def emulate_mma(
    a: np.ndarray, b: np.ndarray, c: np.ndarray, cfg: MmaConfig = MmaConfig()
) -> np.ndarray:
    """One block D = A * B + C through the emulated unit.

    A is (m, k), B (k, n) with elements in ``cfg.input_format``; C is an
    FP32 fragment.  The sum acc + C is formed exactly before the single
    terminal rounding.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or c.ndim != 2:
        raise ValueError("emulate_mma expects 2-D fragments")
    m, k = a.shape
    kb, n = b.shape
    if kb != k or c.shape != (m, n):
        raise ValueError(f"fragment shapes do not conform: {a.shape} {b.shape} {c.shape}")
    if k > cfg.block_k:
        raise ValueError(f"k={k} exceeds block_k={cfg.block_k}")
    acc = _accumulate_blocks(a[None], b[None], cfg)[0]
    return _terminal(acc, c, cfg)


def emulate_mma_chain(
    a_blocks, b_blocks, c0: np.ndarray, cfg: MmaConfig = MmaConfig()
) -> np.ndarray:
    """Fold emulate_mma over k-blocks, feeding the accumulator back each time.

    ``a_blocks`` and ``b_blocks`` are sequences of conforming fragments (or
    stacked 3-D arrays) in ascending k order.  The terminal rounding hits
    the carried C on every block, as the hardware accumulator does.
    """
    a3 = np.stack([np.asarray(x, dtype=np.float64) for x in a_blocks])
    b3 = np.stack([np.asarray(x, dtype=np.float64) for x in b_blocks])
    if a3.shape[0] != b3.shape[0]:
        raise ValueError("block counts differ")
    if a3.shape[2] > cfg.block_k:
        raise ValueError(f"block depth {a3.shape[2]} exceeds block_k={cfg.block_k}")
    c = np.asarray(c0, dtype=np.float64)
    accs = _accumulate_blocks(a3, b3, cfg)
    for i in range(accs.shape[0]):
        c = _terminal(accs[i], c, cfg)
    return c
