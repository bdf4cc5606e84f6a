"""The GEMM schemes under comparison.

References (FP64 oracle, sequential FP32, LSB-truncated FP32), plain
tensor-core GEMM, the four-term corrected scheme with every term accumulated
in the emulated unit, and the three-term corrected scheme that accumulates
the main term outside the unit in FP32 round-to-nearest and drops the
residual-times-residual term.

All schemes accumulate ascending in k within a fixed block schedule, so a
given (inputs, scheme, config) triple is bit-deterministic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .formats import FP16, FP32, TF32, FloatFormat, RoundingMode, round_to_format
from .mma import MmaConfig, _accumulate_blocks, _sum_round_to_odd, _terminal
from .splitting import (
    SplitKind,
    SplitScheme,
    classify_array,
    markidis_halfhalf,
    scaled_halfhalf,
    split_matrix,
    tf32tf32,
)

__all__ = [
    "GemmKind",
    "GemmScheme",
    "GemmRun",
    "RunFlags",
    "SCHEMES_BY_NAME",
    "gemm",
    "compare_terminal_rounding",
    "delta_term_ablation",
    "fp64_ref",
    "fp32_simt",
    "fp32_lsbtrunc",
    "tc_plain",
    "markidis4",
    "corrected4",
    "corrected3",
]


class GemmKind(enum.Enum):
    FP64_REF = "fp64_ref"
    FP32_SIMT = "fp32_simt"
    FP32_LSBTRUNC = "fp32_lsbtrunc"
    TC_PLAIN = "tc_plain"
    MARKIDIS4 = "markidis4"
    CORRECTED4 = "corrected4"
    CORRECTED3 = "corrected3"


@dataclass(frozen=True)
class GemmScheme:
    """A computation recipe; build instances through the factory functions."""

    kind: GemmKind
    split: SplitScheme | None = None
    terminal: RoundingMode | None = None
    conv_format: FloatFormat | None = None

    @property
    def label(self) -> str:
        for name, scheme in SCHEMES_BY_NAME.items():
            if scheme == self:
                return name
        return self.kind.value

    @property
    def input_format(self) -> FloatFormat | None:
        if self.conv_format is not None:
            return self.conv_format
        if self.split is not None:
            return self.split.low_format
        return None


def fp64_ref() -> GemmScheme:
    return GemmScheme(GemmKind.FP64_REF)


def fp32_simt() -> GemmScheme:
    return GemmScheme(GemmKind.FP32_SIMT)


def fp32_lsbtrunc() -> GemmScheme:
    return GemmScheme(GemmKind.FP32_LSBTRUNC)


def tc_plain(fmt: FloatFormat = FP16) -> GemmScheme:
    return GemmScheme(GemmKind.TC_PLAIN, conv_format=fmt)


def markidis4(fmt: FloatFormat = FP16) -> GemmScheme:
    split = markidis_halfhalf() if fmt == FP16 else tf32tf32()
    return GemmScheme(GemmKind.MARKIDIS4, split=split)


def corrected4(
    terminal: RoundingMode, split: SplitScheme | None = None
) -> GemmScheme:
    if split is None:
        split = markidis_halfhalf()
    if split.scale_log2 != 0:
        # A scaled residual cannot share one in-unit accumulator with the
        # unscaled main term; the four-term recipe needs a plain split.
        raise ValueError("corrected4 requires an unscaled split scheme")
    return GemmScheme(GemmKind.CORRECTED4, split=split, terminal=terminal)


def corrected3(split: SplitScheme | None = None) -> GemmScheme:
    if split is None:
        split = scaled_halfhalf()
    return GemmScheme(GemmKind.CORRECTED3, split=split)


SCHEMES_BY_NAME: dict[str, GemmScheme] = {
    "fp64_ref": fp64_ref(),
    "fp32_simt": fp32_simt(),
    "fp32_lsbtrunc": fp32_lsbtrunc(),
    "tc_plain_fp16": tc_plain(FP16),
    "tc_plain_tf32": tc_plain(TF32),
    "markidis4": markidis4(FP16),
    "corrected4_rn": corrected4(RoundingMode.RN),
    "corrected4_rz": corrected4(RoundingMode.RZ),
    "corrected3_halfhalf": corrected3(scaled_halfhalf()),
    "corrected3_tf32": corrected3(tf32tf32()),
}


@dataclass(frozen=True)
class RunFlags:
    saw_overflow: bool = False
    saw_out_of_range: bool = False


@dataclass(frozen=True)
class GemmRun:
    m: int
    n: int
    k: int
    scheme: GemmScheme
    output: np.ndarray
    flags: RunFlags


def default_config(scheme: GemmScheme, block_k: int = 16, acc_bits: int = 25) -> MmaConfig:
    fmt = scheme.input_format or FP16
    return MmaConfig(
        input_format=fmt, acc_significand_bits=acc_bits, block_k=block_k
    )


def _as_fp32_carrier(a) -> np.ndarray:
    x = np.asarray(a, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("gemm expects 2-D matrices")
    if not np.all(np.isfinite(x)):
        raise ValueError("gemm requires finite inputs")
    if not np.array_equal(x.astype(np.float32).astype(np.float64), x):
        raise ValueError("inputs must hold FP32 values")
    return x


def _round32_rn(x: np.ndarray) -> np.ndarray:
    return x.astype(np.float32).astype(np.float64)


def _sequential_ref64(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    n = b.shape[1]
    acc = np.zeros((m, n))
    for t in range(k):
        acc = acc + a[:, t, None] * b[t, None, :]
    return acc


def _blocked_simt32(a: np.ndarray, b: np.ndarray, block_k: int) -> np.ndarray:
    # The FP32 baseline follows the same canonical schedule as every other
    # scheme: ascending k, plain sequential within each block, one add per
    # block into the carried sum.  Every product and every running sum is
    # rounded to FP32 (float32 ops are correctly rounded RN, no FMA
    # contraction, no pairwise tree).
    a32 = a.astype(np.float32)
    b32 = b.astype(np.float32)
    m, k = a.shape
    acc = np.zeros((m, b.shape[1]), dtype=np.float32)
    for start in range(0, k, block_k):
        partial = np.zeros_like(acc)
        for t in range(start, min(start + block_k, k)):
            partial = partial + a32[:, t, None] * b32[t, None, :]
        acc = acc + partial
    return acc


def _zero_mantissa_lsb(a: np.ndarray) -> np.ndarray:
    bits = a.astype(np.float32).view(np.uint32)
    return (bits & np.uint32(0xFFFFFFFE)).view(np.float32).astype(np.float64)


def _pad_k(a: np.ndarray, b: np.ndarray, block_k: int) -> tuple[np.ndarray, np.ndarray]:
    k = a.shape[1]
    rem = k % block_k
    if rem == 0:
        return a, b
    pad = block_k - rem  # zero columns/rows contribute exact zeros everywhere
    a2 = np.concatenate([a, np.zeros((a.shape[0], pad))], axis=1)
    b2 = np.concatenate([b, np.zeros((pad, b.shape[1]))], axis=0)
    return a2, b2


def _to_blocks(a: np.ndarray, b: np.ndarray, block_k: int) -> tuple[np.ndarray, np.ndarray]:
    m, k = a.shape
    n = b.shape[1]
    nb = k // block_k
    a3 = a.reshape(m, nb, block_k).transpose(1, 0, 2)
    b3 = b.reshape(nb, block_k, n)
    return a3, b3


def _plain_conversion_flags(x: np.ndarray, fmt: FloatFormat, mode: RoundingMode) -> RunFlags:
    conv = round_to_format(x, fmt, mode)
    overflow = bool(np.any(np.isinf(conv)))
    vanished = bool(np.any((conv == 0.0) & (x != 0.0)))
    return RunFlags(saw_overflow=overflow, saw_out_of_range=overflow or vanished)


def _split_flags(a: np.ndarray, b: np.ndarray, split: SplitScheme,
                 sa_hi: np.ndarray, sb_hi: np.ndarray) -> RunFlags:
    out = bool(np.any(classify_array(a, split) == 2) or np.any(classify_array(b, split) == 2))
    overflow = bool(np.any(np.isinf(sa_hi)) or np.any(np.isinf(sb_hi)))
    return RunFlags(saw_overflow=overflow, saw_out_of_range=out)


def _fold_chain(accs: np.ndarray, c0: np.ndarray, cfg: MmaConfig) -> np.ndarray:
    c = c0
    for i in range(accs.shape[0]):
        c = _terminal(accs[i], c, cfg)
    return c


def _run_in_unit_terms(a3_terms, b3_terms, c0: np.ndarray, cfg: MmaConfig) -> np.ndarray:
    """Feed several term block-stacks through one shared accumulator.

    Per block, every term issues one emulated mma with the carried C, in the
    order the terms are listed.
    """
    accs = [_accumulate_blocks(a3, b3, cfg) for a3, b3 in zip(a3_terms, b3_terms)]
    c = c0
    for bi in range(accs[0].shape[0]):
        for term in accs:
            c = _terminal(term[bi], c, cfg)
    return c


def _corrected_core(
    a: np.ndarray,
    b: np.ndarray,
    split: SplitScheme,
    cfg: MmaConfig,
    include_delta_delta: bool,
) -> tuple[np.ndarray, RunFlags]:
    """Main term accumulated outside the unit, residual terms inside.

    Per k-block the residual accumulator receives dA*B then A*dB (terminal
    RZ each time); the main term runs through the unit against a zero
    fragment and is folded into C with one FP32 round-to-nearest add per
    block.  After all blocks C gains the residual accumulator divided by
    the split scale, and optionally the dA*dB chain divided by the squared
    scale (the term the three-term scheme drops).
    """
    s = split.scale_log2
    sa = split_matrix(a, split)
    sb = split_matrix(b, split)
    flags = _split_flags(a, b, split, sa.hi, sb.hi)
    k0 = cfg.block_k
    ah, bh = _to_blocks(sa.hi, sb.hi, k0)
    al, bl = _to_blocks(sa.lo, sb.lo, k0)
    cfg_rz = replace(cfg, terminal_rounding=RoundingMode.RZ)

    accs_da_b = _accumulate_blocks(al, bh, cfg_rz)
    accs_a_db = _accumulate_blocks(ah, bl, cfg_rz)
    accs_main = _accumulate_blocks(ah, bh, cfg_rz)

    shape = (a.shape[0], b.shape[1])
    frag_dc = np.zeros(shape)
    for bi in range(accs_main.shape[0]):
        frag_dc = _terminal(accs_da_b[bi], frag_dc, cfg_rz)
        frag_dc = _terminal(accs_a_db[bi], frag_dc, cfg_rz)

    zero = np.zeros(shape)
    c = np.zeros(shape)
    for bi in range(accs_main.shape[0]):
        tmp = _terminal(accs_main[bi], zero, cfg_rz)
        c = _round32_rn(_sum_round_to_odd(c, tmp))

    # Scale removal is an exact exponent adjustment; only the FP32 add rounds.
    c = _round32_rn(_sum_round_to_odd(c, np.ldexp(frag_dc, -s)))
    if include_delta_delta:
        accs_dd = _accumulate_blocks(al, bl, cfg_rz)
        frag_ddc = np.zeros(shape)
        for bi in range(accs_dd.shape[0]):
            frag_ddc = _terminal(accs_dd[bi], frag_ddc, cfg_rz)
        c = _round32_rn(_sum_round_to_odd(c, np.ldexp(frag_ddc, -2 * s)))
    return c, flags


def gemm(a, b, scheme: GemmScheme, cfg: MmaConfig | None = None) -> GemmRun:
    """Run one matrix product A @ B under the given scheme.

    The terminal rounding of the emulated unit is fixed by the scheme
    (round toward zero everywhere except the four-term scheme, which
    carries its own choice); cfg supplies block depth, accumulator width
    and input format.
    """
    A = _as_fp32_carrier(a)
    B = _as_fp32_carrier(b)
    m, k = A.shape
    kb, n = B.shape
    if kb != k:
        raise ValueError(f"inner dimensions differ: {k} vs {kb}")
    if cfg is None:
        cfg = default_config(scheme)

    flags = RunFlags()
    if scheme.kind is GemmKind.FP64_REF:
        out = _sequential_ref64(A, B)
    elif scheme.kind is GemmKind.FP32_SIMT:
        out = _blocked_simt32(A, B, cfg.block_k)
    elif scheme.kind is GemmKind.FP32_LSBTRUNC:
        out = _blocked_simt32(_zero_mantissa_lsb(A), _zero_mantissa_lsb(B), cfg.block_k)
    else:
        Ap, Bp = _pad_k(A, B, cfg.block_k)
        if scheme.kind is GemmKind.TC_PLAIN:
            fmt = scheme.conv_format
            conv_mode = RoundingMode.RN if fmt == FP16 else RoundingMode.RNA
            flags = _plain_conversion_flags(np.concatenate([Ap.ravel(), Bp.ravel()]), fmt, conv_mode)
            af = round_to_format(Ap, fmt, conv_mode)
            bf = round_to_format(Bp, fmt, conv_mode)
            a3, b3 = _to_blocks(af, bf, cfg.block_k)
            cfg_rz = replace(cfg, terminal_rounding=RoundingMode.RZ)
            c = _fold_chain(_accumulate_blocks(a3, b3, cfg_rz), np.zeros((m, n)), cfg_rz)
        elif scheme.kind in (GemmKind.MARKIDIS4, GemmKind.CORRECTED4):
            split = scheme.split
            sa = split_matrix(Ap, split)
            sb = split_matrix(Bp, split)
            flags = _split_flags(Ap, Bp, split, sa.hi, sb.hi)
            ah, bh = _to_blocks(sa.hi, sb.hi, cfg.block_k)
            al, bl = _to_blocks(sa.lo, sb.lo, cfg.block_k)
            terminal = scheme.terminal if scheme.kind is GemmKind.CORRECTED4 else RoundingMode.RZ
            cfg_t = replace(cfg, terminal_rounding=terminal)
            # Term order follows the reference four-call loop: dA*dB first.
            c = _run_in_unit_terms(
                [al, al, ah, ah], [bl, bh, bl, bh], np.zeros((m, n)), cfg_t
            )
        elif scheme.kind is GemmKind.CORRECTED3:
            c, flags = _corrected_core(Ap, Bp, scheme.split, cfg, include_delta_delta=False)
        else:  # pragma: no cover
            raise ValueError(f"unhandled scheme kind: {scheme.kind}")
        out = c.astype(np.float32)
        if np.any(~np.isfinite(out)):
            flags = replace(flags, saw_overflow=True)

    return GemmRun(m=m, n=n, k=k, scheme=scheme, output=out, flags=flags)


@dataclass(frozen=True)
class TerminalRoundingRow:
    m: int
    n: int
    k: int
    seed: int
    residual_rn: float
    residual_rz: float
    residual_fp32: float


def compare_terminal_rounding(sizes, dist, seeds, block_k: int = 16, acc_bits: int = 25):
    """Four-term corrected GEMM with terminal RN vs RZ against the FP32 baseline.

    For every (m, n, k) in sizes and every seed, draws A and B from ``dist``
    and reports relative residuals versus the FP64 reference.
    """
    from .analysis import relative_residual
    from .genmat import MatrixSpec, generate, pair_seed

    rows = []
    for (m, n, k) in sizes:
        for seed in seeds:
            A = generate(MatrixSpec(m, k, dist, seed))
            B = generate(MatrixSpec(k, n, dist, pair_seed(seed)))
            ref = gemm(A, B, fp64_ref()).output
            res = {}
            for name, scheme in (
                ("rn", corrected4(RoundingMode.RN)),
                ("rz", corrected4(RoundingMode.RZ)),
                ("fp32", fp32_simt()),
            ):
                cfg = default_config(scheme, block_k=block_k, acc_bits=acc_bits)
                res[name] = relative_residual(gemm(A, B, scheme, cfg).output, ref)
            rows.append(
                TerminalRoundingRow(m, n, k, seed, res["rn"], res["rz"], res["fp32"])
            )
    return rows


def _ulp_fp32(x: np.ndarray) -> np.ndarray:
    _, e2 = np.frexp(np.abs(x))
    e = np.clip(e2 - 1, FP32.min_normal_exp, FP32.max_normal_exp)
    return np.ldexp(1.0, e - FP32.man_bits)


def delta_term_ablation(
    a, b, split: SplitScheme | None = None, cfg: MmaConfig | None = None
) -> tuple[GemmRun, GemmRun, float]:
    """Run the three-term scheme and its four-term sibling on the same splits.

    The two runs differ only in the dropped residual-times-residual chain.
    Returns both runs plus the largest elementwise difference measured in
    FP32 ulps of the four-term output.
    """
    if split is None:
        split = scaled_halfhalf()
    scheme3 = corrected3(split)
    if cfg is None:
        cfg = default_config(scheme3)
    A = _as_fp32_carrier(a)
    B = _as_fp32_carrier(b)
    m, k = A.shape
    n = B.shape[1]
    Ap, Bp = _pad_k(A, B, cfg.block_k)
    c3, flags = _corrected_core(Ap, Bp, split, cfg, include_delta_delta=False)
    c4, _ = _corrected_core(Ap, Bp, split, cfg, include_delta_delta=True)
    run3 = GemmRun(m, n, k, scheme3, c3.astype(np.float32), flags)
    run4 = GemmRun(
        m, n, k,
        GemmScheme(GemmKind.CORRECTED4, split=split, terminal=RoundingMode.RZ),
        c4.astype(np.float32), flags,
    )
    diff = np.abs(c3 - c4)
    max_ulp = float(np.max(diff / _ulp_fp32(c4))) if diff.size else 0.0
    return run3, run4, max_ulp
