"""Command-line experiment harness emitting CSV tables.

Every experiment is deterministic: the same flags produce byte-identical
output.  Dyadic probabilities are rendered as exact decimals; 64-bit floats
use 17 significant digits so they parse back bit-exactly.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .analysis import (
    empirical_underflow,
    exhaustive_length_distribution,
    gradual_underflow_probability,
    relative_residual,
    underflow_probability,
)
from .formats import RoundingMode
from .genmat import ExpRand, MatrixSpec, Urand, generate, pair_seed, type_pair
from .schemes import (
    SCHEMES_BY_NAME,
    compare_terminal_rounding,
    default_config,
    delta_term_ablation,
    fp64_ref,
    gemm,
)

__all__ = ["main"]


def _fmt64(x: float) -> str:
    return format(float(x), ".17g")


def _dyadic_decimal(fr: Fraction) -> str:
    """Exact decimal rendering of a rational with power-of-two denominator."""
    num, den = fr.numerator, fr.denominator
    k = den.bit_length() - 1
    if den != 1 << k:
        raise ValueError(f"denominator {den} is not a power of two")
    if k == 0:
        return str(num)
    digits = str(num * 5**k).rjust(k + 1, "0")
    return digits[:-k] + "." + digits[-k:]


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part != ""]


def _parse_dist(text: str):
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "urand":
            lo, hi = (float(p) for p in rest.split(","))
            return Urand(lo, hi)
        if kind == "exprand":
            a, b = (int(p) for p in rest.split(","))
            return ExpRand(a, b)
        if kind == "type":
            type_id = int(rest)
            if not 1 <= type_id <= 4:
                raise ValueError
            return ("type", type_id)
    except (TypeError, ValueError):
        raise ValueError(f"bad distribution spec: {text!r}") from None
    raise ValueError(f"unknown distribution kind: {kind!r}")


def _resolve_schemes(text: str):
    schemes = []
    for name in (part.strip() for part in text.split(",")):
        if not name:
            continue
        if name not in SCHEMES_BY_NAME:
            known = ", ".join(sorted(SCHEMES_BY_NAME))
            raise ValueError(f"unknown scheme {name!r}; known: {known}")
        schemes.append((name, SCHEMES_BY_NAME[name]))
    if not schemes:
        raise ValueError("no schemes requested")
    return schemes


def _input_pair(dist, m: int, n: int, k: int, seed: int):
    if isinstance(dist, tuple) and dist[0] == "type":
        return type_pair(dist[1], m, n, k, seed)
    a = generate(MatrixSpec(m, k, dist, seed))
    b = generate(MatrixSpec(k, n, dist, pair_seed(seed)))
    return a, b


def _flags_field(flags) -> str:
    parts = []
    if flags.saw_overflow:
        parts.append("overflow")
    if flags.saw_out_of_range:
        parts.append("out_of_range")
    return ";".join(parts)


def cmd_split_stats(args) -> list[str]:
    rounding = RoundingMode.parse(args.rounding)
    dist = exhaustive_length_distribution(rounding)
    lines = ["length,prob_num,prob_den"]
    for length in sorted(dist.probabilities):
        p = dist.probabilities[length]
        lines.append(f"{length},{p.numerator},{p.denominator}")
    lines.append(f"expectation,{_dyadic_decimal(dist.expectation)}")
    return lines


def cmd_underflow(args) -> list[str]:
    if args.e_min > args.e_max:
        raise ValueError("--e-min must not exceed --e-max")
    lines = ["e_v,p_u_theory,p_ugu_theory,p_u_emp,p_ugu_emp,samples"]
    for e_v in range(args.e_min, args.e_max + 1):
        p_u = underflow_probability(e_v)
        p_ugu = gradual_underflow_probability(e_v)
        rate_u, rate_ugu = empirical_underflow(e_v, args.samples, args.seed)
        lines.append(
            f"{e_v},{_dyadic_decimal(p_u)},{_dyadic_decimal(p_ugu)},"
            f"{_fmt64(rate_u)},{_fmt64(rate_ugu)},{args.samples}"
        )
    return lines


def cmd_gemm_accuracy(args) -> list[str]:
    schemes = _resolve_schemes(args.scheme)
    dist = _parse_dist(args.dist)
    seeds = _parse_int_list(args.seeds)
    lines = ["m,n,k,scheme,seed,residual,flags"]
    for m in _parse_int_list(args.m):
        for n in _parse_int_list(args.n):
            for k in _parse_int_list(args.k):
                refs = {}
                inputs = {}
                for seed in seeds:
                    a, b = _input_pair(dist, m, n, k, seed)
                    inputs[seed] = (a, b)
                    refs[seed] = gemm(a, b, fp64_ref()).output
                for name, scheme in schemes:
                    cfg = default_config(
                        scheme, block_k=args.block_k, acc_bits=args.acc_bits
                    )
                    residuals = []
                    flag_fields = []
                    for seed in seeds:
                        a, b = inputs[seed]
                        run = gemm(a, b, scheme, cfg)
                        res = relative_residual(run.output, refs[seed])
                        residuals.append(res)
                        flag_fields.append(_flags_field(run.flags))
                        lines.append(
                            f"{m},{n},{k},{name},{seed},{_fmt64(res)},{flag_fields[-1]}"
                        )
                    avg = float(np.mean(residuals))
                    union = ";".join(
                        p for p in ("overflow", "out_of_range")
                        if any(p in f for f in flag_fields)
                    )
                    lines.append(f"{m},{n},{k},{name},avg,{_fmt64(avg)},{union}")
    return lines


def cmd_rounding_ablation(args) -> list[str]:
    dist = _parse_dist(args.dist)
    if isinstance(dist, tuple):
        raise ValueError("rounding-ablation takes urand or exprand distributions")
    seeds = _parse_int_list(args.seeds)
    sizes = [
        (m, n, k)
        for m in _parse_int_list(args.m)
        for n in _parse_int_list(args.n)
        for k in _parse_int_list(args.k)
    ]
    rows = compare_terminal_rounding(
        sizes, dist, seeds, block_k=args.block_k, acc_bits=args.acc_bits
    )
    lines = ["m,n,k,seed,residual_rn,residual_rz,residual_fp32"]
    for row in rows:
        lines.append(
            f"{row.m},{row.n},{row.k},{row.seed},"
            f"{_fmt64(row.residual_rn)},{_fmt64(row.residual_rz)},{_fmt64(row.residual_fp32)}"
        )
    return lines


def cmd_ablate_delta(args) -> list[str]:
    dist = _parse_dist(args.dist)
    if isinstance(dist, tuple):
        raise ValueError("ablate-delta takes urand or exprand distributions")
    seeds = _parse_int_list(args.seeds)
    lines = ["m,n,k,seed,residual_3term,residual_4term,max_ulp_diff"]
    for m in _parse_int_list(args.m):
        for n in _parse_int_list(args.n):
            for k in _parse_int_list(args.k):
                for seed in seeds:
                    a, b = _input_pair(dist, m, n, k, seed)
                    ref = gemm(a, b, fp64_ref()).output
                    run3, run4, max_ulp = delta_term_ablation(a, b)
                    r3 = relative_residual(run3.output, ref)
                    r4 = relative_residual(run4.output, ref)
                    lines.append(
                        f"{m},{n},{k},{seed},{_fmt64(r3)},{_fmt64(r4)},{_fmt64(max_ulp)}"
                    )
    return lines


def _add_size_flags(p: argparse.ArgumentParser, default_k: str) -> None:
    p.add_argument("--m", default="16", help="comma list of row counts")
    p.add_argument("--n", default="16", help="comma list of column counts")
    p.add_argument("--k", default=default_k, help="comma list of inner dimensions")
    p.add_argument("--seeds", default="0,1,2,3,4,5,6,7", help="comma list of seeds")
    p.add_argument("--block-k", type=int, default=16, help="emulated unit block depth")
    p.add_argument("--acc-bits", type=int, default=25,
                   help="emulated accumulator significand bits")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcgemm",
        description="Mixed-precision GEMM emulation experiments (CSV output).",
    )
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split-stats", help="exact kept-mantissa-length distribution")
    p.add_argument("--rounding", default="rn", help="rn, rna, or rz")
    p.set_defaults(func=cmd_split_stats)

    p = sub.add_parser("underflow", help="residual underflow probabilities")
    p.add_argument("--e-min", type=int, default=-30)
    p.add_argument("--e-max", type=int, default=14)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_underflow)

    p = sub.add_parser("gemm-accuracy", help="relative residuals per scheme")
    _add_size_flags(p, default_k="256,1024,4096")
    p.add_argument("--scheme", default="corrected3_halfhalf,fp32_simt",
                   help="comma list of scheme names")
    p.add_argument("--dist", default="urand:-1,1",
                   help="urand:lo,hi | exprand:a,b | type:1..4")
    p.set_defaults(func=cmd_gemm_accuracy)

    p = sub.add_parser("rounding-ablation",
                       help="terminal RN vs RZ in the four-term scheme")
    _add_size_flags(p, default_k="16,256,1024,4096")
    p.add_argument("--dist", default="urand:-1,1")
    p.set_defaults(func=cmd_rounding_ablation)

    p = sub.add_parser("ablate-delta", help="three-term vs four-term correction")
    _add_size_flags(p, default_k="16,1024")
    p.add_argument("--dist", default="urand:-1,1")
    p.set_defaults(func=cmd_ablate_delta)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        lines = args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
