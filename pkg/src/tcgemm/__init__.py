"""Bit-exact emulation of tensor-core style mixed-precision GEMM.

A software laboratory for studying error-corrected single-precision matrix
multiplication on emulated low-precision matrix units: parameterized
floating-point formats and rounding, hi/lo splitting schemes, a
width-limited multiply-accumulate emulator, the GEMM schemes built on it,
and the closed-form accuracy and underflow analysis that goes with them.
"""

from .analysis import (
    MantissaLengthDistribution,
    ResidualReport,
    UnderflowCurve,
    empirical_underflow,
    exhaustive_length_distribution,
    gradual_underflow_probability,
    relative_residual,
    underflow_curve,
    underflow_probability,
    zero_run_probability,
)
from .formats import (
    ACC25,
    FP16,
    FP32,
    TF32,
    FloatFormat,
    RoundingMode,
    decompose,
    round_to_format,
    trailing_zero_run,
    truncate_significand,
)
from .genmat import ExpRand, MatrixSpec, Urand, generate, pair_seed, type_pair
from .mma import MmaConfig, emulate_mma, emulate_mma_chain
from .schemes import (
    SCHEMES_BY_NAME,
    GemmKind,
    GemmRun,
    GemmScheme,
    RunFlags,
    compare_terminal_rounding,
    corrected3,
    corrected4,
    default_config,
    delta_term_ablation,
    fp32_lsbtrunc,
    fp32_simt,
    fp64_ref,
    gemm,
    markidis4,
    tc_plain,
)
from .splitting import (
    Representability,
    SplitKind,
    SplitMatrices,
    SplitPair,
    SplitScheme,
    classify_representability,
    kept_mantissa_length,
    markidis_halfhalf,
    reconstruct,
    scaled_halfhalf,
    split_matrix,
    split_value,
    tf32tf32,
)

__version__ = "0.1.0"
