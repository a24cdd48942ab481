"""Evaluation math: error statistics, PSNR, compression ratio, bitrate,
throughput, and the end-to-end transfer speedup model.

Conventions, fixed across the package: PSNR is measured against the
original field's value range, GB means 1e9 bytes, and bitrate is bits per
input value (32/cr for f32 input).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Field
from .errors import DimMismatch, ZeroCompressedSize


@dataclass(frozen=True)
class QualityReport:
    max_abs_err: float
    mse: float
    psnr_db: float
    nrmse: float
    bound_satisfied: bool


@dataclass(frozen=True)
class RateReport:
    cr: float
    bitrate_bits_per_value: float
    input_bytes: int
    compressed_bytes: int


@dataclass(frozen=True)
class SpeedupInputs:
    bw_gbps: float
    t_compr_gbps: float
    cr: float

    def __post_init__(self):
        for name in ("bw_gbps", "t_compr_gbps", "cr"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


def quality(orig: Field, recon: Field, eb_abs: float | None = None) -> QualityReport:
    """Error statistics of a reconstruction against its original.

    PSNR is +inf for a perfect reconstruction and -inf for a nonzero error
    on a constant (zero-range) original.  bound_satisfied is True when no
    bound was given.
    """

    if orig.dims != recon.dims:
        raise DimMismatch(f"{orig.dims} vs {recon.dims}")
    o = orig.data.astype(np.float64)
    r = recon.data.astype(np.float64)
    d = o - r
    max_err = float(np.abs(d).max()) if d.size else 0.0
    mse = float(np.mean(d * d)) if d.size else 0.0
    rng = float(o.max() - o.min()) if d.size else 0.0
    if mse == 0.0:
        psnr = math.inf
        nrmse = 0.0
    elif rng == 0.0:
        psnr = -math.inf
        nrmse = math.inf
    else:
        psnr = 20.0 * math.log10(rng) - 10.0 * math.log10(mse)
        nrmse = math.sqrt(mse) / rng
    ok = True if eb_abs is None else max_err <= eb_abs
    return QualityReport(max_err, mse, psnr, nrmse, ok)


def rate(input_bytes: int, compressed_bytes: int, element_count: int) -> RateReport:
    """cr and bitrate for one compressed artifact.

    For f32 input (input_bytes == 4 * element_count) the bitrate is
    computed as 32/cr, so the bitrate*cr identity holds as tightly as
    floating point allows.
    """

    input_bytes = int(input_bytes)
    compressed_bytes = int(compressed_bytes)
    element_count = int(element_count)
    if input_bytes <= 0 or element_count <= 0:
        raise ValueError("input_bytes and element_count must be positive")
    if compressed_bytes <= 0:
        raise ZeroCompressedSize("compressed size must be positive")
    cr = input_bytes / compressed_bytes
    if input_bytes == 4 * element_count:
        bitrate = 32.0 / cr
    else:
        bitrate = 8.0 * compressed_bytes / element_count
    return RateReport(cr, bitrate, input_bytes, compressed_bytes)


def overall_speedup(s: SpeedupInputs) -> float:
    """End-to-end transfer gain from compressing before moving data.

    1 / ((1/(bw*cr) + 1/t_compr) * bw): the ratio of plain-transfer time
    to compress-then-transfer time for the same payload.  Break-even
    (speedup 1.0) at t_compr = bw*cr/(cr-1); grows toward t_compr/bw as
    cr -> infinity.
    """

    return 1.0 / ((1.0 / (s.bw_gbps * s.cr) + 1.0 / s.t_compr_gbps) * s.bw_gbps)


def throughput(bytes_processed: int, wall_seconds: float) -> float:
    """Decimal gigabytes per second."""

    if not wall_seconds > 0:
        raise ValueError("wall_seconds must be positive")
    return bytes_processed / 1e9 / wall_seconds


def median_throughput(bytes_processed: int, runs_seconds: list[float]) -> float:
    """Median-of-runs GB/s; the harness convention for noisy desk timings."""

    if not runs_seconds:
        raise ValueError("need at least one timing")
    return throughput(bytes_processed, float(np.median(runs_seconds)))
