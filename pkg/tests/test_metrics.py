"""Quality, rate, and transfer-speedup reporting."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fzpipe.core import field_from_array
from fzpipe.errors import DimMismatch, ZeroCompressedSize
from fzpipe.metrics import (
    SpeedupInputs,
    median_throughput,
    overall_speedup,
    quality,
    rate,
    throughput,
)


def f32(*vals):
    return field_from_array(np.array(vals, dtype=np.float32))


class TestQuality:
    def test_half_off_psnr_by_hand(self):
        # mse = 0.125 over a unit range: psnr = -10*log10(0.125).
        q = quality(f32(0.0, 1.0), f32(0.5, 1.0))
        assert q.mse == 0.125
        assert q.psnr_db == pytest.approx(-10.0 * math.log10(0.125), rel=1e-12)
        assert q.psnr_db == pytest.approx(9.0309, abs=1e-4)
        assert q.max_abs_err == 0.5

    def test_identical_fields_infinite_psnr(self):
        q = quality(f32(1.0, 2.0, 3.0), f32(1.0, 2.0, 3.0))
        assert q.psnr_db == math.inf
        assert q.mse == 0.0
        assert q.max_abs_err == 0.0

    def test_matches_direct_formula_oracle(self, rng):
        a = rng.uniform(-3, 3, 500).astype(np.float32)
        b = (a + rng.uniform(-0.01, 0.01, 500)).astype(np.float32)
        q = quality(field_from_array(a), field_from_array(b))
        diff = a.astype(np.float64) - b.astype(np.float64)
        mse = float(np.mean(diff ** 2))
        rng_span = float(a.astype(np.float64).max() - a.astype(np.float64).min())
        assert q.mse == pytest.approx(mse, rel=1e-12)
        assert q.psnr_db == pytest.approx(
            20 * math.log10(rng_span) - 10 * math.log10(mse), rel=1e-12)

    def test_bound_check(self):
        q = quality(f32(0.0, 1.0), f32(0.3, 1.0), eb_abs=0.5)
        assert q.bound_satisfied
        q = quality(f32(0.0, 1.0), f32(0.6, 1.0), eb_abs=0.5)
        assert not q.bound_satisfied

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            quality(f32(0.0, 1.0), f32(0.0, 1.0, 2.0))

    def test_zero_range_disagreement_is_negative_infinity(self):
        q = quality(f32(2.0, 2.0), f32(2.0, 2.5))
        assert q.psnr_db == -math.inf


class TestRate:
    def test_twenty_to_one(self):
        r = rate(4_000_000, 200_000, 1_000_000)
        assert r.cr == 20.0
        assert r.bitrate_bits_per_value == 1.6

    def test_identity_compression(self):
        r = rate(4000, 4000, 1000)
        assert r.cr == 1.0
        assert r.bitrate_bits_per_value == 32.0

    def test_bitrate_times_cr_is_32_for_f32(self, rng):
        # bitrate is computed as 32/cr; the product re-rounds, so the
        # identity holds to within one ulp of 32.
        for _ in range(50):
            n = int(rng.integers(1, 10**6))
            comp = int(rng.integers(1, 4 * n + 100))
            r = rate(4 * n, comp, n)
            assert abs(r.bitrate_bits_per_value * r.cr - 32.0) <= math.ulp(32.0)

    def test_zero_compressed_rejected(self):
        with pytest.raises(ZeroCompressedSize):
            rate(4000, 0, 1000)


class TestSpeedup:
    def test_break_even_is_exactly_one(self):
        assert overall_speedup(SpeedupInputs(100.0, 200.0, 2.0)) == 1.0

    def test_matched_throughput_gives_half_cr(self):
        # t_compr == bw * cr collapses the model to cr / 2.
        s = overall_speedup(SpeedupInputs(6.91, 27.64, 4.0))
        assert s == pytest.approx(2.0, rel=1e-12)

    def test_infinite_cr_limit_is_t_over_bw(self):
        s = overall_speedup(SpeedupInputs(1.0, 5.0, 1e9))
        assert s == pytest.approx(5.0, rel=1e-6)

    @given(st.floats(1.0, 1e4), st.floats(1.0, 1e4), st.floats(1.001, 1e4),
           st.floats(1.01, 4.0))
    @settings(max_examples=120, deadline=None)
    def test_monotone_in_cr_and_throughput(self, bw, t, cr, factor):
        base = overall_speedup(SpeedupInputs(bw, t, cr))
        assert overall_speedup(SpeedupInputs(bw, t, cr * factor)) > base
        assert overall_speedup(SpeedupInputs(bw, t * factor, cr)) > base

    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            SpeedupInputs(0.0, 1.0, 1.0)


class TestThroughput:
    def test_gigabyte_per_second(self):
        assert throughput(10**9, 1.0) == 1.0
        assert throughput(5 * 10**8, 0.25) == 2.0

    def test_median_of_runs(self):
        # The harness reports the median of repeated timings.
        tp = median_throughput(10**9, [2.0, 1.0, 4.0, 8.0, 0.5])
        assert tp == throughput(10**9, 2.0)

    def test_wall_time_validated(self):
        with pytest.raises(ValueError):
            throughput(100, 0.0)
        with pytest.raises(ValueError):
            median_throughput(100, [])
