"""Core types: fields, bounds, quantizer output contract, archive format."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fzpipe.core import (
    MAGIC,
    SEG_ANCHOR_GRID,
    SEG_HUFFMAN_BITSTREAM,
    SEG_HUFFMAN_CODEBOOK,
    SEG_OUTLIER_INDICES,
    Archive,
    ErrorBoundSpec,
    ErrorMode,
    Field,
    QuantOutput,
    field_from_array,
    parse_archive,
    resolve_bound,
    serialize_archive,
)
from fzpipe.errors import (
    BadMagic,
    MalformedCodes,
    Truncated,
    UnknownPipelineId,
    UnsupportedVersion,
    ZeroRange,
)

from conftest import random_field


def make_archive(segments=(), pipeline_id=0, dims=(4, 4), eb_mode=ErrorMode.ABSOLUTE,
                 eb=0.5, lo=0.0, hi=1.0, radius=512):
    return Archive(pipeline_id, eb_mode, float(eb), np.float32(lo), np.float32(hi),
                   tuple(dims), radius, tuple(segments))


class TestField:
    def test_flattens_and_orders_slowest_first(self):
        arr = np.arange(6, dtype=np.float32).reshape(2, 3)
        f = field_from_array(arr)
        assert f.dims == (2, 3)
        assert f.as_nd()[1, 2] == 5.0

    def test_rejects_non_finite(self):
        data = np.array([1.0, np.nan, 2.0], dtype=np.float32)
        with pytest.raises(ValueError, match="flat index 1"):
            Field((3,), data)

    def test_rejects_dim_product_mismatch(self):
        with pytest.raises(ValueError, match="dims imply"):
            Field((2, 2), np.zeros(3, dtype=np.float32))

    def test_rejects_bad_rank(self):
        with pytest.raises(ValueError):
            Field((1, 1, 1, 1), np.zeros(1, dtype=np.float32))

    def test_equality_is_bitwise(self):
        # -0.0 and 0.0 compare equal as floats but differ bitwise.
        a = Field((1,), np.array([0.0], dtype=np.float32))
        b = Field((1,), np.array([-0.0], dtype=np.float32))
        assert a != b
        assert a == Field((1,), np.array([0.0], dtype=np.float32))


class TestResolveBound:
    def test_relative_scales_by_range(self):
        f = field_from_array(np.array([0.0, 25.0, 100.0], dtype=np.float32))
        b = resolve_bound(f, ErrorBoundSpec(ErrorMode.VALUE_RANGE_RELATIVE, 1e-2))
        assert b.eb_abs == 1.0

    def test_absolute_passes_through(self):
        f = random_field((8,), seed=1)
        b = resolve_bound(f, ErrorBoundSpec(ErrorMode.ABSOLUTE, 0.5))
        assert b.eb_abs == 0.5

    def test_matches_min_max_scan_oracle(self):
        # Values over roughly [-3.2, 4.8]; the bound must equal an
        # independent elementwise min/max scan exactly.
        rng = np.random.default_rng(9)
        data = rng.uniform(-3.2, 4.8, 4096).astype(np.float32)
        data[17] = np.float32(-3.2)
        data[400] = np.float32(4.8)
        f = field_from_array(data)
        b = resolve_bound(f, ErrorBoundSpec(ErrorMode.VALUE_RANGE_RELATIVE, 1e-4))
        lo = min(float(v) for v in data)
        hi = max(float(v) for v in data)
        assert b.eb_abs == (hi - lo) * 1e-4
        assert b.eb_abs == pytest.approx(8.0e-4, rel=1e-6)

    def test_constant_field_rejects_relative(self):
        f = field_from_array(np.full(10, 3.5, dtype=np.float32))
        with pytest.raises(ZeroRange):
            resolve_bound(f, ErrorBoundSpec(ErrorMode.VALUE_RANGE_RELATIVE, 1e-3))

    def test_magnitude_must_be_positive(self):
        with pytest.raises(ValueError):
            ErrorBoundSpec(ErrorMode.ABSOLUTE, 0.0)


class TestQuantOutput:
    def test_sentinel_required_at_outlier_positions(self):
        codes = np.full(4, 512, dtype=np.uint32)
        codes[2] = 513
        with pytest.raises(MalformedCodes, match="sentinel"):
            QuantOutput(codes, 512, np.array([2], dtype=np.int64),
                        np.array([9.0], dtype=np.float32), (4,))

    def test_indices_strictly_increasing(self):
        codes = np.full(4, 512, dtype=np.uint32)
        with pytest.raises(MalformedCodes, match="increasing"):
            QuantOutput(codes, 512, np.array([2, 2], dtype=np.int64),
                        np.array([1.0, 1.0], dtype=np.float32), (4,))

    def test_code_range_enforced(self):
        codes = np.array([1024], dtype=np.uint32)
        with pytest.raises(MalformedCodes, match="2\\*radius"):
            QuantOutput(codes, 512, np.empty(0, dtype=np.int64),
                        np.empty(0, dtype=np.float32), (1,))


class TestArchiveFormat:
    def test_empty_archive_is_fixed_region_only(self):
        # Oracle: sum the layout's field widths.
        # magic 4 + version/pipeline/mode/ndim 4 + eb f64 8 + min/max 2*f32 8
        # + dims 3*u32 12 + radius u32 4 + segment_count u8 1
        fixed = 4 + 4 + 8 + 8 + 12 + 4 + 1
        assert fixed == 41
        blob = serialize_archive(make_archive())
        assert len(blob) == fixed
        assert blob[:4] == MAGIC

    def test_one_segment_adds_table_entry_plus_payload(self):
        seg = (SEG_HUFFMAN_CODEBOOK, b"\x01" * 8)
        blob = serialize_archive(make_archive([seg]))
        assert len(blob) == 41 + 9 + 8

    def test_round_trip_identity(self):
        a = make_archive([
            (SEG_HUFFMAN_CODEBOOK, b"ab"),
            (SEG_HUFFMAN_BITSTREAM, b"xyz"),
            (SEG_OUTLIER_INDICES, b""),
        ], dims=(3, 5, 7), eb_mode=ErrorMode.VALUE_RANGE_RELATIVE, eb=1e-3,
            lo=-2.5, hi=9.75, radius=256)
        assert parse_archive(serialize_archive(a)) == a

    @given(st.lists(st.binary(max_size=40), max_size=5), st.integers(1, 3),
           st.integers(0, 2))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_random_archives(self, payloads, ndim, pid):
        dims = tuple(range(2, 2 + ndim))
        kinds = [SEG_HUFFMAN_CODEBOOK, SEG_HUFFMAN_BITSTREAM, SEG_OUTLIER_INDICES,
                 SEG_ANCHOR_GRID, SEG_HUFFMAN_CODEBOOK]
        segs = [(kinds[i], p) for i, p in enumerate(payloads)]
        a = make_archive(segs, pipeline_id=pid, dims=dims)
        assert parse_archive(serialize_archive(a)) == a

    def test_bad_magic(self):
        blob = bytearray(serialize_archive(make_archive()))
        blob[:4] = b"XZM1"
        with pytest.raises(BadMagic):
            parse_archive(bytes(blob))

    def test_unsupported_version(self):
        blob = bytearray(serialize_archive(make_archive()))
        blob[4] = 99
        with pytest.raises(UnsupportedVersion):
            parse_archive(bytes(blob))

    def test_unknown_pipeline_id(self):
        blob = bytearray(serialize_archive(make_archive()))
        blob[5] = 250
        with pytest.raises(UnknownPipelineId):
            parse_archive(bytes(blob))

    def test_truncated_payload(self):
        seg = (SEG_HUFFMAN_BITSTREAM, b"abcdef")
        blob = serialize_archive(make_archive([seg]))
        with pytest.raises(Truncated):
            parse_archive(blob[:-1])

    def test_trailing_bytes_rejected(self):
        blob = serialize_archive(make_archive())
        with pytest.raises(Truncated, match="trailing"):
            parse_archive(blob + b"\x00")

    def test_short_header(self):
        with pytest.raises(Truncated):
            parse_archive(b"FZM1\x01")
