"""End-to-end pipelines: presets, custom specs, graphs, archives."""

import numpy as np
import pytest

from fzpipe.core import (
    SEG_ANCHOR_GRID,
    SEG_BITSHUFFLE_BITMAP,
    SEG_BITSHUFFLE_PAYLOAD,
    SEG_HUFFMAN_BITSTREAM,
    SEG_HUFFMAN_CODEBOOK,
    SEG_OUTLIER_INDICES,
    SEG_OUTLIER_VALUES,
    SEG_SECONDARY_WRAPPED,
    ErrorBoundSpec,
    ErrorMode,
    field_from_array,
    parse_archive,
    serialize_archive,
)
from fzpipe.errors import (
    BadParams,
    CorruptPayload,
    DuplicateId,
    FZError,
    InvalidStageOrder,
    MissingStage,
    UnsupportedPipeline,
)
from fzpipe.graph import graph_execute
from fzpipe.pipeline import (
    PipelineSpec,
    StageKind,
    StageSpec,
    build_compress_graph,
    build_decompress_graph,
    compress,
    compress_via_graph,
    decompress,
    decompress_via_graph,
    get_pipeline,
    load_pipeline_file,
    register_pipeline,
    worker_count,
)

from conftest import noise_field, random_field, smooth_field

REL = ErrorMode.VALUE_RANGE_RELATIVE
ABS = ErrorMode.ABSOLUTE


def assert_within(field, recon, eb_abs):
    err = np.abs(recon.data.astype(np.float64) - field.data.astype(np.float64))
    assert float(err.max()) <= eb_abs


class TestPresets:
    @pytest.mark.parametrize("preset", ["default", "speed", "quality"])
    @pytest.mark.parametrize("dims", [(500,), (33, 41), (17, 18, 19)])
    def test_round_trip_within_bound(self, preset, dims):
        f = smooth_field(dims, seed=len(dims))
        eb = ErrorBoundSpec(REL, 1e-3)
        a = compress(f, eb, preset)
        rec = decompress(a)
        bound = a.resolved_bound()
        assert rec.dims == f.dims
        assert_within(f, rec, bound.eb_abs)

    @pytest.mark.parametrize("preset", ["default", "speed", "quality"])
    def test_absolute_mode(self, preset):
        f = random_field((40, 40), seed=4, lo=-8.0, hi=8.0)
        a = compress(f, ErrorBoundSpec(ABS, 0.01), preset)
        assert_within(f, decompress(a), 0.01)

    def test_archive_survives_serialization(self):
        f = smooth_field((50, 50), seed=1)
        a = compress(f, ErrorBoundSpec(REL, 1e-2), "default")
        b = parse_archive(serialize_archive(a))
        assert b == a
        assert decompress(b) == decompress(a)

    def test_default_segment_layout(self):
        f = random_field((64, 64), seed=9, lo=-100.0, hi=100.0)
        a = compress(f, ErrorBoundSpec(ABS, 1e-4), "default")
        kinds = [k for k, _ in a.segments]
        assert kinds == [SEG_OUTLIER_INDICES, SEG_OUTLIER_VALUES,
                         SEG_HUFFMAN_CODEBOOK, SEG_HUFFMAN_BITSTREAM]

    def test_speed_segment_layout(self):
        f = random_field((64, 64), seed=9)
        a = compress(f, ErrorBoundSpec(REL, 1e-3), "speed")
        kinds = [k for k, _ in a.segments]
        assert kinds == [SEG_OUTLIER_INDICES, SEG_OUTLIER_VALUES,
                         SEG_BITSHUFFLE_BITMAP, SEG_BITSHUFFLE_PAYLOAD]

    def test_quality_segment_layout_with_anchors(self):
        f = smooth_field((48, 48), seed=2)
        a = compress(f, ErrorBoundSpec(REL, 1e-3), "quality")
        kinds = [k for k, _ in a.segments]
        assert kinds == [SEG_OUTLIER_INDICES, SEG_OUTLIER_VALUES, SEG_ANCHOR_GRID,
                         SEG_HUFFMAN_CODEBOOK, SEG_HUFFMAN_BITSTREAM]

    def test_quality_fallback_drops_anchor_segment(self):
        # 1D fields fall back to the corner predictor; no anchor segment.
        f = smooth_field((400,), seed=2)
        a = compress(f, ErrorBoundSpec(REL, 1e-3), "quality")
        assert a.segment(SEG_ANCHOR_GRID) is None
        assert_within(f, decompress(a), a.resolved_bound().eb_abs)

    def test_outliers_reconstructed_verbatim(self):
        data = np.zeros(200, dtype=np.float32)
        data[50] = 1e7
        data[51] = -1e7
        f = field_from_array(data)
        a = compress(f, ErrorBoundSpec(ABS, 0.5), "default")
        rec = decompress(a)
        assert rec.data[50] == 1e7
        assert rec.data[51] == -1e7


class TestConstantFields:
    @pytest.mark.parametrize("mode", [REL, ABS])
    @pytest.mark.parametrize("preset", ["default", "speed", "quality"])
    def test_constant_round_trips_exactly(self, mode, preset):
        f = field_from_array(np.full((20, 30), 2.75, dtype=np.float32))
        a = compress(f, ErrorBoundSpec(mode, 1e-3), preset)
        assert len(a.segments) == 0
        assert len(serialize_archive(a)) == 41
        assert decompress(a) == f

    def test_tampered_constant_header_rejected(self):
        f = field_from_array(np.full(10, 1.0, dtype=np.float32))
        a = compress(f, ErrorBoundSpec(ABS, 0.1), "default")
        blob = bytearray(serialize_archive(a))
        blob[20:24] = np.float32(2.0).tobytes()  # data_max now != data_min
        with pytest.raises(FZError):
            decompress(parse_archive(bytes(blob)))


class TestPipelineSpecValidation:
    def test_stage_order_enforced(self):
        with pytest.raises(InvalidStageOrder):
            PipelineSpec(50, (
                StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "bitshuffle"}),
                StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
            ))

    def test_predict_required(self):
        with pytest.raises(MissingStage):
            PipelineSpec(51, (
                StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "bitshuffle"}),
            ))

    def test_primary_codec_required(self):
        with pytest.raises(MissingStage):
            PipelineSpec(52, (
                StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
            ))

    def test_two_secondaries_rejected(self):
        with pytest.raises(InvalidStageOrder):
            PipelineSpec(53, (
                StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
                StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "bitshuffle"}),
                StageSpec("s1", StageKind.SECONDARY_CODEC, {"codec_id": "0"}),
                StageSpec("s2", StageKind.SECONDARY_CODEC, {"codec_id": "0"}),
            ))

    def test_histogram_auto_inserted_for_huffman(self):
        spec = PipelineSpec(54, (
            StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
            StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "huffman"}),
        ))
        kinds = [s.kind for s in spec.stages]
        assert StageKind.ANALYSIS in kinds
        assert kinds.index(StageKind.ANALYSIS) < kinds.index(StageKind.PRIMARY_CODEC)

    def test_duplicate_registration_rejected(self):
        with pytest.raises(DuplicateId):
            register_pipeline(get_pipeline(0))

    def test_id_must_fit_a_byte(self):
        with pytest.raises(InvalidStageOrder):
            PipelineSpec(300, (
                StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
                StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "bitshuffle"}),
            ))


class TestCustomPipelines:
    def test_secondary_codec_wraps_primary_segments(self):
        spec = PipelineSpec(60, (
            StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
            StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "bitshuffle"}),
            StageSpec("shrink", StageKind.SECONDARY_CODEC, {"codec_id": "0"}),
        ))
        register_pipeline(spec)
        f = smooth_field((40, 40), seed=6)
        a = compress(f, ErrorBoundSpec(REL, 1e-2), 60)
        kinds = [k for k, _ in a.segments]
        assert kinds == [SEG_OUTLIER_INDICES, SEG_OUTLIER_VALUES,
                         SEG_SECONDARY_WRAPPED, SEG_SECONDARY_WRAPPED]
        # Wrapped layout: original kind byte, then codec id byte.
        k, payload = a.segments[2]
        assert payload[0] == SEG_BITSHUFFLE_BITMAP
        assert payload[1] == 0
        assert_within(f, decompress(a), a.resolved_bound().eb_abs)

    def test_pipeline_file_round_trip(self, tmp_path):
        text = """\
[pipeline]
id = 61

[stage:predict]
kind = predict
predictor = lorenzo

[stage:encode]
kind = primary_codec
codec = huffman

[stage:shrink]
kind = secondary_codec
codec_id = 0
"""
        path = tmp_path / "custom.ini"
        path.write_text(text)
        spec = load_pipeline_file(str(path))
        assert spec.id == 61
        register_pipeline(spec)
        f = noise_field((30, 30), seed=3)
        a = compress(f, ErrorBoundSpec(REL, 1e-2), 61)
        assert a.pipeline_id == 61
        assert_within(f, decompress(a), a.resolved_bound().eb_abs)

    def test_pipeline_file_errors(self, tmp_path):
        with pytest.raises(BadParams):
            load_pipeline_file(str(tmp_path / "missing.ini"))
        bad = tmp_path / "bad.ini"
        bad.write_text("[stage:only]\nkind = predict\n")
        with pytest.raises(BadParams, match="id"):
            load_pipeline_file(str(bad))
        bad.write_text("[pipeline]\nid = 62\n\n[stage:x]\npredictor = lorenzo\n")
        with pytest.raises(BadParams, match="kind"):
            load_pipeline_file(str(bad))


class TestCorruption:
    def test_flipped_payload_bit_never_silently_matches(self):
        f = smooth_field((32, 32), seed=8)
        a = compress(f, ErrorBoundSpec(REL, 1e-3), "default")
        baseline = decompress(a)
        blob = bytearray(serialize_archive(a))
        rng = np.random.default_rng(1)
        flips = rng.integers(42, len(blob), 40)
        for pos in flips:
            tampered = bytearray(blob)
            tampered[pos] ^= 0x40
            try:
                out = decompress(parse_archive(bytes(tampered)))
            except FZError:
                continue
            assert out != baseline


class TestGraphExecution:
    def test_decompress_graph_shape(self):
        f = smooth_field((40, 40), seed=5)
        a = compress(f, ErrorBoundSpec(REL, 1e-3), "default")
        g = build_decompress_graph(a)
        assert {t.name for t in g.tasks} == {
            "parse-segments", "huffman-decode", "outlier-scatter", "predict-reconstruct"}
        assert g.edges == {
            ("parse-segments", "huffman-decode"),
            ("parse-segments", "outlier-scatter"),
            ("huffman-decode", "predict-reconstruct"),
            ("outlier-scatter", "predict-reconstruct"),
        }

    @pytest.mark.parametrize("preset", ["default", "quality"])
    @pytest.mark.parametrize("workers", [1, 2, 4])
    def test_graph_decompress_bitwise_equal(self, preset, workers):
        f = smooth_field((30, 31, 12), seed=workers)
        a = compress(f, ErrorBoundSpec(REL, 1e-3), preset)
        g = build_decompress_graph(a)
        trace = graph_execute(g, workers)
        assert trace.respects(g.edges)
        assert g.buffers["field"] == decompress(a)

    def test_graph_compress_bitwise_equal(self):
        for preset in ["default", "speed", "quality"]:
            f = smooth_field((26, 27), seed=3)
            eb = ErrorBoundSpec(REL, 1e-3)
            via_graph = serialize_archive(compress_via_graph(f, eb, preset))
            sequential = serialize_archive(compress(f, eb, preset))
            assert via_graph == sequential

    def test_bitshuffle_pipeline_refuses_split_graph(self):
        f = smooth_field((30, 30), seed=1)
        a = compress(f, ErrorBoundSpec(REL, 1e-2), "speed")
        with pytest.raises(UnsupportedPipeline):
            build_decompress_graph(a)
        # The convenience wrapper falls back to the sequential path.
        assert decompress_via_graph(a) == decompress(a)

    def test_constant_archive_refuses_split_graph(self):
        f = field_from_array(np.full(16, 3.0, dtype=np.float32))
        a = compress(f, ErrorBoundSpec(ABS, 0.1), "default")
        with pytest.raises(UnsupportedPipeline):
            build_decompress_graph(a)
        assert decompress_via_graph(a) == f

    def test_stage_delay_hook_produces_overlap(self):
        f = smooth_field((40, 40), seed=5)
        a = compress(f, ErrorBoundSpec(REL, 1e-3), "default")
        g = build_decompress_graph(a, stage_delay_s=0.02)
        trace = graph_execute(g, 2)
        pairs = trace.overlapping_pairs()
        assert g.buffers["field"] == decompress(a)
        assert trace.respects(g.edges)


class TestDeterminism:
    def test_same_input_same_bytes(self):
        f = noise_field((25, 26), seed=12)
        eb = ErrorBoundSpec(REL, 1e-3)
        assert serialize_archive(compress(f, eb, "default")) == \
            serialize_archive(compress(f, eb, "default"))

    def test_thread_cap_does_not_change_bytes(self, monkeypatch):
        f = smooth_field((30, 30), seed=2)
        eb = ErrorBoundSpec(REL, 1e-3)
        blobs = []
        for cap in ["1", "4"]:
            monkeypatch.setenv("FZPIPE_THREADS", cap)
            blobs.append(serialize_archive(compress_via_graph(f, eb, "default")))
        assert blobs[0] == blobs[1]

    def test_worker_count_env_cap(self, monkeypatch):
        monkeypatch.setenv("FZPIPE_THREADS", "2")
        assert worker_count(8) == 2
        monkeypatch.setenv("FZPIPE_THREADS", "junk")
        assert worker_count(3) == 3
        monkeypatch.delenv("FZPIPE_THREADS")
        assert worker_count(5) == 5
