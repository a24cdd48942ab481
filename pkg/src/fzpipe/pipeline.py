"""Stage composition: the uniform stage contract, preset pipelines, the
pipeline registry, and graph-executed variants of compress/decompress.

A pipeline is an ordered stage list: optional Preprocess stages, exactly
one Predict, optional Analysis (auto-inserted when the primary codec needs
a histogram), exactly one PrimaryCodec, and at most one SecondaryCodec.

Presets registered at import:

    0 "default":  Lorenzo predictor, exact histogram, Huffman
    1 "speed":    Lorenzo predictor, bitshuffle
    2 "quality":  interpolation predictor, top-k histogram, Huffman

Segment layout produced by compress (fixed order, so archives are
byte-deterministic): outlier indices (kind 2, u64 le), outlier values
(kind 3, f32 le), anchor grid (kind 6, interp only), then the primary
codec's segments (0/1 for Huffman, 4/5 for bitshuffle).  A SecondaryCodec
stage replaces each primary segment with kind 7: one byte holding the
original kind, then the secondary-wrapped bytes.  A constant field is
recorded with zero segments and rebuilt from the header.
"""

from __future__ import annotations

import configparser
import enum
import os
import time
from dataclasses import dataclass

import numpy as np

from . import encode as enc
from .core import (
    Archive,
    ErrorBoundSpec,
    Field,
    QuantOutput,
    ResolvedBound,
    SEG_ANCHOR_GRID,
    SEG_BITSHUFFLE_BITMAP,
    SEG_BITSHUFFLE_PAYLOAD,
    SEG_HUFFMAN_BITSTREAM,
    SEG_HUFFMAN_CODEBOOK,
    SEG_OUTLIER_INDICES,
    SEG_OUTLIER_VALUES,
    SEG_SECONDARY_WRAPPED,
    register_known_pipeline_id,
    resolve_bound,
)
from .errors import (
    CorruptPayload,
    DuplicateId,
    InvalidStageOrder,
    MissingStage,
    StageError,
    UnknownPipelineId,
    UnsupportedPipeline,
)
from .graph import TaskGraph, graph_execute
from .predict import (
    InterpConfig,
    interp_quantize,
    interp_reconstruct,
    lorenzo_quantize,
    lorenzo_reconstruct,
)


class StageKind(enum.Enum):
    PREPROCESS = "preprocess"
    PREDICT = "predict"
    PRIMARY_CODEC = "primary_codec"
    SECONDARY_CODEC = "secondary_codec"
    ANALYSIS = "analysis"


# Validation order rank; a pipeline's kinds must be nondecreasing.
_KIND_RANK = {
    StageKind.PREPROCESS: 0,
    StageKind.PREDICT: 1,
    StageKind.ANALYSIS: 2,
    StageKind.PRIMARY_CODEC: 3,
    StageKind.SECONDARY_CODEC: 4,
}


@dataclass(frozen=True)
class StageSpec:
    name: str
    kind: StageKind
    params: tuple = ()

    def __post_init__(self):
        if not self.name:
            raise InvalidStageOrder("stage name must be nonempty")
        p = self.params
        if isinstance(p, dict):
            p = tuple(sorted((str(k), str(v)) for k, v in p.items()))
        object.__setattr__(self, "params", tuple(p))
        object.__setattr__(self, "kind", StageKind(self.kind))

    def param(self, key: str, default=None) -> str | None:
        for k, v in self.params:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class PipelineSpec:
    id: int
    stages: tuple[StageSpec, ...]

    def __post_init__(self):
        pid = int(self.id)
        if not 0 <= pid <= 255:
            raise InvalidStageOrder(f"pipeline id must fit a byte, got {pid}")
        stages = tuple(self.stages)
        names = [s.name for s in stages]
        if len(set(names)) != len(names):
            raise InvalidStageOrder(f"duplicate stage names in {names}")
        ranks = [_KIND_RANK[s.kind] for s in stages]
        if ranks != sorted(ranks):
            raise InvalidStageOrder(
                "stage order must be preprocess, predict, analysis, primary codec, secondary codec"
            )
        kinds = [s.kind for s in stages]
        if kinds.count(StageKind.PREDICT) != 1:
            raise MissingStage("exactly one predict stage required")
        if kinds.count(StageKind.PRIMARY_CODEC) != 1:
            raise MissingStage("exactly one primary codec stage required")
        if kinds.count(StageKind.SECONDARY_CODEC) > 1:
            raise InvalidStageOrder("at most one secondary codec stage")
        # Huffman consumes a histogram; insert the analysis stage when the
        # pipeline author left it out.
        primary = next(s for s in stages if s.kind == StageKind.PRIMARY_CODEC)
        has_analysis = any(s.kind == StageKind.ANALYSIS for s in stages)
        if primary.param("codec", "huffman") == "huffman" and not has_analysis:
            hist = StageSpec("histogram", StageKind.ANALYSIS, {"method": "exact"})
            i = stages.index(primary)
            stages = stages[:i] + (hist,) + stages[i:]
        object.__setattr__(self, "id", pid)
        object.__setattr__(self, "stages", stages)

    def stage_of(self, kind: StageKind) -> StageSpec | None:
        for s in self.stages:
            if s.kind == kind:
                return s
        return None

    @property
    def predictor(self) -> str:
        return self.stage_of(StageKind.PREDICT).param("predictor", "lorenzo")

    @property
    def primary_codec(self) -> str:
        return self.stage_of(StageKind.PRIMARY_CODEC).param("codec", "huffman")

    def radius(self) -> int:
        return int(self.stage_of(StageKind.PREDICT).param("radius", "512"))

    def interp_config(self) -> InterpConfig:
        return InterpConfig(anchor_stride=int(self.stage_of(StageKind.PREDICT).param("anchor_stride", "16")))


_REGISTRY: dict[int, PipelineSpec] = {}
PRESET_NAMES = {"default": 0, "speed": 1, "quality": 2}


def register_pipeline(spec: PipelineSpec) -> PipelineSpec:
    """Register a validated pipeline; its id becomes parseable in archives."""

    if spec.id in _REGISTRY:
        raise DuplicateId(f"pipeline id {spec.id} already registered")
    _REGISTRY[spec.id] = spec
    register_known_pipeline_id(spec.id)
    return spec


def get_pipeline(ref) -> PipelineSpec:
    """Look a pipeline up by id, preset name, or pass a spec through."""

    if isinstance(ref, PipelineSpec):
        return ref
    if isinstance(ref, str):
        if ref not in PRESET_NAMES:
            raise UnknownPipelineId(f"unknown pipeline name '{ref}'")
        ref = PRESET_NAMES[ref]
    ref = int(ref)
    if ref not in _REGISTRY:
        raise UnknownPipelineId(f"pipeline id {ref} not registered")
    return _REGISTRY[ref]


def registered_pipelines() -> dict[int, PipelineSpec]:
    return dict(_REGISTRY)


def _register_presets():
    register_pipeline(PipelineSpec(0, (
        StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
        StageSpec("histogram", StageKind.ANALYSIS, {"method": "exact"}),
        StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "huffman"}),
    )))
    register_pipeline(PipelineSpec(1, (
        StageSpec("predict", StageKind.PREDICT, {"predictor": "lorenzo"}),
        StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "bitshuffle"}),
    )))
    register_pipeline(PipelineSpec(2, (
        StageSpec("predict", StageKind.PREDICT, {"predictor": "interp"}),
        StageSpec("histogram", StageKind.ANALYSIS, {"method": "topk", "k": "16"}),
        StageSpec("encode", StageKind.PRIMARY_CODEC, {"codec": "huffman"}),
    )))


_register_presets()


def load_pipeline_file(path: str) -> PipelineSpec:
    """Parse a pipeline from ini-style text.

    Grammar: a [pipeline] section with `id = <0..255>`, then one
    [stage:<name>] section per stage in order, each holding `kind = <kind>`
    plus that stage's key=value params.
    """

    from .errors import BadParams

    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise BadParams(f"cannot read pipeline file '{path}'")
    if "pipeline" not in cp or "id" not in cp["pipeline"]:
        raise BadParams("pipeline file needs a [pipeline] section with an id")
    try:
        pid = int(cp["pipeline"]["id"])
    except ValueError as e:
        raise BadParams(f"bad pipeline id: {e}") from None
    stages = []
    for section in cp.sections():
        if not section.startswith("stage:"):
            continue
        name = section[len("stage:"):]
        opts = dict(cp[section])
        kind = opts.pop("kind", None)
        if kind is None:
            raise BadParams(f"stage '{name}' is missing its kind")
        try:
            sk = StageKind(kind)
        except ValueError:
            raise BadParams(f"unknown stage kind '{kind}'") from None
        stages.append(StageSpec(name, sk, opts))
    return PipelineSpec(pid, tuple(stages))


# ---------------------------------------------------------------------------
# Stage bodies, shared by the sequential path and the task-graph path so
# both produce byte-identical archives.


def _run_preprocess(stage: StageSpec, field: Field) -> Field:
    op = stage.param("op", "identity")
    if op != "identity":
        raise ValueError(f"unsupported preprocess op '{op}'")
    return field


def _run_predict(spec: PipelineSpec, field: Field, bound: ResolvedBound):
    """Returns (QuantOutput, anchor bytes; empty outside interp)."""

    radius = spec.radius()
    if spec.predictor == "interp":
        return interp_quantize(field, bound, radius, spec.interp_config())
    if spec.predictor == "lorenzo":
        return lorenzo_quantize(field, bound, radius), b""
    raise ValueError(f"unknown predictor '{spec.predictor}'")


def _run_analysis(stage: StageSpec, q: QuantOutput) -> enc.Histogram:
    method = stage.param("method", "exact")
    if method == "topk":
        return enc.histogram_topk(q.codes, q.radius, int(stage.param("k", "16")))
    if method == "exact":
        return enc.histogram_exact(q.codes, q.radius)
    raise ValueError(f"unknown histogram method '{method}'")


def _run_primary(spec: PipelineSpec, q: QuantOutput, hist) -> list[tuple[int, bytes]]:
    codec = spec.primary_codec
    if codec == "huffman":
        cb, stream, _ = enc.huffman_encode(q.codes, hist)
        return [(SEG_HUFFMAN_CODEBOOK, cb.to_bytes()), (SEG_HUFFMAN_BITSTREAM, stream)]
    if codec == "bitshuffle":
        bitmap, payload = enc.bitshuffle_encode(q.codes, q.radius)
        return [(SEG_BITSHUFFLE_BITMAP, bitmap), (SEG_BITSHUFFLE_PAYLOAD, payload)]
    raise ValueError(f"unknown primary codec '{codec}'")


def _outlier_segments(q: QuantOutput) -> list[tuple[int, bytes]]:
    return [
        (SEG_OUTLIER_INDICES, q.outlier_indices.astype("<u8").tobytes()),
        (SEG_OUTLIER_VALUES, q.outlier_values.astype("<f4").tobytes()),
    ]


def _wrap_secondary(stage: StageSpec, segments: list[tuple[int, bytes]]) -> list[tuple[int, bytes]]:
    codec_id = int(stage.param("codec_id", "0"))
    return [
        (SEG_SECONDARY_WRAPPED, bytes([kind]) + enc.secondary_encode(payload, codec_id))
        for kind, payload in segments
    ]


def _assemble(spec, eb, field, bound, radius, outlier_segs, anchors, primary_segs) -> Archive:
    segments = list(outlier_segs)
    if anchors:
        segments.append((SEG_ANCHOR_GRID, anchors))
    segments.extend(primary_segs)
    return Archive(
        pipeline_id=spec.id,
        eb_mode=eb.mode,
        eb_magnitude=eb.magnitude,
        data_min=bound.data_min,
        data_max=bound.data_max,
        dims=field.dims,
        radius=radius,
        segments=tuple(segments),
    )


def _constant_archive(spec: PipelineSpec, eb: ErrorBoundSpec, field: Field, lo: float, hi: float) -> Archive:
    return Archive(
        pipeline_id=spec.id,
        eb_mode=eb.mode,
        eb_magnitude=eb.magnitude,
        data_min=lo,
        data_max=hi,
        dims=field.dims,
        radius=spec.radius(),
        segments=(),
    )


def compress_with_timing(field: Field, eb: ErrorBoundSpec, pipeline) -> tuple[Archive, dict]:
    """Run every stage sequentially; returns the archive and per-stage seconds."""

    spec = get_pipeline(pipeline)
    timings: dict[str, float] = {}

    def staged(stage_name, fn, *args):
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except Exception as e:
            raise StageError(stage_name, e) from e
        timings[stage_name] = time.perf_counter() - t0
        return out

    lo = float(field.data.min())
    hi = float(field.data.max())
    if lo == hi:
        return _constant_archive(spec, eb, field, lo, hi), timings
    bound = resolve_bound(field, eb)
    for stage in spec.stages:
        if stage.kind == StageKind.PREPROCESS:
            field = staged(stage.name, _run_preprocess, stage, field)
    pred_stage = spec.stage_of(StageKind.PREDICT)
    q, anchors = staged(pred_stage.name, _run_predict, spec, field, bound)
    hist = None
    an_stage = spec.stage_of(StageKind.ANALYSIS)
    if an_stage is not None:
        hist = staged(an_stage.name, _run_analysis, an_stage, q)
    pc_stage = spec.stage_of(StageKind.PRIMARY_CODEC)
    primary = staged(pc_stage.name, _run_primary, spec, q, hist)
    sc_stage = spec.stage_of(StageKind.SECONDARY_CODEC)
    if sc_stage is not None:
        primary = staged(sc_stage.name, _wrap_secondary, sc_stage, primary)
    return _assemble(spec, eb, field, bound, spec.radius(), _outlier_segments(q), anchors, primary), timings


def compress(field: Field, eb: ErrorBoundSpec, pipeline) -> Archive:
    return compress_with_timing(field, eb, pipeline)[0]


# ---------------------------------------------------------------------------
# Decompression


def _unwrap_segments(a: Archive) -> dict[int, bytes]:
    segs: dict[int, bytes] = {}
    for kind, payload in a.segments:
        if kind == SEG_SECONDARY_WRAPPED:
            if len(payload) < 2:
                raise CorruptPayload("wrapped segment too short")
            segs[payload[0]] = enc.secondary_decode(payload[1:])
        else:
            segs[kind] = payload
    return segs


def _decode_outliers(segs: dict[int, bytes], n: int):
    if SEG_OUTLIER_INDICES not in segs or SEG_OUTLIER_VALUES not in segs:
        raise CorruptPayload("outlier segments missing")
    ib, vb = segs[SEG_OUTLIER_INDICES], segs[SEG_OUTLIER_VALUES]
    if len(ib) % 8 or len(vb) % 4 or len(ib) // 8 != len(vb) // 4:
        raise CorruptPayload("outlier index/value segments disagree")
    idx = np.frombuffer(ib, "<u8").astype(np.int64)
    vals = np.frombuffer(vb, "<f4").astype(np.float32)
    if idx.size and (int(idx.max()) >= n or int(idx.min()) < 0):
        raise CorruptPayload("outlier index out of range")
    return idx, vals


def _decode_codes(spec: PipelineSpec, segs: dict[int, bytes], n: int, radius: int) -> np.ndarray:
    codec = spec.primary_codec
    if codec == "huffman":
        if SEG_HUFFMAN_CODEBOOK not in segs or SEG_HUFFMAN_BITSTREAM not in segs:
            raise CorruptPayload("Huffman segments missing")
        cb = enc.HuffmanCodebook.from_bytes(segs[SEG_HUFFMAN_CODEBOOK])
        if cb.code_lengths.size != 2 * radius:
            raise CorruptPayload(
                f"codebook covers {cb.code_lengths.size} symbols, alphabet is {2 * radius}"
            )
        return enc.huffman_decode(cb, segs[SEG_HUFFMAN_BITSTREAM], n)
    if codec == "bitshuffle":
        if SEG_BITSHUFFLE_BITMAP not in segs or SEG_BITSHUFFLE_PAYLOAD not in segs:
            raise CorruptPayload("bitshuffle segments missing")
        return enc.bitshuffle_decode(segs[SEG_BITSHUFFLE_BITMAP], segs[SEG_BITSHUFFLE_PAYLOAD], n, radius)
    raise ValueError(f"unknown primary codec '{codec}'")


def _reconstruct(spec: PipelineSpec, q: QuantOutput, anchors: bytes, bound: ResolvedBound) -> Field:
    if spec.predictor == "interp":
        return interp_reconstruct(q, anchors, bound, spec.interp_config())
    return lorenzo_reconstruct(q, bound)


def decompress_with_timing(a: Archive, pipeline=None) -> tuple[Field, dict]:
    spec = get_pipeline(pipeline if pipeline is not None else a.pipeline_id)
    timings: dict[str, float] = {}
    if len(a.segments) == 0:
        if a.data_min != a.data_max:
            raise CorruptPayload("no segments but the header spans a value range")
        return Field(a.dims, np.full(a.element_count, a.data_min, np.float32)), timings
    bound = a.resolved_bound()
    t0 = time.perf_counter()
    segs = _unwrap_segments(a)
    timings["unwrap"] = time.perf_counter() - t0

    def staged(stage_name, fn, *args):
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except Exception as e:
            raise StageError(stage_name, e) from e
        timings[stage_name] = time.perf_counter() - t0
        return out

    n = a.element_count
    codes = staged("decode-codes", _decode_codes, spec, segs, n, a.radius)
    idx, vals = staged("decode-outliers", _decode_outliers, segs, n)
    q = QuantOutput(codes, a.radius, idx, vals, a.dims)
    anchors = segs.get(SEG_ANCHOR_GRID, b"")
    field = staged("reconstruct", _reconstruct, spec, q, anchors, bound)
    return field, timings


def decompress(a: Archive, pipeline=None) -> Field:
    return decompress_with_timing(a, pipeline)[0]


# ---------------------------------------------------------------------------
# Task-graph execution paths


def worker_count(requested: int | None = None) -> int:
    """Resolve a worker count; the FZPIPE_THREADS env var caps it."""

    base = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("FZPIPE_THREADS")
    if cap is not None:
        try:
            base = min(base, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, base)


def build_decompress_graph(a: Archive, stage_delay_s: float = 0.0) -> TaskGraph:
    """Decompression as a four-task graph.

    parse-segments feeds huffman-decode and outlier-scatter, which are
    independent of each other; predict-reconstruct joins them.  Exactly
    four edges are derived from the buffer declarations.  Only pipelines
    whose primary codec is Huffman split this way; bitshuffle pipelines
    are a strict chain and are refused.  Header metadata (dims, bound,
    radius) is static configuration and rides in closures, not buffers.
    """

    spec = get_pipeline(a.pipeline_id)
    if spec.primary_codec != "huffman":
        raise UnsupportedPipeline(
            "single-codec pipelines decompress as a chain; the split graph needs Huffman"
        )
    if len(a.segments) == 0:
        raise UnsupportedPipeline("constant-field archive has no codec stage to schedule")
    from .predict import _NO_ORIG, _pad3, _run_interp
    from .predict import _lorenzo_decode

    n = a.element_count
    radius = a.radius
    bound = a.resolved_bound()
    dims3 = _pad3(a.dims)
    use_interp = spec.predictor == "interp"
    cfg = spec.interp_config() if use_interp else None

    def delay():
        if stage_delay_s > 0:
            time.sleep(stage_delay_s)

    g = TaskGraph()
    g.add_buffer("archive", a)
    g.add_buffer("bitstream")
    g.add_buffer("outlier_bytes")
    g.add_buffer("codes")
    g.add_buffer("field")

    def parse_segments(v):
        delay()
        segs = _unwrap_segments(v["archive"])
        if SEG_HUFFMAN_CODEBOOK not in segs or SEG_HUFFMAN_BITSTREAM not in segs:
            raise CorruptPayload("Huffman segments missing")
        v["bitstream"] = (segs[SEG_HUFFMAN_CODEBOOK], segs[SEG_HUFFMAN_BITSTREAM])
        v["outlier_bytes"] = (
            segs.get(SEG_OUTLIER_INDICES, b""),
            segs.get(SEG_OUTLIER_VALUES, b""),
            segs.get(SEG_ANCHOR_GRID, b""),
        )

    def huffman_decode_task(v):
        delay()
        cb_bytes, stream = v["bitstream"]
        cb = enc.HuffmanCodebook.from_bytes(cb_bytes)
        if cb.code_lengths.size != 2 * radius:
            raise CorruptPayload("codebook size does not match the alphabet")
        v["codes"] = enc.huffman_decode(cb, stream, n)

    def outlier_scatter(v):
        delay()
        ib, vb, anchors = v["outlier_bytes"]
        recon = np.zeros(n, np.float32)
        flags = np.zeros(n, np.uint8)
        idx = np.frombuffer(ib, "<u8").astype(np.int64)
        recon[idx] = np.frombuffer(vb, "<f4")
        flags[idx] = 1
        if use_interp and anchors:
            stride = cfg.anchor_stride
            adims = tuple((d - 1) // stride + 1 for d in dims3)
            grid = np.frombuffer(anchors, "<f4").reshape(adims)
            recon.reshape(dims3)[::stride, ::stride, ::stride] = grid
        v["field"] = (recon, flags, len(anchors) > 0)

    def predict_reconstruct(v):
        delay()
        codes = v["codes"]
        recon, flags, have_anchors = v["field"]
        if codes.size and int(codes.max()) >= 2 * radius:
            raise CorruptPayload("decoded code >= 2*radius")
        if use_interp and have_anchors:
            _run_interp(_NO_ORIG, codes, recon, flags, dims3, bound.eb_abs, radius, cfg, False)
        else:
            _lorenzo_decode(codes, flags, recon, dims3[0], dims3[1], dims3[2], bound.eb_abs, radius)
        v["field"] = Field(a.dims, recon)

    g.add_task("parse-segments", reads={"archive"}, writes={"bitstream", "outlier_bytes"}, body=parse_segments)
    g.add_task("huffman-decode", reads={"bitstream"}, writes={"codes"}, body=huffman_decode_task)
    g.add_task("outlier-scatter", reads={"outlier_bytes"}, writes={"field"}, body=outlier_scatter)
    g.add_task("predict-reconstruct", reads={"codes"}, writes={"field"}, body=predict_reconstruct)
    return g


def decompress_via_graph(a: Archive, workers: int | None = None) -> Field:
    """Graph-executed decompression; bitwise equal to decompress()."""

    spec = get_pipeline(a.pipeline_id)
    if spec.primary_codec != "huffman" or len(a.segments) == 0:
        return decompress(a)
    g = build_decompress_graph(a)
    graph_execute(g, worker_count(workers))
    return g.buffers["field"]


def build_compress_graph(field: Field, eb: ErrorBoundSpec, pipeline) -> TaskGraph:
    """Compression as a task graph; archive lands in buffer "archive"."""

    spec = get_pipeline(pipeline)
    bound = resolve_bound(field, eb)
    g = TaskGraph()
    g.add_buffer("field", field)
    g.add_buffer("quant")
    g.add_buffer("anchors")
    g.add_buffer("hist")
    g.add_buffer("primary_segs")
    g.add_buffer("outlier_segs")
    g.add_buffer("archive")
    an_stage = spec.stage_of(StageKind.ANALYSIS)
    sc_stage = spec.stage_of(StageKind.SECONDARY_CODEC)

    def predict_task(v):
        q, anchors = _run_predict(spec, v["field"], bound)
        v["quant"] = q
        v["anchors"] = anchors

    def analysis_task(v):
        v["hist"] = _run_analysis(an_stage, v["quant"])

    def outser_task(v):
        v["outlier_segs"] = _outlier_segments(v["quant"])

    def primary_task(v):
        v["primary_segs"] = _run_primary(spec, v["quant"], v["hist"] if an_stage else None)

    def secondary_task(v):
        v["primary_segs"] = _wrap_secondary(sc_stage, v["primary_segs"])

    def assemble_task(v):
        v["archive"] = _assemble(
            spec, eb, field, bound, spec.radius(), v["outlier_segs"], v["anchors"], v["primary_segs"]
        )

    g.add_task("predict", reads={"field"}, writes={"quant", "anchors"}, body=predict_task)
    g.add_task("serialize-outliers", reads={"quant"}, writes={"outlier_segs"}, body=outser_task)
    if an_stage is not None:
        g.add_task("analysis", reads={"quant"}, writes={"hist"}, body=analysis_task)
        g.add_task("primary-encode", reads={"quant", "hist"}, writes={"primary_segs"}, body=primary_task)
    else:
        g.add_task("primary-encode", reads={"quant"}, writes={"primary_segs"}, body=primary_task)
    if sc_stage is not None:
        g.add_task("secondary-encode", reads={"primary_segs"}, writes={"primary_segs"}, body=secondary_task)
    g.add_task(
        "assemble",
        reads={"outlier_segs", "anchors", "primary_segs"},
        writes={"archive"},
        body=assemble_task,
    )
    return g


def compress_via_graph(field: Field, eb: ErrorBoundSpec, pipeline, workers: int | None = None) -> Archive:
    """Graph-executed compression; archives are byte-identical to compress()."""

    spec = get_pipeline(pipeline)
    lo = float(field.data.min())
    hi = float(field.data.max())
    if lo == hi:
        return _constant_archive(spec, eb, field, lo, hi)
    g = build_compress_graph(field, eb, spec)
    graph_execute(g, worker_count(workers))
    return g.buffers["archive"]
