"""Modular error-bounded lossy compression for float32 scientific fields.

A pipeline is predictor -> quantizer -> primary codec -> optional
secondary codec. Archives are self-describing; decompression needs only
the archive plus the registry entry for its pipeline id. Stages can run
sequentially or on a dependency-inferring task-graph executor.
"""

from .core import (
    Archive,
    ErrorBoundSpec,
    ErrorMode,
    Field,
    QuantOutput,
    ResolvedBound,
    field_from_array,
    parse_archive,
    resolve_bound,
    serialize_archive,
)
from .data import SyntheticSpec, SynthKind, generate, read_raw_f32, write_raw_f32
from .errors import FZError
from .graph import Task, TaskGraph, graph_execute
from .metrics import (
    QualityReport,
    RateReport,
    SpeedupInputs,
    overall_speedup,
    quality,
    rate,
)
from .pipeline import (
    PipelineSpec,
    StageKind,
    StageSpec,
    compress,
    compress_via_graph,
    decompress,
    decompress_via_graph,
    get_pipeline,
    load_pipeline_file,
    register_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "Archive",
    "ErrorBoundSpec",
    "ErrorMode",
    "FZError",
    "Field",
    "PipelineSpec",
    "QualityReport",
    "QuantOutput",
    "RateReport",
    "ResolvedBound",
    "SpeedupInputs",
    "StageKind",
    "StageSpec",
    "SyntheticSpec",
    "SynthKind",
    "Task",
    "TaskGraph",
    "compress",
    "compress_via_graph",
    "decompress",
    "decompress_via_graph",
    "field_from_array",
    "generate",
    "get_pipeline",
    "graph_execute",
    "load_pipeline_file",
    "overall_speedup",
    "parse_archive",
    "quality",
    "rate",
    "read_raw_f32",
    "register_pipeline",
    "resolve_bound",
    "serialize_archive",
    "write_raw_f32",
    "__version__",
]
