"""Domain types shared by all stages, error-bound resolution, and the
compressed container format.

The container layout (all little-endian) is:

    offset  field
    0-3     magic "FZM1"
    4       version (1)
    5       pipeline_id
    6       eb_mode (0 = absolute, 1 = value-range relative)
    7       ndim (1..3)
    8-15    eb_magnitude  f64
    16-19   data_min      f32
    20-23   data_max      f32
    24-35   dims          3 x u32 (unused trailing dims = 1)
    36-39   radius        u32
    40      segment_count u8
    41-     segment table: per segment (kind u8, byte_length u64)
    then    payloads concatenated in table order

A constant field (data_min == data_max) is stored with segment_count == 0;
decompression rebuilds it from the header alone, losslessly.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    BadMagic,
    ArchiveError,
    MalformedCodes,
    Truncated,
    UnknownPipelineId,
    UnsupportedVersion,
    ZeroRange,
)

MAGIC = b"FZM1"
VERSION = 1

# Segment kinds.
SEG_HUFFMAN_CODEBOOK = 0
SEG_HUFFMAN_BITSTREAM = 1
SEG_OUTLIER_INDICES = 2
SEG_OUTLIER_VALUES = 3
SEG_BITSHUFFLE_BITMAP = 4
SEG_BITSHUFFLE_PAYLOAD = 5
SEG_ANCHOR_GRID = 6
SEG_SECONDARY_WRAPPED = 7

_HEADER = struct.Struct("<4s4Bd2f3IIB")  # 41 bytes incl. segment_count
_SEG_ENTRY = struct.Struct("<BQ")  # kind u8, byte_length u64

# Pipeline ids accepted by parse_archive.  Seeded with the presets; extended
# whenever a custom pipeline is registered (see pipeline.register_pipeline).
_KNOWN_PIPELINE_IDS: set[int] = {0, 1, 2}


def register_known_pipeline_id(pipeline_id: int) -> None:
    _KNOWN_PIPELINE_IDS.add(int(pipeline_id))


class ErrorMode(enum.IntEnum):
    ABSOLUTE = 0
    VALUE_RANGE_RELATIVE = 1


@dataclass(frozen=True)
class Field:
    """An n-dimensional (1-3D) array of finite 32-bit floats.

    ``dims`` lists extents slowest-varying first; ``data`` is the flat
    row-major float32 buffer.
    """

    dims: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not (1 <= len(dims) <= 3):
            raise ValueError(f"dims must have 1..3 entries, got {len(dims)}")
        if any(d < 1 for d in dims):
            raise ValueError(f"every extent must be >= 1, got {dims}")
        data = np.ascontiguousarray(self.data, dtype=np.float32).reshape(-1)
        object.__setattr__(self, "data", data)
        n = 1
        for d in dims:
            n *= d
        if data.size != n:
            raise ValueError(f"data has {data.size} elements, dims imply {n}")
        if not np.isfinite(data).all():
            bad = int(np.argmin(np.isfinite(data)))
            raise ValueError(f"non-finite value at flat index {bad}")

    @property
    def len(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def nbytes(self) -> int:
        return self.data.size * 4

    def as_nd(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Field):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(
            self.data.view(np.uint32), other.data.view(np.uint32)
        )


def field_from_array(arr: np.ndarray) -> Field:
    """Build a Field from an nd array, casting to float32."""

    a = np.asarray(arr)
    return Field(tuple(a.shape), a.astype(np.float32, copy=False).reshape(-1))


@dataclass(frozen=True)
class ErrorBoundSpec:
    mode: ErrorMode
    magnitude: float

    def __post_init__(self):
        if not self.magnitude > 0:
            raise ValueError(f"error-bound magnitude must be > 0, got {self.magnitude}")


@dataclass(frozen=True)
class ResolvedBound:
    eb_abs: float
    data_min: float
    data_max: float

    def __post_init__(self):
        if not self.eb_abs > 0:
            raise ValueError(f"eb_abs must be > 0, got {self.eb_abs}")
        if self.data_max < self.data_min:
            raise ValueError("data_max < data_min")


def resolve_bound(field: Field, spec: ErrorBoundSpec) -> ResolvedBound:
    """Resolve a user error bound to an absolute bound for one field.

    min/max are exact scans over all elements.  Relative mode scales the
    magnitude by (max - min) and refuses constant fields.
    """

    lo = float(field.data.min())
    hi = float(field.data.max())
    if spec.mode == ErrorMode.VALUE_RANGE_RELATIVE:
        if hi == lo:
            raise ZeroRange("value-range relative bound on a constant field")
        eb = float(spec.magnitude) * (hi - lo)
    else:
        eb = float(spec.magnitude)
    return ResolvedBound(eb_abs=eb, data_min=lo, data_max=hi)


@dataclass(frozen=True)
class QuantOutput:
    """Quantization codes plus the sparse outlier list.

    ``codes`` are unsigned symbols in [0, 2*radius); outlier positions carry
    the sentinel code == radius and their original float32 value verbatim in
    the parallel (indices, values) arrays, sorted by flat index.
    """

    codes: np.ndarray
    radius: int
    outlier_indices: np.ndarray
    outlier_values: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        codes = np.ascontiguousarray(self.codes, dtype=np.uint32).reshape(-1)
        idx = np.ascontiguousarray(self.outlier_indices, dtype=np.int64).reshape(-1)
        val = np.ascontiguousarray(self.outlier_values, dtype=np.float32).reshape(-1)
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "outlier_indices", idx)
        object.__setattr__(self, "outlier_values", val)
        object.__setattr__(self, "dims", dims)
        n = 1
        for d in dims:
            n *= d
        if codes.size != n:
            raise MalformedCodes(f"codes has {codes.size} entries, dims imply {n}")
        r = int(self.radius)
        if r <= 0:
            raise MalformedCodes(f"radius must be positive, got {r}")
        if codes.size and int(codes.max()) >= 2 * r:
            raise MalformedCodes("code >= 2*radius")
        if idx.size != val.size:
            raise MalformedCodes("outlier index/value length mismatch")
        if idx.size:
            if int(idx.min()) < 0 or int(idx.max()) >= n:
                raise MalformedCodes("outlier index out of range")
            if idx.size > 1 and not (np.diff(idx) > 0).all():
                raise MalformedCodes("outlier indices not strictly increasing")
            if not (codes[idx] == r).all():
                raise MalformedCodes("outlier position without sentinel code")

    @property
    def outliers(self) -> list[tuple[int, float]]:
        return list(zip(self.outlier_indices.tolist(), self.outlier_values.tolist()))


@dataclass(frozen=True)
class Archive:
    """Self-describing compressed container: header plus typed segments."""

    pipeline_id: int
    eb_mode: ErrorMode
    eb_magnitude: float
    data_min: float
    data_max: float
    dims: tuple[int, ...]
    radius: int
    segments: tuple[tuple[int, bytes], ...] = dc_field(default_factory=tuple)
    version: int = VERSION

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not (1 <= len(dims) <= 3) or any(d < 1 for d in dims):
            raise ArchiveError(f"bad dims {dims}")
        segs = tuple((int(k), bytes(p)) for k, p in self.segments)
        if len(segs) > 255:
            raise ArchiveError("more than 255 segments")
        for k, _ in segs:
            if not 0 <= k <= 255:
                raise ArchiveError(f"bad segment kind {k}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "eb_mode", ErrorMode(self.eb_mode))
        # Normalize the f32 header fields so serialize/parse round-trips
        # compare equal.
        object.__setattr__(self, "data_min", float(np.float32(self.data_min)))
        object.__setattr__(self, "data_max", float(np.float32(self.data_max)))
        object.__setattr__(self, "eb_magnitude", float(self.eb_magnitude))
        object.__setattr__(self, "pipeline_id", int(self.pipeline_id))
        object.__setattr__(self, "radius", int(self.radius))
        object.__setattr__(self, "version", int(self.version))

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def element_count(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    def segment(self, kind: int) -> bytes | None:
        """Payload of the first segment of the given kind, or None."""

        for k, p in self.segments:
            if k == kind:
                return p
        return None

    def resolved_bound(self) -> ResolvedBound:
        if self.eb_mode == ErrorMode.VALUE_RANGE_RELATIVE:
            eb = self.eb_magnitude * (self.data_max - self.data_min)
        else:
            eb = self.eb_magnitude
        return ResolvedBound(eb_abs=eb, data_min=self.data_min, data_max=self.data_max)


def serialize_archive(a: Archive) -> bytes:
    """Serialize to the fixed little-endian layout; deterministic."""

    dims3 = list(a.dims) + [1] * (3 - len(a.dims))
    out = bytearray()
    out += _HEADER.pack(
        MAGIC,
        a.version,
        a.pipeline_id,
        int(a.eb_mode),
        a.ndim,
        a.eb_magnitude,
        a.data_min,
        a.data_max,
        dims3[0],
        dims3[1],
        dims3[2],
        a.radius,
        len(a.segments),
    )
    for kind, payload in a.segments:
        out += _SEG_ENTRY.pack(kind, len(payload))
    for _, payload in a.segments:
        out += payload
    return bytes(out)


def parse_archive(b: bytes) -> Archive:
    """Exact inverse of serialize_archive.

    Raises Truncated on any length mismatch (short or trailing bytes).
    """

    if len(b) < 4:
        raise Truncated(f"{len(b)} bytes, header needs {_HEADER.size}")
    if b[:4] != MAGIC:
        raise BadMagic(f"not an archive: magic {b[:4]!r}, expected {MAGIC!r}")
    if len(b) < _HEADER.size:
        raise Truncated(f"{len(b)} bytes, header needs {_HEADER.size}")
    (
        _,
        version,
        pipeline_id,
        eb_mode,
        ndim,
        eb_magnitude,
        data_min,
        data_max,
        d0,
        d1,
        d2,
        radius,
        segment_count,
    ) = _HEADER.unpack_from(b, 0)
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    if pipeline_id not in _KNOWN_PIPELINE_IDS:
        raise UnknownPipelineId(f"pipeline id {pipeline_id}")
    if not 1 <= ndim <= 3:
        raise ArchiveError(f"ndim {ndim}")
    if eb_mode not in (0, 1):
        raise ArchiveError(f"eb_mode {eb_mode}")
    dims = (d0, d1, d2)[:ndim]
    table_end = _HEADER.size + segment_count * _SEG_ENTRY.size
    if len(b) < table_end:
        raise Truncated("segment table extends past end of data")
    entries = []
    for i in range(segment_count):
        kind, length = _SEG_ENTRY.unpack_from(b, _HEADER.size + i * _SEG_ENTRY.size)
        entries.append((kind, length))
    pos = table_end
    segments = []
    for kind, length in entries:
        if len(b) < pos + length:
            raise Truncated("payload shorter than declared length")
        segments.append((kind, b[pos : pos + length]))
        pos += length
    if pos != len(b):
        raise Truncated(f"{len(b) - pos} trailing bytes")
    return Archive(
        pipeline_id=pipeline_id,
        eb_mode=ErrorMode(eb_mode),
        eb_magnitude=eb_magnitude,
        data_min=data_min,
        data_max=data_max,
        dims=dims,
        radius=radius,
        segments=tuple(segments),
        version=version,
    )
