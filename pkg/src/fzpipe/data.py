"""Raw-field ingestion and deterministic synthetic generators.

Raw files are headerless little-endian float32, row-major, dims supplied
out of band (the common scientific-archive convention), so real dataset
files drop in unchanged.

Synthetic fields are produced by a counter-based SplitMix64 stream so the
bytes depend only on (kind, dims, seed, params), never on numpy versions
or draw chunking.  The state transition, for draw index i (0-based):

    z = (seed + (i+1) * 0x9E3779B97F4A7C15) mod 2^64
    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9  (mod 2^64)
    z ^= z >> 27;  z *= 0x94D049BB133111EB  (mod 2^64)
    z ^= z >> 31
    uniform = (z >> 11) * 2^-53   in [0, 1)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .core import Field
from .errors import BadParams, IoError, NonFiniteValue, SizeMismatch

_SM64_GAMMA = 0x9E3779B97F4A7C15
_SM64_M1 = 0xBF58476D1CE4E5B9
_SM64_M2 = 0x94D049BB133111EB


def splitmix64_uniform(seed: int, start: int, count: int) -> np.ndarray:
    """Draws [start, start+count) of the unit-uniform stream for a seed."""

    i = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = i * np.uint64(_SM64_GAMMA) + np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_SM64_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_SM64_M2)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


class SynthKind(enum.Enum):
    SMOOTH_TRIG = "smooth_trig"
    FILTERED_NOISE = "filtered_noise"
    PIECEWISE_CONSTANT = "piecewise_constant"
    PARTICLE1D = "particle1d"


@dataclass(frozen=True)
class SyntheticSpec:
    kind: SynthKind
    dims: tuple[int, ...]
    seed: int = 0
    params: tuple = ()

    def __post_init__(self):
        try:
            kind = SynthKind(self.kind)
        except ValueError:
            raise BadParams(f"unknown generator kind '{self.kind}'") from None
        p = self.params
        if isinstance(p, dict):
            p = tuple(sorted((str(k), str(v)) for k, v in p.items()))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "params", tuple(p))

    def param(self, key: str, default):
        for k, v in self.params:
            if k == key:
                return type(default)(v)
        return default


def _unit_coords(dims: tuple[int, ...]) -> list[np.ndarray]:
    return [np.arange(d, dtype=np.float64) / d for d in dims]


def _smooth_trig(spec: SyntheticSpec) -> np.ndarray:
    terms = spec.param("terms", 4)
    max_cycles = spec.param("max_cycles", 2.0)
    if terms < 1 or max_cycles <= 0:
        raise BadParams("smooth_trig needs terms >= 1 and max_cycles > 0")
    dims = spec.dims
    nd = len(dims)
    # Per term: nd frequencies, one phase, one amplitude, drawn in order.
    draws = splitmix64_uniform(spec.seed, 0, terms * (nd + 2))
    coords = _unit_coords(dims)
    out = np.zeros(dims, np.float64)
    for t in range(terms):
        d0 = t * (nd + 2)
        freqs = 0.25 + (max_cycles - 0.25) * draws[d0 : d0 + nd]
        phase = 2.0 * np.pi * draws[d0 + nd]
        amp = (0.5 + draws[d0 + nd + 1]) / (t + 1)
        arg = np.full(dims, phase)
        for d in range(nd):
            shape = [1] * nd
            shape[d] = dims[d]
            arg = arg + (2.0 * np.pi * freqs[d] * coords[d]).reshape(shape)
        out += amp * np.sin(arg)
    return out


def _filtered_noise(spec: SyntheticSpec) -> np.ndarray:
    width = spec.param("width", 4)
    if width < 1:
        raise BadParams("filtered_noise needs width >= 1")
    n = int(np.prod(spec.dims))
    noise = splitmix64_uniform(spec.seed, 0, n).reshape(spec.dims)
    if width == 1:
        return noise
    return uniform_filter(noise, size=width, mode="wrap")


def _piecewise_constant(spec: SyntheticSpec) -> np.ndarray:
    block = spec.param("block", 16)
    if block < 1:
        raise BadParams("piecewise_constant needs block >= 1")
    nblocks = tuple((d - 1) // block + 1 for d in spec.dims)
    levels = splitmix64_uniform(spec.seed, 0, int(np.prod(nblocks))).reshape(nblocks)
    out = levels
    for d in range(len(spec.dims)):
        out = np.repeat(out, block, axis=d)
    return out[tuple(slice(0, d) for d in spec.dims)]


def _particle1d(spec: SyntheticSpec) -> np.ndarray:
    if len(spec.dims) != 1:
        raise BadParams("particle1d generates 1D fields only")
    box = spec.param("box", 1000.0)
    jitter = spec.param("jitter", 0.3)
    if box <= 0 or not 0 <= jitter < 0.5:
        raise BadParams("particle1d needs box > 0 and 0 <= jitter < 0.5")
    n = spec.dims[0]
    u = splitmix64_uniform(spec.seed, 0, n)
    return box * (np.arange(n, dtype=np.float64) + 0.5 + jitter * (2.0 * u - 1.0)) / n


_GENERATORS = {
    SynthKind.SMOOTH_TRIG: _smooth_trig,
    SynthKind.FILTERED_NOISE: _filtered_noise,
    SynthKind.PIECEWISE_CONSTANT: _piecewise_constant,
    SynthKind.PARTICLE1D: _particle1d,
}


def generate(spec: SyntheticSpec) -> Field:
    """Deterministic synthetic field; same spec, same bytes, every run."""

    arr = _GENERATORS[spec.kind](spec)
    return Field(spec.dims, arr.astype(np.float32).reshape(-1))


def read_raw_f32(path: str, dims: tuple[int, ...]) -> Field:
    """Read a headerless little-endian f32 file with the declared dims."""

    dims = tuple(int(d) for d in dims)
    n = 1
    for d in dims:
        n *= d
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise IoError(str(e)) from e
    if len(raw) != 4 * n:
        raise SizeMismatch(f"file is {len(raw)} bytes, dims {dims} need {4 * n}")
    data = np.frombuffer(raw, "<f4").astype(np.float32)
    finite = np.isfinite(data)
    if not finite.all():
        raise NonFiniteValue(int(np.argmin(finite)))
    return Field(dims, data)


def write_raw_f32(field: Field, path: str) -> None:
    """Exact inverse of read_raw_f32."""

    try:
        with open(path, "wb") as fh:
            fh.write(field.data.astype("<f4").tobytes())
    except OSError as e:
        raise IoError(str(e)) from e
