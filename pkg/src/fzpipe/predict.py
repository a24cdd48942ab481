"""Lossy prediction and quantization stages.

Two predictors, each paired with an exact inverse:

* Lorenzo: predicts every element from the inclusion-exclusion sum of its
  preceding corner neighbors (1-3D), sweeping in row-major order.
* Interp: keeps a coarse anchor grid verbatim, then fills the remaining
  points level by level with stride-halving cubic/linear interpolation
  (2-3D; small or 1D fields fall back to Lorenzo).

Both predict from *reconstructed* neighbor values on the encode side, so
the decoder, replaying the same sweep over the same values, reproduces the
encoder's reconstruction bit for bit.  That identity is what turns the
per-element quantization rule into a provable error bound.

Quantization rule (shared): code_signed = round_half_away((v - pred)/(2*eb)),
stored code = code_signed + radius.  If |code_signed| >= radius, or if the
float32-rounded reconstruction would land outside the bound, the element is
demoted to an outlier: stored code = radius (the center symbol) and the
original float32 value is recorded verbatim.  Outlier positions are listed
explicitly, so the shared center symbol is never ambiguous.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import Field, QuantOutput, ResolvedBound
from .errors import AnchorSizeMismatch, MalformedCodes

log = logging.getLogger(__name__)


class PredictorKind(enum.Enum):
    LORENZO = "lorenzo"
    INTERP = "interp"


@dataclass(frozen=True)
class InterpConfig:
    anchor_stride: int = 16
    cubic_weights: tuple[float, float, float, float] = (-1 / 16, 9 / 16, 9 / 16, -1 / 16)

    def __post_init__(self):
        a = int(self.anchor_stride)
        if a < 4 or a & (a - 1):
            raise ValueError(f"anchor_stride must be a power of two >= 4, got {a}")
        w = tuple(float(x) for x in self.cubic_weights)
        if len(w) != 4:
            raise ValueError("cubic_weights needs exactly 4 entries")
        if abs(sum(w) - 1.0) > 1e-12:
            raise ValueError(f"cubic_weights must sum to 1, got {sum(w)!r}")
        object.__setattr__(self, "anchor_stride", a)
        object.__setattr__(self, "cubic_weights", w)


# ---------------------------------------------------------------------------
# numba kernels.  All of them treat the field as 3D (leading extents padded
# to 1 for 1D/2D inputs), index flat row-major, and keep prediction
# arithmetic in float64 while the recon buffer stays float32.  The encode
# and decode kernels share the prediction expressions verbatim; do not
# "simplify" one side without the other.


@njit(cache=True)
def _quant_store(v, pred, two_eb, eb, radius, codes, recon, flags, t):
    # Returns nothing; writes code/recon/flags for element t.
    q = (v - pred) / two_eb
    aq = abs(q)
    f = np.floor(aq)
    r = f + 1.0 if aq - f >= 0.5 else f
    if r < radius:
        s = int(r)
        if q < 0.0:
            s = -s
        rec = np.float32(pred + two_eb * s)
        if abs(rec - v) <= eb:
            codes[t] = s + radius
            recon[t] = rec
            return
    # Out of alphabet range, or the float32 rounding of the reconstruction
    # broke the bound: store the original value verbatim.
    codes[t] = radius
    recon[t] = np.float32(v)
    flags[t] = 1


@njit(cache=True)
def _lorenzo_encode(orig, codes, recon, flags, n0, n1, n2, eb, radius):
    two_eb = 2.0 * eb
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                t = (i * n1 + j) * n2 + k
                pred = 0.0
                if i > 0:
                    pred += recon[t - n1 * n2]
                if j > 0:
                    pred += recon[t - n2]
                if k > 0:
                    pred += recon[t - 1]
                if i > 0 and j > 0:
                    pred -= recon[t - n1 * n2 - n2]
                if i > 0 and k > 0:
                    pred -= recon[t - n1 * n2 - 1]
                if j > 0 and k > 0:
                    pred -= recon[t - n2 - 1]
                if i > 0 and j > 0 and k > 0:
                    pred += recon[t - n1 * n2 - n2 - 1]
                _quant_store(np.float64(orig[t]), pred, two_eb, eb, radius, codes, recon, flags, t)


@njit(cache=True)
def _lorenzo_decode(codes, flags, recon, n0, n1, n2, eb, radius):
    # Outlier values must already be scattered into recon (flags == 1).
    two_eb = 2.0 * eb
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                t = (i * n1 + j) * n2 + k
                if flags[t]:
                    continue
                pred = 0.0
                if i > 0:
                    pred += recon[t - n1 * n2]
                if j > 0:
                    pred += recon[t - n2]
                if k > 0:
                    pred += recon[t - 1]
                if i > 0 and j > 0:
                    pred -= recon[t - n1 * n2 - n2]
                if i > 0 and k > 0:
                    pred -= recon[t - n1 * n2 - 1]
                if j > 0 and k > 0:
                    pred -= recon[t - n2 - 1]
                if i > 0 and j > 0 and k > 0:
                    pred += recon[t - n1 * n2 - n2 - 1]
                s = int(codes[t]) - radius
                recon[t] = np.float32(pred + two_eb * s)


@njit(cache=True)
def _interp_predict(recon, t, c, n, sh, s3h, h, w0, w1, w2, w3):
    # 1D interpolation along one axis at flat index t, coordinate c (an odd
    # multiple of h), extent n, element strides sh = stride*h, s3h = 3*sh.
    if c - 3 * h >= 0 and c + 3 * h < n:
        return (
            w0 * recon[t - s3h]
            + w1 * recon[t - sh]
            + w2 * recon[t + sh]
            + w3 * recon[t + s3h]
        )
    if c + h < n:
        return 0.5 * recon[t - sh] + 0.5 * recon[t + sh]
    return np.float64(recon[t - sh])


@njit(cache=True)
def _interp_pass(
    orig, codes, recon, flags, n0, n1, n2, h, axis, eb, radius, w0, w1, w2, w3, encode
):
    two_eb = 2.0 * eb
    h2 = 2 * h
    if axis == 0:
        for i in range(h, n0, h2):
            for j in range(0, n1, h2):
                for k in range(0, n2, h2):
                    t = (i * n1 + j) * n2 + k
                    pred = _interp_predict(recon, t, i, n0, h * n1 * n2, 3 * h * n1 * n2, h, w0, w1, w2, w3)
                    if encode:
                        _quant_store(np.float64(orig[t]), pred, two_eb, eb, radius, codes, recon, flags, t)
                    elif not flags[t]:
                        s = int(codes[t]) - radius
                        recon[t] = np.float32(pred + two_eb * s)
    elif axis == 1:
        for i in range(0, n0, h):
            for j in range(h, n1, h2):
                for k in range(0, n2, h2):
                    t = (i * n1 + j) * n2 + k
                    pred = _interp_predict(recon, t, j, n1, h * n2, 3 * h * n2, h, w0, w1, w2, w3)
                    if encode:
                        _quant_store(np.float64(orig[t]), pred, two_eb, eb, radius, codes, recon, flags, t)
                    elif not flags[t]:
                        s = int(codes[t]) - radius
                        recon[t] = np.float32(pred + two_eb * s)
    else:
        for i in range(0, n0, h):
            for j in range(0, n1, h):
                for k in range(h, n2, h2):
                    t = (i * n1 + j) * n2 + k
                    pred = _interp_predict(recon, t, k, n2, h, 3 * h, h, w0, w1, w2, w3)
                    if encode:
                        _quant_store(np.float64(orig[t]), pred, two_eb, eb, radius, codes, recon, flags, t)
                    elif not flags[t]:
                        s = int(codes[t]) - radius
                        recon[t] = np.float32(pred + two_eb * s)


def _pad3(dims: tuple[int, ...]) -> tuple[int, int, int]:
    return (1,) * (3 - len(dims)) + tuple(dims)


# Placeholder `orig` for decode-mode interp passes (never indexed there).
_NO_ORIG = np.empty(0, np.float32)


def _outliers_from_flags(orig: np.ndarray, flags: np.ndarray):
    idx = np.nonzero(flags)[0].astype(np.int64)
    return idx, orig[idx].astype(np.float32)


# ---------------------------------------------------------------------------
# Lorenzo


def lorenzo_quantize(field: Field, bound: ResolvedBound, radius: int = 512) -> QuantOutput:
    """Quantize prediction residuals against the Lorenzo predictor.

    Guarantees |reconstruction - original| <= bound.eb_abs at every element.
    """

    q, _ = _lorenzo_quantize_with_recon(field, bound, radius)
    return q


def _lorenzo_quantize_with_recon(field: Field, bound: ResolvedBound, radius: int):
    n = field.len
    n0, n1, n2 = _pad3(field.dims)
    codes = np.empty(n, np.uint32)
    recon = np.zeros(n, np.float32)
    flags = np.zeros(n, np.uint8)
    _lorenzo_encode(field.data, codes, recon, flags, n0, n1, n2, float(bound.eb_abs), int(radius))
    idx, vals = _outliers_from_flags(field.data, flags)
    return QuantOutput(codes, int(radius), idx, vals, field.dims), recon


def lorenzo_reconstruct(q: QuantOutput, bound: ResolvedBound) -> Field:
    """Invert lorenzo_quantize; bit-exact vs the encoder's reconstruction."""

    if q.codes.size and int(q.codes.max()) >= 2 * q.radius:
        raise MalformedCodes("code >= 2*radius")
    n0, n1, n2 = _pad3(q.dims)
    recon = np.zeros(q.codes.size, np.float32)
    flags = np.zeros(q.codes.size, np.uint8)
    recon[q.outlier_indices] = q.outlier_values
    flags[q.outlier_indices] = 1
    _lorenzo_decode(q.codes, flags, recon, n0, n1, n2, float(bound.eb_abs), q.radius)
    return Field(q.dims, recon)


# ---------------------------------------------------------------------------
# Interpolation


def _anchor_dims(dims: tuple[int, ...], stride: int) -> tuple[int, ...]:
    return tuple((d - 1) // stride + 1 for d in dims)


def _interp_applicable(field: Field, cfg: InterpConfig) -> bool:
    if field.ndim == 1:
        return False
    return all(d >= cfg.anchor_stride + 1 for d in field.dims)


def interp_quantize(
    field: Field, bound: ResolvedBound, radius: int = 512, cfg: InterpConfig = InterpConfig()
) -> tuple[QuantOutput, bytes]:
    """Multi-level interpolation predictor.

    Returns the quantization output plus the verbatim anchor-grid bytes
    (little-endian f32, row-major over the anchor lattice).  1D fields and
    fields with any extent < anchor_stride + 1 fall back to Lorenzo; the
    fallback is signalled by empty anchor bytes.
    """

    if not _interp_applicable(field, cfg):
        log.warning(
            "interpolation needs a 2D or 3D field with every extent >= %d, got dims %s; "
            "falling back to Lorenzo",
            cfg.anchor_stride + 1,
            field.dims,
        )
        return lorenzo_quantize(field, bound, radius), b""
    q, _, anchors = _interp_quantize_with_recon(field, bound, radius, cfg)
    return q, anchors


def _interp_quantize_with_recon(field: Field, bound: ResolvedBound, radius: int, cfg: InterpConfig):
    n = field.len
    n0, n1, n2 = _pad3(field.dims)
    a = cfg.anchor_stride
    codes = np.full(n, int(radius), np.uint32)
    recon = np.zeros(n, np.float32)
    flags = np.zeros(n, np.uint8)
    orig_nd = field.data.reshape((n0, n1, n2))
    anchors = np.ascontiguousarray(orig_nd[::a, ::a, ::a])
    recon.reshape((n0, n1, n2))[::a, ::a, ::a] = anchors
    _run_interp(field.data, codes, recon, flags, (n0, n1, n2), bound.eb_abs, radius, cfg, True)
    idx, vals = _outliers_from_flags(field.data, flags)
    q = QuantOutput(codes, int(radius), idx, vals, field.dims)
    return q, recon, anchors.astype("<f4").tobytes()


def _run_interp(orig, codes, recon, flags, dims3, eb, radius, cfg: InterpConfig, encode: bool):
    n0, n1, n2 = dims3
    w0, w1, w2, w3 = cfg.cubic_weights
    h = cfg.anchor_stride // 2
    while h >= 1:
        for axis in (0, 1, 2):
            _interp_pass(
                orig, codes, recon, flags, n0, n1, n2, h, axis,
                float(eb), int(radius), w0, w1, w2, w3, encode,
            )
        h //= 2


def interp_reconstruct(
    q: QuantOutput, anchors: bytes, bound: ResolvedBound, cfg: InterpConfig = InterpConfig()
) -> Field:
    """Invert interp_quantize (empty anchors means the Lorenzo fallback)."""

    if len(anchors) == 0:
        return lorenzo_reconstruct(q, bound)
    if q.codes.size and int(q.codes.max()) >= 2 * q.radius:
        raise MalformedCodes("code >= 2*radius")
    n0, n1, n2 = _pad3(q.dims)
    a = cfg.anchor_stride
    adims = _anchor_dims((n0, n1, n2), a)
    want = 4 * adims[0] * adims[1] * adims[2]
    if len(anchors) != want:
        raise AnchorSizeMismatch(f"anchor payload is {len(anchors)} bytes, expected {want}")
    recon = np.zeros(q.codes.size, np.float32)
    flags = np.zeros(q.codes.size, np.uint8)
    recon[q.outlier_indices] = q.outlier_values
    flags[q.outlier_indices] = 1
    grid = np.frombuffer(anchors, dtype="<f4").reshape(adims)
    recon.reshape((n0, n1, n2))[::a, ::a, ::a] = grid
    _run_interp(_NO_ORIG, q.codes, recon, flags, (n0, n1, n2), bound.eb_abs, q.radius, cfg, False)
    return Field(q.dims, recon)
