"""Lossless stages: code histograms, canonical Huffman, bitshuffle with
zero-word elision, and the pluggable secondary byte codec.

Everything here is bit-exact lossless; the lossy decisions all live in the
predictors.  Byte layouts defined in this module:

* Huffman codebook (segment kind 0): one u8 code length per symbol,
  alphabet-size bytes total; canonical codes are derived from lengths.
* Huffman bitstream (segment kind 1): MSB-first within bytes, zero-padded
  to a byte boundary.  The decoder rejects nonzero padding, so a single
  flipped bit is never silently absorbed.
* Bitshuffle (kinds 4 and 5): codes as u16, 256-code blocks, bit-plane
  transposed (16 planes of 32 bytes per block), scanned as 32-bit words
  with zero words elided; the bitmap holds one bit per word, LSB-first
  within bytes.  Bit order inside a plane is LSB-first as well.
* Secondary wrapping: codec_id u8 followed by the codec's output; the
  built-in codec 0 is a zero-run-length coder (control 0x00 + LEB128 run
  length for runs of >= 4 zero bytes, control 0x01..0xFE for that many
  literal bytes, 0xFF reserved).
"""

from __future__ import annotations

from dataclasses import dataclass
from heapq import merge as _heapq_merge

import numpy as np
from numba import njit

from .errors import (
    BitmapPayloadMismatch,
    CodeOutOfRange,
    CorruptPayload,
    CorruptStream,
    RadiusTooLarge,
    Truncated,
    UnknownCodec,
)

MAX_CODE_LEN = 32
BS_BLOCK = 256  # codes per bitshuffle block
BS_WIDTH = 16  # bits per code
TOPK_SAMPLE_STRIDE = 64
TOPK_DEFAULT_K = 16


# ---------------------------------------------------------------------------
# Histograms


@dataclass(frozen=True, eq=False)
class Histogram:
    bins: np.ndarray
    total: int

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.total == other.total and np.array_equal(self.bins, other.bins)

    def __hash__(self):
        return hash((self.total, self.bins.tobytes()))

    def __post_init__(self):
        bins = np.ascontiguousarray(self.bins, dtype=np.uint64)
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "total", int(self.total))
        if int(bins.sum()) != self.total:
            raise ValueError("bin counts do not sum to total")


def _check_codes(codes: np.ndarray, radius: int) -> np.ndarray:
    codes = np.ascontiguousarray(codes, dtype=np.uint32).reshape(-1)
    if codes.size and int(codes.max()) >= 2 * radius:
        raise CodeOutOfRange(f"code {int(codes.max())} >= {2 * radius}")
    return codes


def histogram_exact(codes: np.ndarray, radius: int) -> Histogram:
    """Exact per-symbol counts over the 2*radius alphabet."""

    codes = _check_codes(codes, radius)
    bins = np.bincount(codes, minlength=2 * radius).astype(np.uint64)
    return Histogram(bins, codes.size)


def histogram_topk(codes: np.ndarray, radius: int, k: int = TOPK_DEFAULT_K) -> Histogram:
    """Hot/cold split histogram; output is bitwise identical to exact.

    A sparse sample nominates k hot symbols which get dedicated counting
    passes; everything else goes through the shared bincount.  The split
    is purely a speed tactic for peaked distributions.
    """

    if not 1 <= k <= 2 * radius:
        raise ValueError(f"k must be in [1, {2 * radius}], got {k}")
    codes = _check_codes(codes, radius)
    bins = np.zeros(2 * radius, np.uint64)
    if codes.size == 0:
        return Histogram(bins, 0)
    sample = np.bincount(codes[::TOPK_SAMPLE_STRIDE], minlength=2 * radius)
    hot = np.argsort(sample, kind="stable")[::-1][:k]
    hot = hot[sample[hot] > 0]
    covered = np.zeros(codes.size, bool)
    for s in hot:
        eq = codes == s
        bins[s] = np.count_nonzero(eq)
        covered |= eq
    cold = codes[~covered]
    bins += np.bincount(cold, minlength=2 * radius).astype(np.uint64)
    return Histogram(bins, codes.size)


# ---------------------------------------------------------------------------
# Canonical Huffman


@dataclass(frozen=True, eq=False)
class HuffmanCodebook:
    """Per-symbol code lengths; canonical codewords derive from these."""

    code_lengths: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, HuffmanCodebook):
            return NotImplemented
        return np.array_equal(self.code_lengths, other.code_lengths)

    def __hash__(self):
        return hash(self.code_lengths.tobytes())

    def __post_init__(self):
        cl = np.ascontiguousarray(self.code_lengths, dtype=np.uint8)
        object.__setattr__(self, "code_lengths", cl)
        if cl.size and int(cl.max()) > MAX_CODE_LEN:
            raise ValueError(f"code length > {MAX_CODE_LEN}")
        used = cl[cl > 0]
        if used.size:
            # Kraft sum as integers: sum 2^(L - l) must be <= 2^L.
            kraft = int(np.sum(1 << (np.uint64(MAX_CODE_LEN) - used.astype(np.uint64))))
            if kraft > 1 << MAX_CODE_LEN:
                raise ValueError("code lengths violate the Kraft inequality")

    @property
    def used_symbols(self) -> int:
        return int(np.count_nonzero(self.code_lengths))

    def to_bytes(self) -> bytes:
        return self.code_lengths.tobytes()

    @classmethod
    def from_bytes(cls, b: bytes) -> "HuffmanCodebook":
        return cls(np.frombuffer(b, np.uint8))

    def canonical_codewords(self) -> np.ndarray:
        """u32 codeword per symbol, assigned by (length asc, symbol asc)."""

        cl = self.code_lengths
        cw = np.zeros(cl.size, np.uint32)
        order = np.lexsort((np.arange(cl.size), cl))
        code = 0
        prev_len = 0
        for s in order:
            l = int(cl[s])
            if l == 0:
                continue
            code <<= l - prev_len
            cw[s] = code
            code += 1
            prev_len = l
        return cw


def _package_merge_lengths(counts: np.ndarray, limit: int) -> np.ndarray:
    """Optimal code lengths under a maximum-length constraint.

    Coins for every (symbol, level) pair are packaged pairwise level by
    level; symbols are charged one length unit per selected coin.  Ties
    resolve by symbol order, which the canonical assignment also uses.
    """

    syms = np.nonzero(counts)[0]
    m = syms.size
    lengths = np.zeros(counts.size, np.uint8)
    if m == 0:
        return lengths
    if m == 1:
        lengths[syms[0]] = 1
        return lengths
    # item: (weight, tiebreak, coin) where coin = symbol int or (a, b) package
    base = sorted((int(counts[s]), int(s), int(s)) for s in syms)
    level: list = []
    for _ in range(limit - 1):
        packaged = []
        prev = None
        for it in _heapq_merge(base, level):
            if prev is None:
                prev = it
            else:
                packaged.append((prev[0] + it[0], prev[1], (prev[2], it[2])))
                prev = None
        level = packaged
    take = list(_heapq_merge(base, level))[: 2 * (m - 1)]
    stack = [coin for _, _, coin in take]
    while stack:
        coin = stack.pop()
        if isinstance(coin, tuple):
            a, b = coin
            stack.append(a)
            stack.append(b)
        else:
            lengths[coin] += 1
    return lengths


def build_codebook(hist: Histogram) -> HuffmanCodebook:
    return HuffmanCodebook(_package_merge_lengths(hist.bins, MAX_CODE_LEN))


@njit(cache=True)
def _hf_pack(symbols, cw, cl, out):
    bitpos = 0
    for i in range(symbols.size):
        s = symbols[i]
        c = cw[s]
        l = cl[s]
        for b in range(l - 1, -1, -1):
            if (c >> b) & 1:
                out[bitpos >> 3] |= np.uint8(1 << (7 - (bitpos & 7)))
            bitpos += 1
    return bitpos


@njit(cache=True)
def _hf_unpack(stream, n, first_code, first_idx, limit, sym_sorted, maxlen, out):
    # Returns final bit position, -1 on truncation, -2 on an invalid code.
    total_bits = stream.size * 8
    bitpos = 0
    for i in range(n):
        code = 0
        l = 0
        while True:
            if bitpos >= total_bits:
                return -1
            bit = (stream[bitpos >> 3] >> (7 - (bitpos & 7))) & 1
            bitpos += 1
            code = (code << 1) | bit
            l += 1
            if l > maxlen:
                return -2
            if code < limit[l]:
                out[i] = sym_sorted[first_idx[l] + code - first_code[l]]
                break
    return bitpos


def _decode_tables(cb: HuffmanCodebook):
    cl = cb.code_lengths
    maxlen = int(cl.max()) if cl.size else 0
    counts = np.bincount(cl, minlength=maxlen + 1).astype(np.int64)
    counts[0] = 0
    first_code = np.zeros(maxlen + 1, np.int64)
    first_idx = np.zeros(maxlen + 1, np.int64)
    limit = np.zeros(maxlen + 1, np.int64)
    code = 0
    idx = 0
    for l in range(1, maxlen + 1):
        code <<= 1
        first_code[l] = code
        first_idx[l] = idx
        limit[l] = code + counts[l]
        code += counts[l]
        idx += counts[l]
    order = np.lexsort((np.arange(cl.size), cl))
    sym_sorted = order[cl[order] > 0].astype(np.uint32)
    return first_code, first_idx, limit, sym_sorted, maxlen


def huffman_encode(codes: np.ndarray, hist: Histogram) -> tuple[HuffmanCodebook, bytes, int]:
    """Canonical Huffman encode; returns (codebook, bitstream, bit count)."""

    codes = np.ascontiguousarray(codes, dtype=np.uint32).reshape(-1)
    cb = build_codebook(hist)
    cl = cb.code_lengths
    bit_count = int(np.sum(hist.bins * cl.astype(np.uint64)))
    out = np.zeros((bit_count + 7) // 8, np.uint8)
    if codes.size:
        packed = _hf_pack(codes, cb.canonical_codewords(), cl, out)
        if packed != bit_count:
            raise CorruptStream("histogram inconsistent with codes")
    return cb, out.tobytes(), bit_count


def huffman_decode(cb: HuffmanCodebook, bitstream: bytes, n: int) -> np.ndarray:
    """Exact inverse of huffman_encode for n symbols."""

    stream = np.frombuffer(bitstream, np.uint8)
    out = np.empty(n, np.uint32)
    if n == 0:
        if stream.size:
            raise CorruptStream(f"{stream.size} bytes after zero symbols")
        return out
    first_code, first_idx, limit, sym_sorted, maxlen = _decode_tables(cb)
    if maxlen == 0:
        raise CorruptStream("empty codebook with nonzero symbol count")
    end = _hf_unpack(stream, n, first_code, first_idx, limit, sym_sorted, maxlen, out)
    if end == -1:
        raise Truncated("bitstream ended mid-symbol")
    if end == -2:
        raise CorruptStream("bit pattern matches no codeword")
    if stream.size != (end + 7) // 8:
        raise CorruptStream("bitstream longer than the decoded symbols need")
    if end & 7:
        tail = int(stream[-1]) & ((1 << (8 - (end & 7))) - 1)
        if tail:
            raise CorruptStream("nonzero padding bits")
    return out


# ---------------------------------------------------------------------------
# Bitshuffle


def _bs_geometry(n: int) -> tuple[int, int]:
    nblocks = (n + BS_BLOCK - 1) // BS_BLOCK
    return nblocks, nblocks * BS_WIDTH * BS_BLOCK // 32


def bitshuffle_encode(codes: np.ndarray, radius: int) -> tuple[bytes, bytes]:
    """Bit-plane transpose plus zero-word elision.

    Returns (bitmap, payload): bitmap has one bit per 32-bit word of the
    transposed stream; payload keeps only the nonzero words.
    """

    if radius > 32768:
        raise RadiusTooLarge(f"radius {radius} exceeds 16-bit code width")
    codes = _check_codes(codes, radius)
    n = codes.size
    nblocks, nwords = _bs_geometry(n)
    u16 = np.zeros(nblocks * BS_BLOCK, np.uint16)
    u16[:n] = codes.astype(np.uint16)
    blocks = u16.reshape(nblocks, BS_BLOCK)
    # planes[b, p, :]: bit p of the 256 codes in block b, LSB-first bytes.
    planes = np.empty((nblocks, BS_WIDTH, BS_BLOCK // 8), np.uint8)
    for p in range(BS_WIDTH):
        bits = ((blocks >> p) & 1).astype(np.uint8)
        planes[:, p, :] = np.packbits(bits, axis=1, bitorder="little")
    words = planes.reshape(-1).view("<u4")
    mask = words != 0
    bitmap = np.packbits(mask, bitorder="little").tobytes()
    payload = words[mask].tobytes()
    return bitmap, payload


def bitshuffle_decode(bitmap: bytes, payload: bytes, n: int, radius: int) -> np.ndarray:
    """Exact inverse of bitshuffle_encode; rejects nonzero block padding."""

    if radius > 32768:
        raise RadiusTooLarge(f"radius {radius} exceeds 16-bit code width")
    nblocks, nwords = _bs_geometry(n)
    if len(bitmap) < (nwords + 7) // 8:
        raise Truncated(f"bitmap is {len(bitmap)} bytes, need {(nwords + 7) // 8}")
    if len(bitmap) > (nwords + 7) // 8:
        raise BitmapPayloadMismatch("bitmap longer than the word count implies")
    allbits = np.unpackbits(np.frombuffer(bitmap, np.uint8), bitorder="little")
    mask = allbits[:nwords].astype(bool)
    if allbits[nwords:].any():
        raise BitmapPayloadMismatch("nonzero bits past the last word")
    if len(payload) % 4:
        raise BitmapPayloadMismatch("payload is not whole 32-bit words")
    if len(payload) // 4 != int(np.count_nonzero(mask)):
        raise BitmapPayloadMismatch(
            f"bitmap marks {int(np.count_nonzero(mask))} words, payload has {len(payload) // 4}"
        )
    words = np.zeros(nwords, "<u4")
    words[mask] = np.frombuffer(payload, "<u4")
    planes = words.view(np.uint8).reshape(nblocks, BS_WIDTH, BS_BLOCK // 8)
    blocks = np.zeros((nblocks, BS_BLOCK), np.uint16)
    for p in range(BS_WIDTH):
        bits = np.unpackbits(planes[:, p, :], axis=1, bitorder="little")
        blocks |= bits.astype(np.uint16) << p
    flat = blocks.reshape(-1)
    # Encode always zero-pads the last block; anything else is corruption
    # that slicing would otherwise swallow.
    if flat[n:].any():
        raise CorruptPayload("nonzero bits in block padding")
    out = flat[:n]
    if out.size and int(out.max()) >= 2 * radius:
        raise CorruptPayload("decoded code >= 2*radius")
    return out.astype(np.uint32)


# ---------------------------------------------------------------------------
# Secondary byte codec


def _leb128_encode(value: int) -> bytes:
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _leb128_decode(buf: bytes, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise CorruptPayload("run length cut short")
        b = buf[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise CorruptPayload("run length too wide")


_RLE_MIN_RUN = 4
_RLE_MAX_LIT = 254


def zero_rle_encode(data: bytes) -> bytes:
    """Collapse runs of >= 4 zero bytes; worst case n + n/254 + 1 bytes."""

    a = np.frombuffer(data, np.uint8)
    out = bytearray()

    def emit_literals(chunk: bytes):
        for off in range(0, len(chunk), _RLE_MAX_LIT):
            part = chunk[off : off + _RLE_MAX_LIT]
            out.append(len(part))
            out.extend(part)

    if a.size == 0:
        return b""
    z = (a == 0).astype(np.int8)
    d = np.diff(z)
    starts = (np.nonzero(d == 1)[0] + 1).tolist()
    ends = (np.nonzero(d == -1)[0] + 1).tolist()
    if z[0]:
        starts.insert(0, 0)
    if z[-1]:
        ends.append(a.size)
    pos = 0
    for s, e in zip(starts, ends):
        if e - s < _RLE_MIN_RUN:
            continue
        if s > pos:
            emit_literals(data[pos:s])
        out.append(0)
        out += _leb128_encode(e - s)
        pos = e
    if pos < len(data):
        emit_literals(data[pos:])
    return bytes(out)


def zero_rle_decode(data: bytes) -> bytes:
    out = bytearray()
    pos = 0
    n = len(data)
    while pos < n:
        c = data[pos]
        pos += 1
        if c == 0:
            run, pos = _leb128_decode(data, pos)
            if run == 0:
                raise CorruptPayload("zero-length run")
            out += bytes(run)
        elif c == 0xFF:
            raise CorruptPayload("reserved control byte 0xFF")
        else:
            if pos + c > n:
                raise CorruptPayload("literal block cut short")
            out += data[pos : pos + c]
            pos += c
    return bytes(out)


_SECONDARY_CODECS: dict[int, tuple] = {0: (zero_rle_encode, zero_rle_decode)}


def register_secondary_codec(codec_id: int, encode_fn, decode_fn) -> None:
    """Plug an external lossless byte codec in behind codec_id."""

    codec_id = int(codec_id)
    if not 0 <= codec_id <= 255:
        raise ValueError(f"codec_id must fit a byte, got {codec_id}")
    _SECONDARY_CODECS[codec_id] = (encode_fn, decode_fn)


def secondary_encode(segment: bytes, codec_id: int = 0) -> bytes:
    """Encode a byte segment, prefixing the codec id for self-description."""

    if codec_id not in _SECONDARY_CODECS:
        raise UnknownCodec(f"codec id {codec_id}")
    enc, _ = _SECONDARY_CODECS[codec_id]
    return bytes([codec_id]) + enc(bytes(segment))


def secondary_decode(wrapped: bytes) -> bytes:
    if len(wrapped) < 1:
        raise CorruptPayload("missing codec id byte")
    codec_id = wrapped[0]
    if codec_id not in _SECONDARY_CODECS:
        raise UnknownCodec(f"codec id {codec_id}")
    _, dec = _SECONDARY_CODECS[codec_id]
    return dec(bytes(wrapped[1:]))
