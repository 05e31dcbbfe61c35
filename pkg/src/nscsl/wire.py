"""Bit-exact payload serialization and byte accounting.

Every payload starts with the same 20-byte little-endian header::

    offset  size  field
    0       4     magic  b"NSC1"
    4       1     format_tag (0 = lowrank, 1 = topk, 2 = quant)
    5       4     m (u32)
    9       4     n (u32)
    13      4     r_or_k (u32): rank, kept-entry count, or bit width
    17      2     reserved (u16, zero)
    19      1     padding (zero)

Bodies, all little-endian:

* lowrank: P (m*r float32, row-major) then Q (n*r float32, row-major).
  Exactly ``4*r*(m+n)`` bytes: the quantity byte budgets are written
  against. The header is framing and is excluded from budget checks, but
  the link simulation still transmits it.
* topk: ``k`` pairs of (u32 flat index, float32 value), indices strictly
  increasing. ``8*k`` bytes.
* quant: one float32 scale then ``ceil(bits*m*n/8)`` bytes of codes packed
  MSB-first, final byte zero-padded.

The body length is derivable from the header alone, so truncation is always
detected and reported with expected/actual byte counts. Decoding validates
magic, tag, dimensions, index ordering, code range and entry finiteness;
a corrupt buffer raises :class:`WireError`, never returns a garbage matrix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .oasa import LowRankFactors

__all__ = [
    "WireError",
    "HEADER_LEN",
    "MAGIC",
    "TAG_LOWRANK",
    "TAG_TOPK",
    "TAG_QUANT",
    "PayloadHeader",
    "TopkPayload",
    "QuantPayload",
    "lowrank_body_len",
    "encode",
    "decode",
    "peek_header",
]

MAGIC = b"NSC1"
HEADER_LEN = 20
_HEADER_STRUCT = struct.Struct("<4sBIIIHx")

TAG_LOWRANK = 0
TAG_TOPK = 1
TAG_QUANT = 2

_U32_MAX = 2**32 - 1


class WireError(ValueError):
    """Malformed payload: bad magic, unknown tag, or length mismatch."""


@dataclass(frozen=True)
class PayloadHeader:
    format_tag: int
    m: int
    n: int
    r_or_k: int


@dataclass(frozen=True)
class TopkPayload:
    """Sparse payload: flat indices (sorted ascending) and their values."""

    m: int
    n: int
    indices: np.ndarray  # int64, values fit u32
    values: np.ndarray  # float64 holding float32-exact values

    def to_matrix(self) -> np.ndarray:
        out = np.zeros(self.m * self.n)
        out[self.indices] = self.values
        return out.reshape(self.m, self.n)


@dataclass(frozen=True)
class QuantPayload:
    """Uniform-lattice payload: scale plus one level code per entry."""

    m: int
    n: int
    bits: int
    scale: float
    codes: np.ndarray  # int64 level indices, row-major

    @property
    def levels(self) -> int:
        return (1 << self.bits) - 1

    def to_matrix(self) -> np.ndarray:
        if self.scale == 0.0:
            return np.zeros((self.m, self.n))
        spacing = 2.0 * self.scale / (self.levels - 1)
        return (-self.scale + self.codes * spacing).reshape(self.m, self.n)


def lowrank_body_len(m: int, n: int, r: int) -> int:
    """Factor-pair body size in bytes: two single-precision factors."""
    return 4 * r * (m + n)


def _check_u32(value: int, name: str) -> int:
    if not 0 <= value <= _U32_MAX:
        raise WireError(f"{name}={value} overflows u32")
    return value


def _pack_header(tag: int, m: int, n: int, r_or_k: int) -> bytes:
    return _HEADER_STRUCT.pack(
        MAGIC, tag, _check_u32(m, "m"), _check_u32(n, "n"), _check_u32(r_or_k, "r_or_k"), 0
    )


def _pack_bits(codes: np.ndarray, bits: int) -> bytes:
    unpacked = np.zeros(codes.size * bits, dtype=np.uint8)
    for b in range(bits):  # MSB first within each code
        unpacked[b::bits] = (codes >> (bits - 1 - b)) & 1
    return np.packbits(unpacked).tobytes()


def _unpack_bits(raw: bytes, bits: int, count: int) -> np.ndarray:
    unpacked = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[: count * bits]
    codes = np.zeros(count, dtype=np.int64)
    for b in range(bits):
        codes = (codes << 1) | unpacked[b::bits]
    return codes


def encode(payload: LowRankFactors | TopkPayload | QuantPayload) -> bytes:
    """Serialize a payload; inverse of :func:`decode`."""
    if isinstance(payload, LowRankFactors):
        m, n = payload.shape
        r = payload.rank
        header = _pack_header(TAG_LOWRANK, m, n, r)
        body = (
            np.ascontiguousarray(payload.p_mat, dtype="<f4").tobytes()
            + np.ascontiguousarray(payload.q_mat, dtype="<f4").tobytes()
        )
        assert len(body) == lowrank_body_len(m, n, r)
        return header + body
    if isinstance(payload, TopkPayload):
        k = payload.indices.size
        header = _pack_header(TAG_TOPK, payload.m, payload.n, k)
        pairs = np.empty(k, dtype=[("idx", "<u4"), ("val", "<f4")])
        pairs["idx"] = payload.indices
        pairs["val"] = payload.values
        return header + pairs.tobytes()
    if isinstance(payload, QuantPayload):
        if not 2 <= payload.bits <= 8:
            raise WireError(f"quant bits must be in 2..8, got {payload.bits}")
        header = _pack_header(TAG_QUANT, payload.m, payload.n, payload.bits)
        scale = np.float32(payload.scale).tobytes()
        return header + scale + _pack_bits(payload.codes, payload.bits)
    raise TypeError(f"cannot encode {type(payload).__name__}")


def peek_header(buf: bytes) -> PayloadHeader:
    """Parse and validate the fixed header without touching the body."""
    if len(buf) < HEADER_LEN:
        raise WireError(f"buffer too short for header: expected >= {HEADER_LEN}, got {len(buf)}")
    magic, tag, m, n, r_or_k, reserved = _HEADER_STRUCT.unpack_from(buf)
    if magic != MAGIC:
        raise WireError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if tag not in (TAG_LOWRANK, TAG_TOPK, TAG_QUANT):
        raise WireError(f"unknown format tag {tag}")
    if m < 1 or n < 1:
        raise WireError(f"invalid dimensions {m}x{n}")
    return PayloadHeader(format_tag=tag, m=m, n=n, r_or_k=r_or_k)


def _expect_len(buf: bytes, expected_body: int) -> None:
    actual = len(buf) - HEADER_LEN
    if actual != expected_body:
        raise WireError(f"body length mismatch: expected {expected_body} bytes, got {actual}")


def _finite_f32(raw: bytes, name: str) -> np.ndarray:
    arr = np.frombuffer(raw, dtype="<f4").astype(float)
    if not np.all(np.isfinite(arr)):
        raise WireError(f"{name} contains non-finite values")
    return arr


def decode(buf: bytes) -> LowRankFactors | TopkPayload | QuantPayload:
    """Parse a payload produced by :func:`encode`, validating as it goes."""
    h = peek_header(buf)
    body = buf[HEADER_LEN:]

    if h.format_tag == TAG_LOWRANK:
        r = h.r_or_k
        if not 1 <= r <= min(h.m, h.n):
            raise WireError(f"rank {r} invalid for a {h.m}x{h.n} matrix")
        _expect_len(buf, lowrank_body_len(h.m, h.n, r))
        p_len = 4 * h.m * r
        p = _finite_f32(body[:p_len], "P").reshape(h.m, r)
        q = _finite_f32(body[p_len:], "Q").reshape(h.n, r)
        return LowRankFactors(p_mat=p, q_mat=q, rank=r)

    if h.format_tag == TAG_TOPK:
        k = h.r_or_k
        if not 1 <= k <= h.m * h.n:
            raise WireError(f"k={k} invalid for a {h.m}x{h.n} matrix")
        _expect_len(buf, 8 * k)
        pairs = np.frombuffer(body, dtype=[("idx", "<u4"), ("val", "<f4")])
        idx = pairs["idx"].astype(np.int64)
        if np.any(idx >= h.m * h.n):
            raise WireError("topk index out of range")
        if np.any(np.diff(idx) <= 0):
            raise WireError("topk indices must be strictly increasing")
        vals = pairs["val"].astype(float)
        if not np.all(np.isfinite(vals)):
            raise WireError("topk values contain non-finite entries")
        return TopkPayload(m=h.m, n=h.n, indices=idx, values=vals)

    bits = h.r_or_k
    if not 2 <= bits <= 8:
        raise WireError(f"quant bits must be in 2..8, got {bits}")
    count = h.m * h.n
    _expect_len(buf, 4 + (bits * count + 7) // 8)
    scale = float(np.frombuffer(body[:4], dtype="<f4")[0])
    if not np.isfinite(scale) or scale < 0.0:
        raise WireError(f"invalid quant scale {scale}")
    codes = _unpack_bits(body[4:], bits, count)
    if np.any(codes >= (1 << bits) - 1):
        raise WireError("quant code outside level range")
    return QuantPayload(m=h.m, n=h.n, bits=bits, scale=scale, codes=codes)
