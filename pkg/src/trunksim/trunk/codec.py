"""Header compression and length-prefix framing for the trunk byte stream.

Compressed packet layouts::

    FULL   00 | ctx | 40-byte header                       (42 bytes)
    DELTA  01 | ctx | mask | one signed byte per mask bit  (3..6 bytes)

Mask bits, emitted in this order:

    0x01 seq     against the prediction previous seq + previous payload length
    0x02 ack     against the previous ack
    0x04 window  against the previous window
    0x08 ip_id   against the previous ip_id
    0x10 length  IP total length against the previous one

Any change outside those fields, a delta outside [-128, 127], or more than
three changed fields falls back to FULL. Steady one-way data (constant
segment size, ip_id stepping by one) therefore costs four bytes.

A frame is a big-endian u16 length followed by the compressed packet.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

HEADER_LEN = 40
FULL = 0x00
DELTA = 0x01
FULL_LEN = 2 + HEADER_LEN
MAX_DELTA_FIELDS = 3

SEQ, ACK, WIN, IPID, LEN = 0x01, 0x02, 0x04, 0x08, 0x10
# (bit, offset, width in bytes)
_FIELDS = ((SEQ, 24, 4), (ACK, 28, 4), (WIN, 34, 2), (IPID, 4, 2), (LEN, 2, 2))
_STATIC = ((0, 2), (6, 24), (32, 34), (36, 40))


class FramingError(ValueError):
    """Compressed stream does not decode; the trunk delivered corrupt bytes."""


@dataclass
class CompressionContext:
    """Per-flow codec state, mirrored at both trunk ends.

    ``last_full_header`` is the complete 40-byte image of the previous header
    seen in this context.
    """

    context_id: int
    last_full_header: bytes | None = None
    established: bool = False

    def __post_init__(self):
        if not 0 <= self.context_id <= 0xFF:
            raise ValueError(f"context id {self.context_id} is not an 8-bit value")


def _field(h: bytes, off: int, width: int) -> int:
    return int.from_bytes(h[off:off + width], "big")


def _predicted(prev: bytes, bit: int, off: int, width: int) -> int:
    v = _field(prev, off, width)
    if bit == SEQ:
        payload = _field(prev, 2, 2) - HEADER_LEN
        v = (v + payload) % (1 << 32)
    return v


def _signed_delta(new: int, ref: int, width: int) -> int:
    mod = 1 << (8 * width)
    half = mod >> 1
    return ((new - ref + half) % mod) - half


def compress_header(ctx: CompressionContext, header: bytes) -> bytes:
    if len(header) != HEADER_LEN:
        raise ValueError(f"header must be {HEADER_LEN} bytes, got {len(header)}")
    prev = ctx.last_full_header
    ctx.last_full_header = bytes(header)
    if ctx.established and prev is not None:
        out = _try_delta(ctx.context_id, prev, header)
        if out is not None:
            return out
    ctx.established = True
    return bytes((FULL, ctx.context_id)) + header


def _try_delta(ctx_id: int, prev: bytes, header: bytes) -> bytes | None:
    for a, b in _STATIC:
        if prev[a:b] != header[a:b]:
            return None
    mask = 0
    deltas = []
    for bit, off, width in _FIELDS:
        new = _field(header, off, width)
        d = _signed_delta(new, _predicted(prev, bit, off, width), width)
        if d:
            if not -128 <= d <= 127 or len(deltas) == MAX_DELTA_FIELDS:
                return None
            mask |= bit
            deltas.append(d & 0xFF)
    return bytes((DELTA, ctx_id, mask, *deltas))


def compressed_header_len(data: bytes) -> int:
    """Length of the compressed header at the start of ``data``."""
    if not data:
        raise FramingError("empty compressed packet")
    if data[0] == FULL:
        return FULL_LEN
    if data[0] == DELTA:
        if len(data) < 3:
            raise FramingError("truncated DELTA header")
        return 3 + bin(data[2] & 0x1F).count("1")
    raise FramingError(f"unknown type tag 0x{data[0]:02x}")


def decompress_header(ctx: CompressionContext, data: bytes) -> bytes:
    """Rebuild the 40-byte header; ``data`` may carry trailing payload."""
    if len(data) < 2:
        raise FramingError("compressed header shorter than two bytes")
    tag, cid = data[0], data[1]
    if cid != ctx.context_id:
        raise FramingError(f"context id {cid} does not match context {ctx.context_id}")
    if tag == FULL:
        if len(data) < FULL_LEN:
            raise FramingError("truncated FULL header")
        header = bytes(data[2:FULL_LEN])
    elif tag == DELTA:
        prev = ctx.last_full_header
        if not ctx.established or prev is None:
            raise FramingError(f"DELTA for context {cid} before any FULL header")
        if len(data) < 3 or data[2] & ~0x1F:
            raise FramingError("bad DELTA mask")
        mask = data[2]
        need = 3 + bin(mask).count("1")
        if len(data) < need:
            raise FramingError("truncated DELTA header")
        h = bytearray(prev)
        pos = 3
        for bit, off, width in _FIELDS:
            ref = _predicted(prev, bit, off, width)
            if mask & bit:
                d = data[pos] - 256 if data[pos] > 127 else data[pos]
                pos += 1
                ref = (ref + d) % (1 << (8 * width))
            h[off:off + width] = ref.to_bytes(width, "big")
        header = bytes(h)
    else:
        raise FramingError(f"unknown type tag 0x{tag:02x}")
    ctx.last_full_header = header
    ctx.established = True
    return header


class HeaderCompressor:
    """Assigns 8-bit context ids to flows, recycling the least recently used."""

    def __init__(self, max_contexts: int = 256):
        if not 1 <= max_contexts <= 256:
            raise ValueError("max_contexts must be in 1..256")
        self.max_contexts = max_contexts
        self.contexts: OrderedDict[object, CompressionContext] = OrderedDict()
        self._free = list(range(max_contexts - 1, -1, -1))
        self.full_sent = 0
        self.delta_sent = 0

    def context_for(self, flow) -> CompressionContext:
        ctx = self.contexts.get(flow)
        if ctx is not None:
            self.contexts.move_to_end(flow)
            return ctx
        if self._free:
            cid = self._free.pop()
        else:
            _, old = self.contexts.popitem(last=False)
            cid = old.context_id
        ctx = self.contexts[flow] = CompressionContext(cid)
        return ctx

    def compress(self, flow, header: bytes) -> bytes:
        out = compress_header(self.context_for(flow), header)
        if out[0] == FULL:
            self.full_sent += 1
        else:
            self.delta_sent += 1
        return out


class HeaderDecompressor:
    def __init__(self):
        self.contexts: dict[int, CompressionContext] = {}

    def decompress(self, data: bytes) -> tuple[bytes, int]:
        """Return ``(header, compressed_length)`` for the packet at the head of ``data``."""
        if len(data) < 2:
            raise FramingError("compressed packet shorter than two bytes")
        cid = data[1]
        ctx = self.contexts.get(cid)
        if ctx is None:
            if data[0] != FULL:
                raise FramingError(f"unknown context id {cid}")
            ctx = self.contexts[cid] = CompressionContext(cid)
        n = compressed_header_len(data)
        if data[0] == FULL:
            # a FULL header (re)binds the id, possibly to a recycled flow
            ctx.established = False
        return decompress_header(ctx, data), n


def frame(compressed_packet: bytes) -> bytes:
    n = len(compressed_packet)
    if not 1 <= n <= 0xFFFF:
        raise ValueError(f"frame payload must be 1..65535 bytes, got {n}")
    return n.to_bytes(2, "big") + compressed_packet


def deframe(stream: bytes) -> tuple[list[bytes], bytes]:
    """Split a byte stream into complete frames plus an incomplete remainder."""
    out = []
    pos = 0
    end = len(stream)
    while end - pos >= 2:
        n = (stream[pos] << 8) | stream[pos + 1]
        if end - pos - 2 < n:
            break
        out.append(bytes(stream[pos + 2:pos + 2 + n]))
        pos += 2 + n
    return out, bytes(stream[pos:])


class Deframer:
    """Incremental :func:`deframe` that keeps the residual between calls."""

    def __init__(self):
        self.residual = b""

    def feed(self, data: bytes) -> list[bytes]:
        frames, self.residual = deframe(self.residual + data if self.residual else data)
        return frames
