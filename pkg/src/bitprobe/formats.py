"""Binary scheme (``.bps``) and memory (``.bpm``) files.

Both share a 54-byte header: 4-byte magic, a version byte, the kind byte,
then ``m, n, t, s, total_bits, seed`` as unsigned 64-bit little-endian.

Memory payload: the bits packed 8 per byte, bit ``i`` in byte ``i // 8`` at
position ``i % 8``, final byte zero-padded.

Scheme payload: the probe rows the scheme was compiled from, as unsigned
64-bit little-endian values in row-major order.

* ``two``: ``m`` triples ``(i, i0, i1)``.
* ``three``: ``m`` rows of 7 block-relative cells.
* ``nonadaptive``: ``m + n`` rows of ``t`` cells (padding elements included).
* ``adaptive``: ``m + n`` rows of ``t1`` cells, then ``m + n`` rows of
  ``2^t2 - 1`` cells.
* ``charvec``: empty.
* ``trees``: the ``m x (2^t - 1)`` address table, one flag byte (1 if explicit
  leaves follow), then the ``m x 2^t`` leaf bits packed like a memory.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import BitMemory, Kind, Scheme, SchemeParams, build_charvec_scheme
from .errors import CorruptScheme
from .multiprobe import AdaptivePairParams, adaptive_scheme_from_rows, nonadaptive_scheme_from_rows
from .threeprobe import scheme_from_rows
from .twoprobe import scheme_from_triples

VERSION = 1
SCHEME_MAGIC = b"BPS1"
MEMORY_MAGIC = b"BPM1"
_HEADER = struct.Struct("<4sBB6Q")
HEADER_SIZE = _HEADER.size


@dataclass(frozen=True)
class Header:
    magic: bytes
    kind: Kind
    m: int
    n: int
    t: int
    s: int
    total_bits: int
    seed: int

    @classmethod
    def for_params(cls, magic: bytes, p: SchemeParams) -> "Header":
        return cls(magic, p.kind, p.m, p.n, p.t, p.s, p.total_bits, p.seed)

    def pack(self) -> bytes:
        return _HEADER.pack(self.magic, VERSION, int(self.kind), self.m, self.n, self.t, self.s, self.total_bits, self.seed)

    def params(self) -> SchemeParams:
        try:
            return SchemeParams(self.m, self.n, self.t, self.s, self.total_bits, self.kind, self.seed)
        except ValueError as exc:
            raise CorruptScheme(f"inconsistent header: {exc}") from None


def read_header(data: bytes, magic: bytes) -> Header:
    if len(data) < HEADER_SIZE:
        raise CorruptScheme("file shorter than its header")
    got, version, kind, *fields = _HEADER.unpack_from(data)
    if got != magic:
        raise CorruptScheme(f"bad magic {got!r}, expected {magic!r}")
    if version != VERSION:
        raise CorruptScheme(f"unsupported format version {version}")
    try:
        kind = Kind(kind)
    except ValueError:
        raise CorruptScheme(f"unknown kind byte {kind}") from None
    return Header(magic, kind, *fields)


def _u64(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<u8").tobytes()


class _Reader:
    def __init__(self, data: bytes, pos: int):
        self.data, self.pos = data, pos

    def rows(self, count: int, width: int) -> np.ndarray:
        size = 8 * count * width
        chunk = self.data[self.pos:self.pos + size]
        if len(chunk) != size:
            raise CorruptScheme("truncated scheme payload")
        self.pos += size
        return np.frombuffer(chunk, dtype="<u8").astype(np.int64).reshape(count, width)

    def raw(self, size: int) -> bytes:
        chunk = self.data[self.pos:self.pos + size]
        if len(chunk) != size:
            raise CorruptScheme("truncated scheme payload")
        self.pos += size
        return chunk

    def done(self) -> None:
        if self.pos != len(self.data):
            raise CorruptScheme(f"{len(self.data) - self.pos} trailing bytes in scheme file")


# -- memories ------------------------------------------------------------------


def dump_memory(memory: BitMemory, params: SchemeParams) -> bytes:
    if len(memory) != params.total_bits:
        raise ValueError("memory length does not match the scheme")
    return Header.for_params(MEMORY_MAGIC, params).pack() + memory.to_bytes()


def load_memory(data: bytes) -> tuple[BitMemory, SchemeParams]:
    header = read_header(data, MEMORY_MAGIC)
    params = header.params()
    return BitMemory.from_bytes(data[HEADER_SIZE:], params.total_bits), params


# -- schemes -------------------------------------------------------------------


def dump_scheme(scheme: Scheme) -> bytes:
    p = scheme.params
    out = [Header.for_params(SCHEME_MAGIC, p).pack()]
    if p.kind == Kind.TWO_PROBE:
        out.append(_u64(scheme.graph.triples))
    elif p.kind == Kind.THREE_PROBE:
        out.append(_u64(scheme.graph.rows))
    elif p.kind == Kind.NON_ADAPTIVE:
        out.append(_u64(scheme.graph.rows))
    elif p.kind == Kind.ADAPTIVE:
        out.append(_u64(scheme.graph.g1.rows))
        out.append(_u64(scheme.graph.g2.rows))
    elif p.kind == Kind.TREES:
        out.append(_u64(scheme.addresses))
        if scheme.leaves is None:
            out.append(b"\x00")
        else:
            out.append(b"\x01")
            out.append(np.packbits(scheme.leaves.reshape(-1), bitorder="little").tobytes())
    return b"".join(out)


def load_scheme(data: bytes) -> Scheme:
    header = read_header(data, SCHEME_MAGIC)
    p = header.params()
    r = _Reader(data, HEADER_SIZE)
    try:
        if p.kind == Kind.CHARVEC:
            scheme = build_charvec_scheme(p.m, p.n, p.seed)
        elif p.kind == Kind.TWO_PROBE:
            scheme = scheme_from_triples(p.m, p.n, p.s, r.rows(p.m, 3), p.seed)
        elif p.kind == Kind.THREE_PROBE:
            scheme = scheme_from_rows(p.m, p.n, p.s, r.rows(p.m, 7), p.seed)
        elif p.kind == Kind.NON_ADAPTIVE:
            scheme = nonadaptive_scheme_from_rows(p.m, p.n, p.t, p.s, r.rows(p.m + p.n, p.t), p.seed)
        elif p.kind == Kind.ADAPTIVE:
            pair = AdaptivePairParams.for_t(p.t, p.s)
            rows1 = r.rows(p.m + p.n, pair.t1)
            rows2 = r.rows(p.m + p.n, pair.alpha)
            scheme = adaptive_scheme_from_rows(p.m, p.n, p.t, p.s, rows1, rows2, p.seed)
        else:
            width = 2**p.t - 1
            addresses = r.rows(p.m, width)
            flag = r.raw(1)
            leaves = None
            if flag == b"\x01":
                count = p.m * 2**p.t
                packed = r.raw((count + 7) // 8)
                bits = np.unpackbits(np.frombuffer(packed, dtype=np.uint8), bitorder="little")
                if bits[count:].any():
                    raise CorruptScheme("nonzero padding after leaf bits")
                leaves = bits[:count].astype(bool).reshape(p.m, 2**p.t)
            elif flag != b"\x00":
                raise CorruptScheme("bad leaf flag")
            scheme = Scheme(p, addresses, leaves)
    except ValueError as exc:
        raise CorruptScheme(str(exc)) from None
    r.done()
    if scheme.params != p:
        raise CorruptScheme("rebuilt scheme parameters differ from the header")
    return scheme
