"""Sequence container: fixed header, weight hash, then per-frame chunks.

Header (little-endian): magic ``LVCM``, version u8, framework u8,
strategy u8, IB u16, lambda index u8, width u16, height u16, frame count u16,
intra period u16, followed by the 64-bit weight hash of the encoding model.
Each frame is ``type u8`` (0=I, 1=P), then the motion chunk and the inter
chunk, each framed as ``[u32 length][payload]``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from lvc.entropy import DecodeError

MAGIC = b"LVCM"
VERSION = 1
_FIELDS = struct.Struct("<4sBBBHBHHHH")
_HASH = struct.Struct("<Q")
HEADER_SIZE = _FIELDS.size + _HASH.size
_LEN = struct.Struct("<I")

FRAME_I = 0
FRAME_P = 1


class IntegrityError(DecodeError):
    """Container does not match the decoding model."""


@dataclass
class ContainerHeader:
    framework: int
    strategy: int
    ib: int
    lambda_index: int
    width: int
    height: int
    frame_count: int
    intra_period: int
    weight_hash: int = 0
    version: int = VERSION

    def pack(self) -> bytes:
        return _FIELDS.pack(MAGIC, self.version, self.framework, self.strategy, self.ib,
                            self.lambda_index, self.width, self.height, self.frame_count,
                            self.intra_period) + _HASH.pack(self.weight_hash)

    @classmethod
    def unpack(cls, data: bytes) -> "ContainerHeader":
        if len(data) < HEADER_SIZE:
            raise DecodeError("container header truncated")
        magic, version, fw, st, ib, li, w, h, n, period = _FIELDS.unpack_from(data)
        if magic != MAGIC:
            raise DecodeError(f"bad magic {magic!r}")
        if version != VERSION:
            raise DecodeError(f"unsupported container version {version}")
        (digest,) = _HASH.unpack_from(data, _FIELDS.size)
        return cls(fw, st, ib, li, w, h, n, period, digest, version)


@dataclass
class FrameChunk:
    frame_type: int
    motion: bytes
    inter: bytes

    @property
    def bits(self) -> int:
        return 8 * (len(self.motion) + len(self.inter))


@dataclass
class Container:
    header: ContainerHeader
    frames: list[FrameChunk] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        if len(self.frames) != self.header.frame_count:
            raise ValueError("frame count does not match the header")
        out = [self.header.pack()]
        for f in self.frames:
            out.append(bytes([f.frame_type]))
            out.append(_LEN.pack(len(f.motion)) + f.motion)
            out.append(_LEN.pack(len(f.inter)) + f.inter)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Container":
        header = ContainerHeader.unpack(data)
        pos = HEADER_SIZE
        frames = []
        for i in range(header.frame_count):
            if pos >= len(data):
                raise DecodeError(f"container truncated before frame {i}")
            ftype = data[pos]
            if ftype not in (FRAME_I, FRAME_P):
                raise DecodeError(f"frame {i}: unknown type {ftype}")
            pos += 1
            chunks = []
            for _ in range(2):
                if pos + _LEN.size > len(data):
                    raise DecodeError(f"frame {i}: chunk header truncated")
                (n,) = _LEN.unpack_from(data, pos)
                pos += _LEN.size
                if pos + n > len(data):
                    raise DecodeError(f"frame {i}: chunk payload truncated")
                chunks.append(bytes(data[pos:pos + n]))
                pos += n
            frames.append(FrameChunk(ftype, *chunks))
        if pos != len(data):
            raise DecodeError("trailing bytes after the last frame")
        return cls(header, frames)

    def check_weights(self, weight_hash: int) -> None:
        if self.header.weight_hash != weight_hash:
            raise IntegrityError(f"container was written with weights {self.header.weight_hash:016x}, "
                                 f"decoder has {weight_hash:016x}")
