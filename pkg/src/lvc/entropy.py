"""Quantization, Gaussian bin likelihoods, rate estimation and lossless coding.

Quantization and likelihoods work on torch tensors so they can sit inside the
training graph. The range coder works on numpy integer codes; its wrappers
turn kernel status codes into :class:`DecodeError`.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np
import torch

from lvc.kernels import rangecoder as rc

SCALE_FLOOR = 0.11
LIKELIHOOD_FLOOR = 2.0 ** -16
CDF_PRECISION = rc.PRECISION

_STREAM_HEADER = struct.Struct("<I")


class DecodeError(ValueError):
    """Raised when a coded stream is truncated, corrupt or inconsistent."""


class Origin(enum.Enum):
    MOTION = "motion"
    INTER = "inter"
    HYPER = "hyper"


@dataclass
class LatentCode:
    values: np.ndarray
    origin: Origin = Origin.INTER

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.size and not np.issubdtype(values.dtype, np.integer):
            if not np.all(np.isfinite(values)) or not np.all(values == np.round(values)):
                raise ValueError("latent code must hold integers")
        self.values = values.astype(np.int64)

    @property
    def shape(self):
        return self.values.shape


@dataclass
class EntropyParams:
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        scale = np.asarray(self.scale, dtype=np.float64)
        if np.any(~(scale > 0)) or not np.all(np.isfinite(self.mean)):
            raise ValueError("entropy params need finite means and positive scales")
        self.scale = np.maximum(scale, SCALE_FLOOR)
        if self.mean.shape != self.scale.shape:
            raise ValueError(f"mean {self.mean.shape} and scale {self.scale.shape} differ")

    @classmethod
    def from_tensors(cls, mean: torch.Tensor, scale: torch.Tensor) -> "EntropyParams":
        return cls(mean.detach().cpu().double().numpy(), scale.detach().cpu().double().numpy())


# --------------------------------------------------------------------------
# quantization and rate


def round_half_away(x: torch.Tensor) -> torch.Tensor:
    return torch.sign(x) * torch.floor(torch.abs(x) + 0.5) + 0.0  # + 0.0 turns -0.0 into 0.0


def quantize(latent, mode: str = "round", generator: torch.Generator | None = None) -> torch.Tensor:
    """Quantize ``latent`` by rounding, additive uniform noise or straight-through rounding."""
    x = torch.as_tensor(latent)
    if not torch.isfinite(x).all():
        raise ValueError("quantize: latent contains non-finite values")
    if mode == "round":
        return round_half_away(x)
    if mode == "noise":
        u = torch.rand(x.shape, generator=generator, dtype=x.dtype, device=x.device) - 0.5
        return x + u
    if mode == "straight_through":
        return x + (round_half_away(x) - x).detach()
    raise ValueError(f"unknown quantization mode {mode!r}")


def _std_cdf(x: torch.Tensor) -> torch.Tensor:
    return 0.5 * torch.erfc(-x * (1.0 / math.sqrt(2.0)))


def gaussian_likelihood(values: torch.Tensor, mean: torch.Tensor, scale: torch.Tensor,
                        floor: bool = True) -> torch.Tensor:
    """Probability mass of the unit bin around ``values`` under N(mean, scale^2)."""
    if values.shape != mean.shape or values.shape != scale.shape:
        raise ValueError(f"shape mismatch: {values.shape}, {mean.shape}, {scale.shape}")
    if (scale <= 0).any():
        raise ValueError("scale must be positive")
    scale = torch.clamp(scale, min=SCALE_FLOOR)
    # evaluate on the lower tail for accuracy
    d = torch.abs(values - mean)
    p = _std_cdf((0.5 - d) / scale) - _std_cdf((-0.5 - d) / scale)
    if floor:
        p = torch.clamp(p, min=LIKELIHOOD_FLOOR)
    return p


def likelihood(code: LatentCode, params: EntropyParams) -> np.ndarray:
    """Per-element bin probabilities of an integer code, floored at 2^-16."""
    if code.shape != params.mean.shape:
        raise ValueError(f"code {code.shape} and params {params.mean.shape} differ")
    if np.any(np.asarray(params.scale) <= 0):
        raise ValueError("scale must be positive")
    p = gaussian_likelihood(torch.from_numpy(code.values.astype(np.float64)),
                            torch.from_numpy(params.mean), torch.from_numpy(params.scale))
    return p.numpy()


def estimate_rate(likelihoods) -> float | torch.Tensor:
    """Total information content in bits. Tensors stay differentiable."""
    if isinstance(likelihoods, torch.Tensor):
        if (likelihoods <= 0).any() or (likelihoods > 1).any():
            raise ValueError("likelihoods must lie in (0, 1]")
        return -torch.log2(likelihoods).sum()
    p = np.asarray(likelihoods, dtype=np.float64)
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("likelihoods must lie in (0, 1]")
    return float(-np.log2(p).sum())


# --------------------------------------------------------------------------
# range coding


def _bypass_bits(symbols: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> int:
    mag = np.where(symbols < lo, lo - 1 - symbols, np.where(symbols > hi, symbols - hi - 1, -1))
    esc = mag[mag >= 0] + 1
    if esc.size == 0:
        return 0
    return int((2 * np.floor(np.log2(esc.astype(np.float64))) + 1).sum())


def _out_buffer(n_symbols: int, bypass_bits: int) -> np.ndarray:
    # every symbol costs at most 16 bits plus a sliver of truncation loss
    return np.zeros(3 * n_symbols + bypass_bits // 8 + 64, dtype=np.uint8)


def _raise_status(status: int):
    if status == rc.ERR_TRUNCATED:
        raise DecodeError("range decode: stream truncated")
    if status == rc.ERR_CORRUPT:
        raise DecodeError("range decode: corrupt stream")
    if status == rc.ERR_TRAILING:
        raise DecodeError("range decode: stream has trailing bytes")


def range_encode(code: LatentCode, params: EntropyParams) -> bytes:
    """Losslessly encode ``code`` under the discretized Gaussian ``params``.

    Layout: u32 symbol count, then the range-coder payload (absent when the
    code is empty).
    """
    if code.shape != params.mean.shape:
        raise ValueError(f"code {code.shape} and params {params.mean.shape} differ")
    symbols = np.ascontiguousarray(code.values.reshape(-1))
    n = symbols.size
    header = _STREAM_HEADER.pack(n)
    if n == 0:
        return header
    mu = np.ascontiguousarray(params.mean.reshape(-1))
    sigma = np.ascontiguousarray(params.scale.reshape(-1))
    radius = np.clip(np.ceil(rc.TAIL_SIGMAS * sigma), 1, rc.MAX_RADIUS).astype(np.int64)
    center = np.sign(mu) * np.floor(np.abs(mu) + 0.5)
    lo = center.astype(np.int64) - radius
    out = _out_buffer(n, _bypass_bits(symbols, lo, lo + 2 * radius))
    size = rc.gaussian_encode_kernel(symbols, mu, sigma, out)
    return header + out[:size].tobytes()


def _read_count(data: bytes, expected: int) -> np.ndarray:
    if len(data) < _STREAM_HEADER.size:
        raise DecodeError("range decode: missing stream header")
    (n,) = _STREAM_HEADER.unpack_from(data)
    if n != expected:
        raise DecodeError(f"range decode: stream holds {n} symbols, expected {expected}")
    return np.frombuffer(data, dtype=np.uint8, offset=_STREAM_HEADER.size)


def range_decode(data: bytes, params: EntropyParams, shape, origin: Origin = Origin.INTER) -> LatentCode:
    shape = tuple(shape)
    n = int(np.prod(shape)) if shape else 1
    if params.mean.size != n:
        raise ValueError(f"params hold {params.mean.size} elements, shape {shape} needs {n}")
    payload = _read_count(data, n)
    symbols = np.zeros(n, dtype=np.int64)
    if n:
        status = rc.gaussian_decode_kernel(
            payload, np.ascontiguousarray(params.mean.reshape(-1)),
            np.ascontiguousarray(params.scale.reshape(-1)), symbols)
        _raise_status(status)
    elif payload.size:
        raise DecodeError("range decode: empty code with payload bytes")
    return LatentCode(symbols.reshape(shape), origin)


@dataclass
class CdfTables:
    """Quantized CDFs for table-driven coding, one row per table index."""

    cdfs: np.ndarray     # int32 [n_tables, max_bins + 1]
    nbins: np.ndarray    # int64 [n_tables], escapes included
    offsets: np.ndarray  # int64 [n_tables], value carried by bin 1

    @classmethod
    def from_cumulative(cls, cum_mass: np.ndarray, offsets: np.ndarray) -> "CdfTables":
        """Build tables from cumulative masses at the ``K + 1`` interior edges
        of ``K`` real bins (first edge = lower tail mass)."""
        cum_mass = np.asarray(cum_mass, dtype=np.float64)
        rows = [rc.quantize_cdf(row) for row in cum_mass]
        nb = cum_mass.shape[1] + 1
        return cls(np.stack(rows).astype(np.int32), np.full(len(rows), nb, dtype=np.int64),
                   np.asarray(offsets, dtype=np.int64))


def table_encode(code: LatentCode, indexes: np.ndarray, tables: CdfTables) -> bytes:
    symbols = np.ascontiguousarray(code.values.reshape(-1))
    idx = np.ascontiguousarray(np.asarray(indexes, dtype=np.int64).reshape(-1))
    if idx.size != symbols.size:
        raise ValueError("one table index per symbol is required")
    n = symbols.size
    header = _STREAM_HEADER.pack(n)
    if n == 0:
        return header
    lo = tables.offsets[idx]
    out = _out_buffer(n, _bypass_bits(symbols, lo, lo + tables.nbins[idx] - 3))
    size = rc.table_encode_kernel(symbols, idx, tables.cdfs, tables.nbins, tables.offsets, out)
    return header + out[:size].tobytes()


def table_decode(data: bytes, indexes: np.ndarray, tables: CdfTables, shape,
                 origin: Origin = Origin.HYPER) -> LatentCode:
    shape = tuple(shape)
    idx = np.ascontiguousarray(np.asarray(indexes, dtype=np.int64).reshape(-1))
    n = idx.size
    payload = _read_count(data, n)
    symbols = np.zeros(n, dtype=np.int64)
    if n:
        status = rc.table_decode_kernel(payload, idx, tables.cdfs, tables.nbins, tables.offsets, symbols)
        _raise_status(status)
    return LatentCode(symbols.reshape(shape), origin)


# --------------------------------------------------------------------------
# chunk framing: [u32 little-endian payload length][payload]

_CHUNK_LEN = struct.Struct("<I")


def pack_chunks(*payloads: bytes) -> bytes:
    return b"".join(_CHUNK_LEN.pack(len(p)) + p for p in payloads)


def unpack_chunks(data: bytes, count: int | None = None) -> list[bytes]:
    chunks = []
    pos = 0
    while pos < len(data):
        if pos + _CHUNK_LEN.size > len(data):
            raise DecodeError("chunk header truncated")
        (size,) = _CHUNK_LEN.unpack_from(data, pos)
        pos += _CHUNK_LEN.size
        if pos + size > len(data):
            raise DecodeError("chunk payload truncated")
        chunks.append(bytes(data[pos:pos + size]))
        pos += size
    if count is not None and len(chunks) != count:
        raise DecodeError(f"expected {count} chunks, found {len(chunks)}")
    return chunks
