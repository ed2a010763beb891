"""Sequence coding under the GOP protocol (intra frame every ``intra_period``)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from lvc.bitstream import FRAME_I, FRAME_P, Container, ContainerHeader, FrameChunk
from lvc.codec import VideoCodec, crop_frame, pad_frame
from lvc.evaluation.metrics import psnr_rgb
from lvc.training import weight_hash

DEFAULT_INTRA_PERIOD = 32
DEFAULT_NUM_FRAMES = 96


@dataclass
class FrameStats:
    index: int
    frame_type: str
    bits_motion: float
    bits_inter: float
    psnr: float

    @property
    def bits(self) -> float:
        return self.bits_motion + self.bits_inter

    @property
    def bits_intra(self) -> float:
        return self.bits_inter if self.frame_type == "I" else 0.0


@dataclass
class SequenceResult:
    bitstream: bytes
    frames: list[FrameStats]
    bpp: float
    psnr: float
    width: int
    height: int
    reconstructions: list = field(default_factory=list, repr=False)

    @property
    def frames_coded(self) -> int:
        return len(self.frames)

    @property
    def total_bits(self) -> float:
        return float(sum(f.bits for f in self.frames))

    def totals(self) -> dict:
        return {
            "bits_motion": float(sum(f.bits_motion for f in self.frames)),
            "bits_inter": float(sum(f.bits_inter for f in self.frames if f.frame_type == "P")),
            "bits_intra": float(sum(f.bits_intra for f in self.frames)),
        }


def frame_types(count: int, intra_period: int = DEFAULT_INTRA_PERIOD) -> list[str]:
    if intra_period < 1:
        raise ValueError("intra period must be >= 1")
    return ["I" if i % intra_period == 0 else "P" for i in range(count)]


def to_tensor(frame) -> torch.Tensor:
    if isinstance(frame, torch.Tensor):
        t = frame.float()
        return t if t.dim() == 4 else t.unsqueeze(0)
    arr = np.asarray(frame, dtype=np.float32)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]


def to_array(t: torch.Tensor) -> np.ndarray:
    return t[0].permute(1, 2, 0).cpu().numpy()


@torch.no_grad()
def encode_sequence(frames, model: VideoCodec, intra_period: int = DEFAULT_INTRA_PERIOD,
                    num_frames: int = DEFAULT_NUM_FRAMES, keep_reconstructions: bool = False) -> SequenceResult:
    """Code the first ``num_frames`` frames (fewer if the input is shorter)."""
    frames = list(frames)[:num_frames]
    if not frames:
        raise ValueError("no frames to encode")
    model.eval()
    h, w = to_tensor(frames[0]).shape[-2:]
    cfg = model.cfg
    header = ContainerHeader(int(cfg.framework), int(cfg.strategy), cfg.ib or 0, cfg.lambda_index,
                             w, h, len(frames), intra_period, weight_hash(model))
    container = Container(header)
    stats: list[FrameStats] = []
    recons = []
    buffer = x_ref = None
    for i, (ftype, frame) in enumerate(zip(frame_types(len(frames), intra_period), frames)):
        x = to_tensor(frame)
        if x.shape[-2:] != (h, w):
            raise ValueError(f"frame {i} has size {tuple(x.shape[-2:])}, expected {(h, w)}")
        xp = pad_frame(x)
        if ftype == "I":
            rec, buffer = model.code_intra_frame(xp)
            chunk = FrameChunk(FRAME_I, b"", rec.bytes_inter)
        else:
            rec, buffer = model.code_frame(xp, buffer, x_ref=x_ref)
            chunk = FrameChunk(FRAME_P, rec.bytes_motion, rec.bytes_inter)
        x_ref = rec.x_hat
        container.frames.append(chunk)
        x_hat = crop_frame(rec.x_hat, h, w)
        stats.append(FrameStats(i, ftype, 8.0 * len(chunk.motion), 8.0 * len(chunk.inter),
                                psnr_rgb(to_array(x_hat), to_array(x))))
        if keep_reconstructions:
            recons.append(x_hat)
    total = sum(s.bits for s in stats)
    return SequenceResult(container.to_bytes(), stats, total / (len(stats) * h * w),
                          float(np.mean([s.psnr for s in stats])), w, h, recons)


@torch.no_grad()
def decode_sequence(data: bytes, model: VideoCodec, check_weights: bool = True) -> list[torch.Tensor]:
    """Decode a container produced by :func:`encode_sequence` with the same weights."""
    container = Container.from_bytes(data)
    hdr = container.header
    if check_weights:
        container.check_weights(weight_hash(model))
    if (hdr.framework, hdr.strategy, hdr.ib) != (int(model.cfg.framework), int(model.cfg.strategy),
                                                  model.cfg.ib or 0):
        raise ValueError("container configuration does not match the model")
    model.eval()
    ph = hdr.height + (-hdr.height) % 64
    pw = hdr.width + (-hdr.width) % 64
    out = []
    buffer = None
    for i, chunk in enumerate(container.frames):
        if chunk.frame_type == FRAME_I:
            x_hat, buffer = model.decode_intra_frame(chunk.inter, (1, ph, pw))
        else:
            if buffer is None:
                raise ValueError(f"frame {i}: P-frame before any intra frame")
            x_hat, buffer = model.decode_frame(chunk.motion, chunk.inter, buffer)
        out.append(crop_frame(x_hat, hdr.height, hdr.width))
    return out
