"""The learned video codec: backbone networks and per-frame coding pipeline.

Tensors are laid out (B, C, H, W). Frames hold RGB in [0, 1]; motion fields
hold (dx, dy) in pixels. Spatial sizes must be multiples of 64; use
:func:`pad_frame` / :func:`crop_frame` at the edges of the pipeline.
"""

from __future__ import annotations

import collections
import contextlib
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from lvc import entropy
from lvc.buffering import Strategy, TemporalBuffer, init_buffer, update_buffer
from lvc.config import ModelConfig
from lvc.entropy import Origin
from lvc.framework import compose_input, compose_reconstruction, spec_for
from lvc.nets import HyperCodec, PyramidFlow, ResBlock, Warp, act, conv, zero_init

ALIGN = 64


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def pad_frame(x: torch.Tensor, align: int = ALIGN) -> torch.Tensor:
    h, w = x.shape[-2:]
    ph = (-h) % align
    pw = (-w) % align
    if ph == 0 and pw == 0:
        return x
    return F.pad(x, (0, pw, 0, ph), mode="replicate")


def crop_frame(x: torch.Tensor, height: int, width: int) -> torch.Tensor:
    return x[..., :height, :width]


@dataclass
class FrameRecord:
    frame_type: str
    bytes_motion: bytes
    bytes_inter: bytes
    x_hat: torch.Tensor
    bits_motion: float = 0.0
    bits_inter: float = 0.0
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def bits_total(self) -> float:
        return self.bits_motion + self.bits_inter


class VideoCodec(nn.Module):
    """Intra codec plus the inter-frame model for one (framework, strategy, IB).

    Sub-networks a framework does not use are not instantiated. ``trace``
    counts stage invocations; ``force_mask`` pins the mask to a constant.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.fw = spec_for(cfg.framework)
        w = cfg.width
        latent = w
        hyper = w // 2
        self.intra = HyperCodec(3, 3, w, latent, hyper, origin=Origin.INTER)
        self.motion_estimation = PyramidFlow(hidden=max(w // 2, 8))
        self.motion = HyperCodec(2, 2, w, latent, hyper, origin=Origin.MOTION)
        self.adapter_i = conv(3, w, 3)
        self.adapter_p = conv(cfg.buffer_channels, w, 1)
        self.feature_block = ResBlock(w)
        self.warper = Warp()
        if self.fw.uses_condition:
            self.condition_generator = nn.Sequential(conv(w, w), act(), zero_init(conv(w, w)))
        if self.fw.uses_pixel_prediction:
            self.mcnet = nn.Sequential(conv(w, w // 2), act(), zero_init(conv(w // 2, 3)))
        if self.fw.uses_mask:
            self.mask_generator = nn.Sequential(conv(5, w // 2), act(), zero_init(conv(w // 2, 1)))
        self.inter = HyperCodec(3, w, w, latent, hyper, cond_ch=w if self.fw.uses_condition else 0,
                                origin=Origin.INTER)
        self.frame_generator = conv(w, 3)
        if cfg.strategy is not Strategy.EXPLICIT:
            self.implicit_adapter = conv(w, cfg.ib, 1)
        self.trace = collections.Counter()
        self.force_mask: float | None = None

    # ------------------------------------------------------------------ ops

    def estimate_motion(self, x, ref):
        if x.shape != ref.shape:
            raise ValueError(f"frame sizes differ: {tuple(x.shape)} vs {tuple(ref.shape)}")
        self.trace["motion_estimation"] += 1
        return self.motion_estimation(x, ref)

    def code_motion(self, flow):
        """Return (payload, decoded flow, bits)."""
        self.trace["motion_codec"] += 1
        payload, _, f_hat = self.motion.compress(flow)
        return payload, f_hat, 8.0 * len(payload)

    def decode_motion(self, payload, shape):
        self.trace["motion_codec"] += 1
        return self.motion.decompress(payload, shape)[1]

    def extract_reference_features(self, buffer: TemporalBuffer, adapter: str):
        adapter = adapter.upper()
        if adapter == "I":
            if not buffer.fresh:
                raise ValueError("adapter I reads only a buffer holding the intra frame")
            self.trace["adapter_i"] += 1
            feats = self.adapter_i(buffer.explicit_ref)
        elif adapter == "P":
            if buffer.fresh:
                raise ValueError("adapter P needs a buffer produced by a P-frame")
            if self.cfg.strategy is not Strategy.EXPLICIT and buffer.implicit_ref is None:
                raise ValueError("implicit slot is empty")
            stacked = buffer.stacked()
            if stacked.shape[1] != self.cfg.buffer_channels:
                raise ValueError(f"buffer has {stacked.shape[1]} channels, model expects "
                                 f"{self.cfg.buffer_channels}")
            self.trace["adapter_p"] += 1
            feats = self.adapter_p(stacked)
        else:
            raise ValueError(f"unknown adapter {adapter!r}")
        return self.feature_block(feats)

    def warp(self, source, flow):
        self.trace["warp"] += 1
        return self.warper(source, flow)

    def generate_condition(self, warped):
        self.trace["condition_generator"] += 1
        return self.condition_generator(warped)

    def predict_pixel(self, warped):
        self.trace["mcnet"] += 1
        return self.mcnet(warped).clamp(0.0, 1.0)

    def generate_mask(self, flow, pred):
        if flow.shape[-2:] != pred.shape[-2:]:
            raise ValueError("flow and prediction sizes differ")
        if self.force_mask is not None:
            self.trace["mask_forced"] += 1
            return torch.full_like(pred[:, :1], float(self.force_mask))
        self.trace["mask_generator"] += 1
        return torch.sigmoid(self.mask_generator(torch.cat([flow, pred], dim=1)))

    def code_inter(self, signal, cond=None):
        """Return (payload, bits, F_t, g_t)."""
        self.trace["inter_codec"] += 1
        payload, _, feats = self.inter.compress(signal, cond)
        return payload, 8.0 * len(payload), feats, self.generate_frame(feats)

    def decode_inter(self, payload, shape, cond=None):
        self.trace["inter_codec"] += 1
        _, feats = self.inter.decompress(payload, shape, cond)
        return feats, self.generate_frame(feats)

    def generate_frame(self, feats):
        self.trace["frame_generator"] += 1
        return self.frame_generator(feats)

    def make_implicit(self, feats):
        self.trace["implicit_adapter"] += 1
        return self.implicit_adapter(feats)

    # ------------------------------------------------------------ intra

    def code_intra(self, x):
        payload, _, x_hat = self.intra.compress(x)
        return payload, x_hat.clamp(0.0, 1.0), 8.0 * len(payload)

    def decode_intra(self, payload, shape):
        return self.intra.decompress(payload, shape)[1].clamp(0.0, 1.0)

    # ------------------------------------------------------------ shared decoder side

    def _predict(self, buffer: TemporalBuffer, f_hat):
        with _stage("extract_reference_features"):
            feats = self.extract_reference_features(buffer, "I" if buffer.fresh else "P")
        with _stage("warp"):
            warped = self.warp(feats, f_hat)
        cond = pred = mask = None
        if self.fw.uses_condition:
            with _stage("generate_condition"):
                cond = self.generate_condition(warped)
        if self.fw.uses_pixel_prediction:
            with _stage("predict_pixel"):
                pred = self.predict_pixel(warped)
        if self.fw.uses_mask:
            with _stage("generate_mask"):
                mask = self.generate_mask(f_hat, pred)
        return cond, pred, mask

    def _finish(self, g, pred, mask, feats):
        with _stage("compose_reconstruction"):
            x_hat = compose_reconstruction(self.fw, g, pred, mask)
        with _stage("update_buffer"):
            buf = update_buffer(self.cfg.strategy, x_hat, feats, self.cfg.ib,
                                self.make_implicit if self.cfg.strategy is not Strategy.EXPLICIT else None)
        return x_hat, buf

    def reference_for_motion(self, buffer: TemporalBuffer, x_ref=None):
        if x_ref is not None:
            return x_ref
        if buffer.explicit_ref is None:
            raise ValueError("implicit buffers carry no frame; pass the encoder's previous reconstruction")
        return buffer.explicit_ref

    # ------------------------------------------------------------ frame coding

    @torch.no_grad()
    def code_frame(self, x, buffer: TemporalBuffer, is_first_p: bool | None = None, x_ref=None):
        """Encode one P-frame. Returns (FrameRecord, new buffer).

        ``x_ref`` is the encoder's previous reconstruction; motion estimation
        runs only at the encoder, so implicit buffers do not need to hold it.
        """
        if is_first_p is not None and bool(is_first_p) != buffer.fresh:
            raise ValueError("is_first_p disagrees with the buffer state")
        with _stage("estimate_motion"):
            flow = self.estimate_motion(x, self.reference_for_motion(buffer, x_ref))
        with _stage("code_motion"):
            bytes_motion, f_hat, bits_motion = self.code_motion(flow)
        cond, pred, mask = self._predict(buffer, f_hat)
        with _stage("compose_input"):
            signal = compose_input(self.fw, x, pred, mask)
        with _stage("code_inter"):
            bytes_inter, bits_inter, feats, g = self.code_inter(signal, cond)
        x_hat, new_buffer = self._finish(g, pred, mask, feats)
        rec = FrameRecord("P", bytes_motion, bytes_inter, x_hat, bits_motion, bits_inter,
                          extras={"flow": flow, "f_hat": f_hat, "pred": pred, "mask": mask,
                                  "signal": signal, "g": g, "features": feats})
        return rec, new_buffer

    @torch.no_grad()
    def decode_frame(self, bytes_motion: bytes, bytes_inter: bytes, buffer: TemporalBuffer):
        """Decode one P-frame from its payloads and the decoder buffer."""
        ref = buffer.explicit_ref if buffer.explicit_ref is not None else buffer.implicit_ref
        shape = (ref.shape[0], ref.shape[-2], ref.shape[-1])
        with _stage("decode_motion"):
            f_hat = self.decode_motion(bytes_motion, shape)
        cond, pred, mask = self._predict(buffer, f_hat)
        with _stage("decode_inter"):
            feats, g = self.decode_inter(bytes_inter, shape, cond)
        return self._finish(g, pred, mask, feats)

    @torch.no_grad()
    def code_intra_frame(self, x, strategy=None):
        payload, x_hat, bits = self.code_intra(x)
        rec = FrameRecord("I", b"", payload, x_hat, 0.0, bits)
        return rec, init_buffer(strategy or self.cfg.strategy, x_hat)

    @torch.no_grad()
    def decode_intra_frame(self, payload: bytes, shape):
        x_hat = self.decode_intra(payload, shape)
        return x_hat, init_buffer(self.cfg.strategy, x_hat)

    # ------------------------------------------------------------ training path

    def decode_from_latents(self, y_motion, y_inter, buffer: TemporalBuffer):
        """Decoder-side reconstruction from (already quantized) latents."""
        f_hat = self.motion.synthesis(y_motion)
        cond, pred, mask = self._predict(buffer, f_hat)
        feats = self.inter.synthesis(y_inter, cond)
        g = self.generate_frame(feats)
        x_hat, buf = self._finish(g, pred, mask, feats)
        return x_hat, buf, {"f_hat": f_hat, "pred": pred, "mask": mask, "features": feats}

    def forward_p(self, x, buffer: TemporalBuffer, x_ref=None, generator=None):
        """Differentiable P-frame pass with estimated bits.

        Motion and inter latents reach the decoder side only through
        :meth:`decode_from_latents`, which the returned ``y_motion`` /
        ``y_inter`` tensors replay exactly.
        """
        flow = self.estimate_motion(x, self.reference_for_motion(buffer, x_ref))
        m = self.motion(flow, generator=generator)
        f_hat = m["out"]
        cond, pred, mask = self._predict(buffer, f_hat)
        signal = compose_input(self.fw, x, pred, mask)
        i = self.inter(signal, cond, generator=generator)
        feats = i["out"]
        g = self.generate_frame(feats)
        x_hat, buf = self._finish(g, pred, mask, feats)
        return {"x_hat": x_hat, "buffer": buf, "bits_motion": m["bits"], "bits_inter": i["bits"],
                "bits": m["bits"] + i["bits"], "flow": flow, "f_hat": f_hat, "pred": pred,
                "y_motion": m["y_hat"], "y_inter": i["y_hat"]}

    def forward_intra(self, x, generator=None):
        r = self.intra(x, generator=generator)
        return {"x_hat": r["out"].clamp(0.0, 1.0), "bits": r["bits"]}
