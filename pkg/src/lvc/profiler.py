"""Platform-independent complexity accounting: kMACs/pixel, parameters, buffer size.

Only convolutions, warping and correlation are charged. A convolution costs
H_out * W_out * k_h * k_w * C_in * C_out MACs (per group), warping costs 11
MACs per output element and a correlation one MAC per input channel per
output element. Counting runs on the ``meta`` device, so no
arithmetic is executed and any resolution is cheap.
"""

from __future__ import annotations

import copy
import csv
import io
import json
from dataclasses import asdict, dataclass

import torch
from torch import nn

from lvc.codec import ALIGN, VideoCodec
from lvc.nets import Correlation, FactorizedPrior, Warp

HEADLINE_RESOLUTION = (1080, 1920)

_FREE = (nn.LeakyReLU, nn.ReLU, nn.Sigmoid, nn.Identity, nn.PixelShuffle, nn.AvgPool2d, FactorizedPrior)


class UnsupportedLayerError(TypeError):
    pass


@dataclass
class ComplexityReport:
    variant: str
    enc_kmacs_per_pixel: float
    dec_kmacs_per_pixel: float
    model_size_M: float
    buffer_channels: int
    bd_rate: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def csv_row(self) -> list:
        bd = "" if self.bd_rate is None else f"{self.bd_rate:.1f}"
        return [self.variant, bd, f"{self.enc_kmacs_per_pixel:.3f}", f"{self.dec_kmacs_per_pixel:.3f}",
                f"{self.model_size_M:.6f}"]


CSV_COLUMNS = ["variant", "bd_rate", "enc_kmacs_per_pixel", "dec_kmacs_per_pixel", "model_size_M"]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def _padded(size: int) -> int:
    return size + (-size) % ALIGN


class _MacCounter:
    def __init__(self, root: nn.Module):
        self.total = 0
        self.unsupported = []
        charged = (Warp, Correlation)
        self.handles = [m.register_forward_hook(self._hook(name)) for name, m in root.named_modules()
                        if not list(m.children()) or isinstance(m, charged)]

    def _hook(self, name):
        def hook(module, inputs, output):
            if isinstance(module, nn.Conv2d):
                kh, kw = module.kernel_size
                per_out = kh * kw * (module.in_channels // module.groups)
                self.total += output.numel() * per_out
            elif isinstance(module, Warp):
                self.total += Warp.MACS_PER_ELEMENT * output.numel()
            elif isinstance(module, Correlation):
                self.total += inputs[0].shape[1] * output.numel()
            elif not isinstance(module, _FREE):
                self.unsupported.append(f"{name} ({type(module).__name__})")
        return hook

    def close(self):
        for h in self.handles:
            h.remove()
        if self.unsupported:
            raise UnsupportedLayerError("cannot count MACs of: " + ", ".join(sorted(set(self.unsupported))))


def _codec_pass(model: VideoCodec, h: int, w: int, side: str) -> None:
    """Steady-state P-frame pass (adapter P) touching every charged layer once."""
    dev = torch.device("meta")
    x = torch.zeros(1, 3, h, w, device=dev)
    buf = torch.zeros(1, model.cfg.buffer_channels, h, w, device=dev)
    mc, ic = model.motion, model.inter
    lat = torch.zeros(1, mc.latent_ch, h // 4, w // 4, device=dev)
    hyp = torch.zeros(1, mc.hyper_ch, h // 16, w // 16, device=dev)
    if side == "encode":
        flow = model.motion_estimation(x, x)
        lat = mc.g_a(flow)
        hyp = mc.h_a(lat)
    mc.h_s(hyp)
    f_hat = mc.g_s(lat)
    warped = model.warper(model.feature_block(model.adapter_p(buf)), f_hat)
    cond = model.condition_generator(warped) if model.fw.uses_condition else None
    pred = model.mcnet(warped) if model.fw.uses_pixel_prediction else None
    if model.fw.uses_mask:
        model.mask_generator(torch.cat([f_hat, pred], dim=1))
    y = torch.zeros(1, ic.latent_ch, h // 4, w // 4, device=dev)
    z = torch.zeros(1, ic.hyper_ch, h // 16, w // 16, device=dev)
    if side == "encode":
        sig = x if cond is None else torch.cat([x, cond], dim=1)
        y = ic.g_a(sig)
        z = ic.h_a(y)
    ic.h_s(z)
    if cond is not None:
        y = torch.cat([y, ic.cond_down(cond)], dim=1)
    feats = ic.g_s(y)
    model.frame_generator(feats)
    if hasattr(model, "implicit_adapter"):
        model.implicit_adapter(feats)


def count_macs(model: nn.Module, resolution=(256, 256), side: str = "encode") -> float:
    """Thousands of MACs per source pixel.

    For a :class:`VideoCodec` the P-frame pipeline of ``side`` ('encode' or
    'decode') is charged at the padded resolution; any other module is run
    once on an input with the channel count of its first convolution.
    """
    if side not in ("encode", "decode"):
        raise ValueError(f"side must be 'encode' or 'decode', not {side!r}")
    h, w = resolution
    meta = copy.deepcopy(model).to("meta")
    counter = _MacCounter(meta)
    try:
        with torch.no_grad():
            if isinstance(meta, VideoCodec):
                _codec_pass(meta, _padded(h), _padded(w), side)
            else:
                first = next((m for m in meta.modules() if isinstance(m, nn.Conv2d)), None)
                if first is None:
                    raise UnsupportedLayerError(f"{type(model).__name__} has no convolution to size its input")
                meta(torch.zeros(1, first.in_channels, h, w, device="meta"))
    finally:
        counter.close()
    return counter.total / (h * w * 1000.0)


def model_size(model: nn.Module) -> int:
    """Exact parameter count (weights, biases, entropy-model parameters)."""
    return sum(p.numel() for p in model.parameters())


def profile(model: VideoCodec, resolution=HEADLINE_RESOLUTION, bd: float | None = None) -> ComplexityReport:
    return ComplexityReport(
        variant=model.cfg.label,
        enc_kmacs_per_pixel=count_macs(model, resolution, "encode"),
        dec_kmacs_per_pixel=count_macs(model, resolution, "decode"),
        model_size_M=model_size(model) / 1e6,
        buffer_channels=model.cfg.buffer_channels,
        bd_rate=bd,
    )
