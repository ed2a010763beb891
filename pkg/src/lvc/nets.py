"""Network building blocks: convolutions, warping, priors and hyperprior codecs."""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from lvc import entropy
from lvc.entropy import CdfTables, LatentCode, Origin


def conv(cin: int, cout: int, k: int = 3, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, k, stride=stride, padding=k // 2)


def zero_init(layer: nn.Conv2d) -> nn.Conv2d:
    nn.init.zeros_(layer.weight)
    nn.init.zeros_(layer.bias)
    return layer


def act() -> nn.Module:
    return nn.LeakyReLU(0.1)


class Upsample(nn.Sequential):
    """3x3 convolution to 4x channels followed by a 2x pixel shuffle."""

    def __init__(self, cin: int, cout: int):
        super().__init__(conv(cin, 4 * cout), nn.PixelShuffle(2))


class ResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.body = nn.Sequential(conv(ch, ch), act(), conv(ch, ch))

    def forward(self, x):
        return x + self.body(x)


def warp(source: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Backward bilinear warp of (B,C,H,W) by a (B,2,H,W) pixel flow, border replicated.

    Sampling positions are formed in pixel units, so zero and integer flows
    reproduce the source values exactly.
    """
    if source.shape[-2:] != flow.shape[-2:]:
        raise ValueError(f"source {tuple(source.shape)} and flow {tuple(flow.shape)} sizes differ")
    b, c, h, w = source.shape
    gy = torch.arange(h, dtype=flow.dtype, device=flow.device).view(1, h, 1)
    gx = torch.arange(w, dtype=flow.dtype, device=flow.device).view(1, 1, w)
    sx = (gx + flow[:, 0]).clamp(0, w - 1)
    sy = (gy + flow[:, 1]).clamp(0, h - 1)
    x0 = torch.floor(sx).detach()
    y0 = torch.floor(sy).detach()
    ax = (sx - x0).unsqueeze(1)
    ay = (sy - y0).unsqueeze(1)
    x0 = x0.long()
    y0 = y0.long()
    x1 = (x0 + 1).clamp(max=w - 1)
    y1 = (y0 + 1).clamp(max=h - 1)
    flat = source.reshape(b, c, h * w)

    def gather(yy, xx):
        idx = (yy * w + xx).reshape(b, 1, h * w).expand(b, c, h * w)
        return flat.gather(2, idx).reshape(b, c, h, w)

    top = gather(y0, x0) * (1 - ax) + gather(y0, x1) * ax
    bot = gather(y1, x0) * (1 - ax) + gather(y1, x1) * ax
    return top * (1 - ay) + bot * ay


class Warp(nn.Module):
    """Module wrapper so the profiler can see warping."""

    MACS_PER_ELEMENT = 11

    def forward(self, source, flow):
        if flow.device.type != "meta" and not torch.isfinite(flow).all():
            raise ValueError("warp: flow contains non-finite values")
        return warp(source, flow)


class FactorizedPrior(nn.Module):
    """Learned per-channel density for hyper-latents (non-parametric CDF network)."""

    def __init__(self, channels: int, filters=(3, 3, 3), init_scale: float = 10.0, tail: int = 64):
        super().__init__()
        self.channels = channels
        self.tail = tail
        dims = (1,) + tuple(filters) + (1,)
        scale = init_scale ** (1.0 / (len(dims) - 1))
        self.matrices = nn.ParameterList()
        self.biases = nn.ParameterList()
        self.factors = nn.ParameterList()
        for i in range(len(dims) - 1):
            init = math.log(math.expm1(1.0 / scale / dims[i + 1]))
            self.matrices.append(nn.Parameter(torch.full((channels, dims[i + 1], dims[i]), init)))
            self.biases.append(nn.Parameter(torch.rand(channels, dims[i + 1], 1) - 0.5))
            if i < len(dims) - 2:
                self.factors.append(nn.Parameter(torch.zeros(channels, dims[i + 1], 1)))

    def _logits_cumulative(self, x: torch.Tensor) -> torch.Tensor:
        # x: (C, 1, N)
        logits = x
        for i, matrix in enumerate(self.matrices):
            logits = torch.matmul(F.softplus(matrix), logits) + self.biases[i]
            if i < len(self.factors):
                logits = logits + torch.tanh(self.factors[i]) * torch.tanh(logits)
        return logits

    def likelihood(self, z: torch.Tensor) -> torch.Tensor:
        b, c, h, w = z.shape
        v = z.permute(1, 0, 2, 3).reshape(c, 1, -1)
        lower = self._logits_cumulative(v - 0.5)
        upper = self._logits_cumulative(v + 0.5)
        sign = -torch.sign(lower + upper).detach()
        p = torch.abs(torch.sigmoid(sign * upper) - torch.sigmoid(sign * lower))
        p = torch.clamp(p, min=entropy.LIKELIHOOD_FLOOR)
        return p.reshape(c, b, h, w).permute(1, 0, 2, 3)

    @torch.no_grad()
    def cdf_tables(self) -> CdfTables:
        edges = torch.arange(-self.tail, self.tail + 2, dtype=torch.float64) - 0.5
        edges = edges.to(self.matrices[0].dtype).view(1, 1, -1).expand(self.channels, 1, -1)
        cum = torch.sigmoid(self._logits_cumulative(edges)).reshape(self.channels, -1)
        offsets = np.full(self.channels, -self.tail, dtype=np.int64)
        return CdfTables.from_cumulative(cum.double().cpu().numpy(), offsets)


def _channel_indexes(shape) -> np.ndarray:
    b, c, h, w = shape
    return np.broadcast_to(np.arange(c).reshape(1, c, 1, 1), shape)


def _to_tensor(code: LatentCode, like: torch.Tensor | None = None, dtype=torch.float32) -> torch.Tensor:
    t = torch.from_numpy(code.values).to(dtype)
    return t + 0.0


class HyperCodec(nn.Module):
    """Two-stage stride-2 transform codec with a mean-scale hyperprior.

    With ``cond_ch`` > 0 the condition is concatenated to the encoder input
    and, after two stride-2 convolutions, to the decoder's first layer.
    """

    def __init__(self, in_ch: int, out_ch: int, width: int, latent_ch: int, hyper_ch: int,
                 cond_ch: int = 0, origin: Origin = Origin.INTER):
        super().__init__()
        self.latent_ch = latent_ch
        self.hyper_ch = hyper_ch
        self.cond_ch = cond_ch
        self.origin = origin
        # "noise" makes the training path smooth end to end (gradient checks)
        self.recon_quant = "straight_through"
        self.g_a = nn.Sequential(conv(in_ch + cond_ch, width, 3, 2), act(), conv(width, latent_ch, 3, 2))
        self.h_a = nn.Sequential(conv(latent_ch, hyper_ch, 3, 2), act(), conv(hyper_ch, hyper_ch, 3, 2))
        self.h_s = nn.Sequential(Upsample(hyper_ch, hyper_ch), act(), Upsample(hyper_ch, 2 * latent_ch))
        self.prior = FactorizedPrior(hyper_ch)
        if cond_ch:
            self.cond_down = nn.Sequential(conv(cond_ch, width, 3, 2), act(), conv(width, width, 3, 2))
        self.g_s = nn.Sequential(Upsample(latent_ch + (width if cond_ch else 0), width), act(),
                                 Upsample(width, out_ch))

    def _check_cond(self, cond):
        if self.cond_ch and cond is None:
            raise ValueError("this codec is conditional; a condition is required")
        if not self.cond_ch and cond is not None:
            raise ValueError("this codec is unconditional; no condition may be supplied")
        if cond is not None and cond.shape[1] != self.cond_ch:
            raise ValueError(f"condition has {cond.shape[1]} channels, expected {self.cond_ch}")

    def analysis(self, x, cond=None):
        self._check_cond(cond)
        if cond is not None:
            if cond.shape[-2:] != x.shape[-2:]:
                raise ValueError("condition and signal sizes differ")
            x = torch.cat([x, cond], dim=1)
        return self.g_a(x)

    def params(self, z_hat):
        raw = self.h_s(z_hat)
        mean, scale = raw.chunk(2, dim=1)
        return mean, entropy.SCALE_FLOOR + F.softplus(scale)

    def synthesis(self, y_hat, cond=None):
        self._check_cond(cond)
        if cond is not None:
            y_hat = torch.cat([y_hat, self.cond_down(cond)], dim=1)
        return self.g_s(y_hat)

    def latent_shapes(self, batch: int, height: int, width: int):
        return ((batch, self.latent_ch, height // 4, width // 4),
                (batch, self.hyper_ch, height // 16, width // 16))

    # training path ---------------------------------------------------------

    def forward(self, x, cond=None, generator=None):
        """Noise-quantized rate, straight-through reconstruction."""
        y = self.analysis(x, cond)
        z = self.h_a(y)
        z_noisy = entropy.quantize(z, "noise", generator)
        smooth = self.recon_quant == "noise"
        z_hat = z_noisy if smooth else entropy.quantize(z, "straight_through")
        mean, scale = self.params(z_hat)
        y_noisy = entropy.quantize(y, "noise", generator)
        y_hat = y_noisy if smooth else entropy.quantize(y, "straight_through")
        p_y = entropy.gaussian_likelihood(y_noisy, mean, scale)
        p_z = self.prior.likelihood(z_noisy)
        bits = entropy.estimate_rate(p_y) + entropy.estimate_rate(p_z)
        out = self.synthesis(y_hat, cond)
        return {"out": out, "y_hat": y_hat, "bits": bits, "bits_y": entropy.estimate_rate(p_y)}

    # coding path -----------------------------------------------------------

    def compress(self, x, cond=None):
        """Return (payload, y_hat, decoded output); payload = [z chunk][y chunk]."""
        y = self.analysis(x, cond)
        z = self.h_a(y)
        z_hat = entropy.quantize(z, "round") + 0.0
        z_code = LatentCode(z_hat.cpu().numpy(), Origin.HYPER)
        z_bytes = entropy.table_encode(z_code, _channel_indexes(z_hat.shape), self.prior.cdf_tables())
        # resume from exactly the decoder's view of z
        mean, scale = self.params(_to_tensor(z_code, dtype=z.dtype))
        y_hat = entropy.quantize(y, "round") + 0.0
        y_code = LatentCode(y_hat.cpu().numpy(), self.origin)
        y_bytes = entropy.range_encode(y_code, entropy.EntropyParams.from_tensors(mean, scale))
        y_hat = _to_tensor(y_code, dtype=y.dtype)
        out = self.synthesis(y_hat, cond)
        return entropy.pack_chunks(z_bytes, y_bytes), y_hat, out

    def decompress(self, payload: bytes, shape, cond=None, dtype=torch.float32):
        """Decode a payload for an input of spatial ``shape`` = (B, H, W)."""
        y_shape, z_shape = self.latent_shapes(*shape)
        z_bytes, y_bytes = entropy.unpack_chunks(payload, 2)
        z_code = entropy.table_decode(z_bytes, _channel_indexes(z_shape), self.prior.cdf_tables(), z_shape)
        mean, scale = self.params(_to_tensor(z_code, dtype=dtype))
        y_code = entropy.range_decode(y_bytes, entropy.EntropyParams.from_tensors(mean, scale),
                                      y_shape, self.origin)
        y_hat = _to_tensor(y_code, dtype=dtype)
        return y_hat, self.synthesis(y_hat, cond)


class Correlation(nn.Module):
    """Local cost volume: channel-mean products of ``a`` with ``b`` displaced by up to ``radius``.

    Both inputs are made zero-mean per image first. Costs one MAC per input
    channel per output element.
    """

    GAIN = 10.0

    def __init__(self, radius: int = 1):
        super().__init__()
        self.radius = radius

    @property
    def out_channels(self) -> int:
        return (2 * self.radius + 1) ** 2

    def forward(self, a, b):
        r = self.radius
        h, w = a.shape[-2:]
        a = a - a.mean(dim=(2, 3), keepdim=True)
        b = b - b.mean(dim=(2, 3), keepdim=True)
        bp = F.pad(b, (r, r, r, r), mode="replicate")
        cost = [(a * bp[..., dy:dy + h, dx:dx + w]).mean(dim=1, keepdim=True)
                for dy in range(2 * r + 1) for dx in range(2 * r + 1)]
        return self.GAIN * torch.cat(cost, dim=1)


class FlowLevel(nn.Module):
    def __init__(self, hidden: int = 32, radius: int = 1):
        super().__init__()
        self.correlation = Correlation(radius)
        self.body = nn.Sequential(conv(8 + self.correlation.out_channels, hidden), act(),
                                  conv(hidden, hidden), act(), zero_init(conv(hidden, 2)))

    def forward(self, x, warped_ref, flow):
        cost = self.correlation(x, warped_ref)
        return flow + self.body(torch.cat([x, warped_ref, flow, cost], dim=1))


class PyramidFlow(nn.Module):
    """Coarse-to-fine flow estimator over a 3-level average-pooled pyramid."""

    def __init__(self, levels: int = 3, hidden: int = 32):
        super().__init__()
        self.levels = nn.ModuleList(FlowLevel(hidden) for _ in range(levels))
        self.warp = Warp()
        self.pool = nn.AvgPool2d(2)

    def forward(self, x, ref):
        xs, rs = [x], [ref]
        for _ in range(len(self.levels) - 1):
            xs.append(self.pool(xs[-1]))
            rs.append(self.pool(rs[-1]))
        flow = None
        for level, xl, rl in zip(self.levels, reversed(xs), reversed(rs)):
            if flow is None:
                flow = xl.new_zeros(xl.shape[0], 2, *xl.shape[-2:])
            else:
                flow = 2.0 * F.interpolate(flow, scale_factor=2, mode="bilinear", align_corners=False)
            flow = level(xl, self.warp(rl, flow), flow)
        return flow
