"""Shared test utilities."""

import numpy as np
import torch
from torch import nn

from lvc.codec import VideoCodec
from lvc.config import ModelConfig
from lvc.data import synthetic_clip


def randomize_heads(model: nn.Module, seed: int = 0, scale: float = 0.05) -> nn.Module:
    """Give zero-initialized layers small random weights so every path carries signal."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, nn.Conv2d) and not m.weight.any():
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * scale)
                m.bias.copy_(torch.randn(m.bias.shape, generator=gen) * scale)
    return model


def make_model(framework="MCR", strategy="hybrid", ib=3, width=8, seed=0, randomize=True) -> VideoCodec:
    torch.manual_seed(seed)
    model = VideoCodec(ModelConfig(framework, strategy, ib, 1024.0, width))
    if randomize:
        randomize_heads(model, seed)
    return model.eval()


def clip_tensor(frames=3, size=64, seed=0) -> torch.Tensor:
    """(T, 1, 3, H, W) synthetic clip."""
    arr = synthetic_clip(np.random.default_rng(seed), frames, size, size)
    return torch.from_numpy(arr).permute(0, 3, 1, 2).unsqueeze(1).contiguous()
