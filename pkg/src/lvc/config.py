"""Model configuration and the deterministic arithmetic switch."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

import torch

from lvc.buffering import Strategy, buffer_channel_count
from lvc.framework import Framework

LAMBDAS = (256, 512, 1024, 2048)


@dataclass
class ModelConfig:
    framework: Framework = Framework.MCR
    strategy: Strategy = Strategy.HYBRID
    ib: int | None = 64
    lmbda: float = 1024.0
    width: int = 64

    def __post_init__(self):
        self.framework = Framework.parse(self.framework)
        self.strategy = Strategy.parse(self.strategy)
        if self.strategy is Strategy.EXPLICIT:
            self.ib = None
        elif self.ib is None or int(self.ib) < 1:
            raise ValueError(f"{self.strategy.name.lower()} buffering needs IB >= 1")
        else:
            self.ib = int(self.ib)
        if self.lmbda <= 0:
            raise ValueError("lambda must be positive")
        if self.width < 4 or self.width % 4:
            raise ValueError("width must be a positive multiple of 4")

    @property
    def buffer_channels(self) -> int:
        return buffer_channel_count(self.strategy, self.ib)

    @property
    def lambda_index(self) -> int:
        return LAMBDAS.index(int(self.lmbda)) if self.lmbda in LAMBDAS else 255

    @property
    def label(self) -> str:
        explicit = 0 if self.strategy is Strategy.IMPLICIT else 3
        implicit = self.ib or 0
        return f"{self.framework.name}, {self.strategy.name.capitalize()} ({explicit}+{implicit})"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["framework"] = self.framework.name
        d["strategy"] = self.strategy.name.lower()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def set_deterministic(enabled: bool | None = None) -> bool:
    """Enable deterministic kernels; ``LVC_DETERMINISTIC`` overrides the default.

    Returns the mode in force.
    """
    env = os.environ.get("LVC_DETERMINISTIC")
    if env is not None:
        enabled = env.strip().lower() not in ("0", "false", "no", "off")
    elif enabled is None:
        enabled = True
    torch.use_deterministic_algorithms(enabled)
    torch.backends.cudnn.benchmark = False
    return enabled
