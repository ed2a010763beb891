"""Temporal reference buffers for explicit, implicit and hybrid propagation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import torch


class Strategy(enum.IntEnum):
    EXPLICIT = 0
    IMPLICIT = 1
    HYBRID = 2

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown buffering strategy {value!r}") from None
        return cls(int(value))


def buffer_channel_count(strategy, ib: int | None = None) -> int:
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.EXPLICIT:
        return 3
    if ib is None or ib < 1:
        raise ValueError(f"{strategy.name.lower()} buffering needs IB >= 1")
    return ib if strategy is Strategy.IMPLICIT else 3 + ib


@dataclass
class TemporalBuffer:
    """Decoder-reproducible reference state carried between frames.

    ``fresh`` marks a buffer that holds only a decoded intra frame; the next
    P-frame reads it through the intra adapter.
    """

    strategy: Strategy
    explicit_ref: torch.Tensor | None = None
    implicit_ref: torch.Tensor | None = None
    fresh: bool = False

    def __post_init__(self):
        self.strategy = Strategy.parse(self.strategy)
        if self.fresh:
            if self.explicit_ref is None or self.implicit_ref is not None:
                raise ValueError("a fresh buffer holds exactly the decoded intra frame")
            return
        has_x = self.explicit_ref is not None
        has_f = self.implicit_ref is not None
        want = {Strategy.EXPLICIT: (True, False), Strategy.IMPLICIT: (False, True),
                Strategy.HYBRID: (True, True)}[self.strategy]
        if (has_x, has_f) != want:
            raise ValueError(f"{self.strategy.name.lower()} buffer slots (explicit={has_x}, "
                             f"implicit={has_f}) violate the strategy")

    @property
    def channels(self) -> int:
        n = 0
        if self.explicit_ref is not None:
            n += self.explicit_ref.shape[-3]
        if self.implicit_ref is not None:
            n += self.implicit_ref.shape[-3]
        return n

    def footprint(self) -> int:
        """Stored elements per batch item: channels x H x W."""
        ref = self.explicit_ref if self.explicit_ref is not None else self.implicit_ref
        return self.channels * ref.shape[-2] * ref.shape[-1]

    def stacked(self) -> torch.Tensor:
        """Channel concatenation, explicit slot first."""
        parts = [t for t in (self.explicit_ref, self.implicit_ref) if t is not None]
        return parts[0] if len(parts) == 1 else torch.cat(parts, dim=-3)


def init_buffer(strategy, intra_recon: torch.Tensor) -> TemporalBuffer:
    return TemporalBuffer(Strategy.parse(strategy), explicit_ref=intra_recon, fresh=True)


def update_buffer(strategy, recon: torch.Tensor | None, features: torch.Tensor | None,
                  ib: int | None = None,
                  make_implicit: Callable[[torch.Tensor], torch.Tensor] | None = None) -> TemporalBuffer:
    """Store what the next frame may reference.

    ``make_implicit`` maps decoder features to the IB-channel implicit
    reference; without it ``features`` is stored as given and must already
    have IB channels.
    """
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.EXPLICIT:
        if recon is None:
            raise ValueError("explicit buffering needs the reconstruction")
        return TemporalBuffer(strategy, explicit_ref=recon)
    if features is None:
        raise ValueError(f"{strategy.name.lower()} buffering needs decoder features")
    implicit = make_implicit(features) if make_implicit is not None else features
    if ib is not None and implicit.shape[-3] != ib:
        raise ValueError(f"implicit reference has {implicit.shape[-3]} channels, IB={ib}")
    if strategy is Strategy.IMPLICIT:
        return TemporalBuffer(strategy, implicit_ref=implicit)
    if recon is None:
        raise ValueError("hybrid buffering needs the reconstruction")
    return TemporalBuffer(strategy, explicit_ref=recon, implicit_ref=implicit)
