"""Learned video coding: conditional/residual inter-frame frameworks with explicit,
implicit and hybrid temporal buffering."""

from lvc.buffering import Strategy, TemporalBuffer
from lvc.codec import VideoCodec
from lvc.config import ModelConfig, set_deterministic
from lvc.framework import Framework

__version__ = "0.1.0"

__all__ = ["Framework", "ModelConfig", "Strategy", "TemporalBuffer", "VideoCodec", "set_deterministic"]
