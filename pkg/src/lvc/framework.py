"""Signal algebra of the four inter-frame coding frameworks.

RC codes ``x - pred``; CC codes ``x`` under a condition; CRC codes
``x - pred`` under a condition; MCR codes ``x - m * pred`` under a condition.
Functions accept torch tensors or numpy arrays (or scalars) and broadcast the
mask over the colour channels.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import torch


class Framework(enum.IntEnum):
    RC = 0
    CC = 1
    CRC = 2
    MCR = 3

    @classmethod
    def parse(cls, value) -> "Framework":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown framework {value!r}") from None
        return cls(int(value))


@dataclass(frozen=True)
class FrameworkSpec:
    id: Framework
    uses_condition: bool
    uses_pixel_prediction: bool
    uses_mask: bool


SPECS = {
    Framework.RC: FrameworkSpec(Framework.RC, False, True, False),
    Framework.CC: FrameworkSpec(Framework.CC, True, False, False),
    Framework.CRC: FrameworkSpec(Framework.CRC, True, True, False),
    Framework.MCR: FrameworkSpec(Framework.MCR, True, True, True),
}


def spec_for(fw) -> FrameworkSpec:
    if isinstance(fw, FrameworkSpec):
        return fw
    return SPECS[Framework.parse(fw)]


def _clamp01(x):
    if isinstance(x, torch.Tensor):
        return x.clamp(0.0, 1.0)
    return np.clip(x, 0.0, 1.0)


def _check(fw: FrameworkSpec, pred, mask):
    if fw.uses_pixel_prediction and pred is None:
        raise ValueError(f"{fw.id.name} needs the pixel-domain prediction")
    if fw.uses_mask and mask is None:
        raise ValueError(f"{fw.id.name} needs a mask")
    if not fw.uses_mask and mask is not None:
        raise ValueError(f"{fw.id.name} takes no mask")


def compose_input(fw, x, pred=None, mask=None):
    """Signal handed to the inter-frame encoder."""
    fw = spec_for(fw)
    _check(fw, pred, mask)
    if fw.id is Framework.CC:
        return x
    if fw.id is Framework.MCR:
        return x - mask * pred
    return x - pred


def compose_reconstruction(fw, decoded, pred=None, mask=None, clamp: bool = True):
    """Invert :func:`compose_input` on the decoded signal; clamps to [0, 1] by default."""
    fw = spec_for(fw)
    _check(fw, pred, mask)
    if fw.id is Framework.CC:
        out = decoded
    elif fw.id is Framework.MCR:
        out = decoded + mask * pred
    else:
        out = decoded + pred
    return _clamp01(out) if clamp else out


def condition_for(fw, condition):
    return condition if spec_for(fw).uses_condition else None
