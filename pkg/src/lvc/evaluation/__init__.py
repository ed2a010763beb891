"""Evaluation methodology: colour conversion, PSNR, BD-rate, GOP coding, temporal complexity."""

from lvc.evaluation.color import rgb_to_ycbcr, yuv420_to_rgb
from lvc.evaluation.complexity import temporal_complexity
from lvc.evaluation.io import load_sequence, read_yuv420
from lvc.evaluation.metrics import BDError, BDResult, RDCurve, aggregate_bd, bd_rate, psnr_rgb
from lvc.evaluation.sequence import SequenceResult, decode_sequence, encode_sequence, frame_types

__all__ = [
    "BDError", "BDResult", "RDCurve", "SequenceResult", "aggregate_bd", "bd_rate",
    "decode_sequence", "encode_sequence", "frame_types", "load_sequence", "psnr_rgb",
    "read_yuv420", "rgb_to_ycbcr", "temporal_complexity", "yuv420_to_rgb",
]
