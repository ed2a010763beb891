"""Hot numeric kernels (numba, with a plain numpy/Python path)."""

from lvc._jit import JIT_ENABLED
from lvc.kernels.texture import texture_energy
from lvc.kernels.warp import warp_array

__all__ = ["JIT_ENABLED", "texture_energy", "warp_array"]
