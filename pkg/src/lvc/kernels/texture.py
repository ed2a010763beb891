"""Block-DCT texture energy of a luma plane."""

import math

import numpy as np

from lvc._jit import JIT_ENABLED, njit


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis, rows indexed by frequency."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    d = np.cos(math.pi * (2 * i + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    d[0] /= math.sqrt(2.0)
    return d


@njit(cache=True)
def _texture_energy_jit(luma, basis):
    n = basis.shape[0]
    by = luma.shape[0] // n
    bx = luma.shape[1] // n
    out = np.empty((by, bx))
    block = np.empty((n, n))
    basis_t = basis.T.copy()
    for j in range(by):
        for i in range(bx):
            for r in range(n):
                for c in range(n):
                    block[r, c] = luma[j * n + r, i * n + c]
            coef = basis @ block @ basis_t
            acc = 0.0
            for r in range(n):
                for c in range(n):
                    acc += abs(coef[r, c])
            acc -= abs(coef[0, 0])
            out[j, i] = acc / (n * n - 1)
    return out


def _texture_energy_np(luma, basis):
    n = basis.shape[0]
    by = luma.shape[0] // n
    bx = luma.shape[1] // n
    blocks = luma[: by * n, : bx * n].reshape(by, n, bx, n)
    coef = np.einsum("kr,yrxc,lc->ykxl", basis, blocks, basis, optimize=True)
    mag = np.abs(coef)
    total = mag.sum(axis=(1, 3)) - mag[:, 0, :, 0]
    return total / (n * n - 1)


def texture_energy(luma: np.ndarray, block: int = 32, use_jit: bool | None = None) -> np.ndarray:
    """Mean |AC coefficient| per ``block``x``block`` tile; partial tiles dropped."""
    luma = np.ascontiguousarray(luma, dtype=np.float64)
    if luma.shape[0] < block or luma.shape[1] < block:
        raise ValueError(f"plane {luma.shape} smaller than one {block}x{block} block")
    basis = dct_matrix(block)
    jit = JIT_ENABLED if use_jit is None else (use_jit and JIT_ENABLED)
    return _texture_energy_jit(luma, basis) if jit else _texture_energy_np(luma, basis)
