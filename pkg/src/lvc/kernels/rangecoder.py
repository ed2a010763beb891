"""Range coder kernels with 16-bit fixed-point frequency tables.

The coder is the carry-propagating byte-oriented variant (32-bit range,
33-bit low with a pending-byte cache). Two symbol models are supported:

* discretized Gaussian: the integer CDF of every element is computed on the
  fly from its (mean, scale), so no tables are materialized;
* explicit tables: one quantized CDF per table index (used for the
  factorized hyper-prior).

Both models reserve an escape bin on each side of a finite support. Values
outside the support are sent as the escape bin followed by an order-0
Exp-Golomb magnitude in equiprobable bits.

Kernels return a negative status on corrupt or truncated input instead of
raising, so they stay nopython-compatible; the wrappers in
``lvc.entropy`` turn statuses into exceptions.
"""

import math

import numpy as np

from lvc._jit import njit

PRECISION = 16
TOTAL = 1 << PRECISION
HALF = TOTAL >> 1
TOP = 1 << 24
MASK32 = 0xFFFFFFFF

TAIL_SIGMAS = 8.0
MAX_RADIUS = 1024
MAX_EG_LENGTH = 62

OK = 0
ERR_TRUNCATED = -1
ERR_CORRUPT = -2
ERR_TRAILING = -3

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


# --------------------------------------------------------------------------
# byte-level encoder / decoder primitives


@njit(cache=True)
def _shift_low(low, cache, cache_size, out, pos):
    if low < 0xFF000000 or low >= 0x100000000:
        carry = low >> 32
        temp = cache
        while True:
            out[pos] = (temp + carry) & 0xFF
            pos += 1
            temp = 0xFF
            cache_size -= 1
            if cache_size == 0:
                break
        cache = (low >> 24) & 0xFF
    cache_size += 1
    low = (low & 0x00FFFFFF) << 8
    return low, cache, cache_size, pos


@njit(cache=True)
def _encode(low, rng, cache, cache_size, out, pos, start, freq):
    r = rng >> PRECISION
    low += start * r
    rng = r * freq
    while rng < TOP:
        rng = (rng << 8) & MASK32
        low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
    return low, rng, cache, cache_size, pos


@njit(cache=True)
def _flush(low, cache, cache_size, out, pos):
    for _ in range(5):
        low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
    return pos


@njit(cache=True)
def _encode_eg(low, rng, cache, cache_size, out, pos, mag):
    n = mag + 1
    length = 0
    while (n >> (length + 1)) > 0:
        length += 1
    for _ in range(length):
        low, rng, cache, cache_size, pos = _encode(
            low, rng, cache, cache_size, out, pos, HALF, HALF)
    low, rng, cache, cache_size, pos = _encode(
        low, rng, cache, cache_size, out, pos, 0, HALF)
    for i in range(length - 1, -1, -1):
        bit = (n >> i) & 1
        low, rng, cache, cache_size, pos = _encode(
            low, rng, cache, cache_size, out, pos, bit * HALF, HALF)
    return low, rng, cache, cache_size, pos


# Decoder state is (code, rng, pos, status); a nonzero status sticks.


@njit(cache=True)
def _dec_init(data):
    code = 0
    n = data.shape[0]
    if n < 5:
        return 0, MASK32, n, ERR_TRUNCATED
    for i in range(5):
        code = ((code << 8) | int(data[i])) & MASK32
    return code, MASK32, 5, OK


@njit(cache=True)
def _dec_target(code, rng):
    r = rng >> PRECISION
    return code // r, r


@njit(cache=True)
def _dec_consume(code, rng, pos, status, data, r, start, freq):
    code -= start * r
    rng = r * freq
    n = data.shape[0]
    while rng < TOP:
        if pos >= n:
            return code, rng, pos, ERR_TRUNCATED
        code = ((code << 8) | int(data[pos])) & MASK32
        rng = (rng << 8) & MASK32
        pos += 1
    return code, rng, pos, status


@njit(cache=True)
def _decode_bit(code, rng, pos, status, data):
    target, r = _dec_target(code, rng)
    if target >= TOTAL:
        return 0, code, rng, pos, ERR_CORRUPT
    bit = 1 if target >= HALF else 0
    code, rng, pos, status = _dec_consume(code, rng, pos, status, data, r, bit * HALF, HALF)
    return bit, code, rng, pos, status


@njit(cache=True)
def _decode_eg(code, rng, pos, status, data):
    length = 0
    while True:
        bit, code, rng, pos, status = _decode_bit(code, rng, pos, status, data)
        if status != OK:
            return 0, code, rng, pos, status
        if bit == 0:
            break
        length += 1
        if length > MAX_EG_LENGTH:
            return 0, code, rng, pos, ERR_CORRUPT
    n = 1
    for _ in range(length):
        bit, code, rng, pos, status = _decode_bit(code, rng, pos, status, data)
        if status != OK:
            return 0, code, rng, pos, status
        n = (n << 1) | bit
    return n - 1, code, rng, pos, status


# --------------------------------------------------------------------------
# discretized Gaussian model


@njit(cache=True)
def round_half_away(x):
    if x >= 0.0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))


@njit(cache=True)
def gaussian_support(mu, sigma):
    """Return (first real value, number of bins incl. the two escapes)."""
    radius = int(math.ceil(TAIL_SIGMAS * sigma))
    if radius < 1:
        radius = 1
    if radius > MAX_RADIUS:
        radius = MAX_RADIUS
    center = round_half_away(mu)
    return center - radius, 2 * radius + 3


@njit(cache=True)
def gaussian_bound(j, nbins, lo, mu, sigma):
    """Cumulative frequency at bin boundary ``j`` (0..nbins)."""
    if j <= 0:
        return 0
    if j >= nbins:
        return TOTAL
    edge = lo - 0.5 + (j - 1)
    z = (edge - mu) / sigma
    cdf = 0.5 * math.erfc(-z * _INV_SQRT2)
    return int(math.floor(cdf * (TOTAL - nbins))) + j


@njit(cache=True)
def gaussian_encode_kernel(symbols, mu, sigma, out):
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1
    pos = 0
    for i in range(symbols.shape[0]):
        m = mu[i]
        s = sigma[i]
        v = int(symbols[i])
        lo, nb = gaussian_support(m, s)
        hi = lo + nb - 3
        if v < lo:
            k = 0
        elif v > hi:
            k = nb - 1
        else:
            k = v - lo + 1
        start = gaussian_bound(k, nb, lo, m, s)
        stop = gaussian_bound(k + 1, nb, lo, m, s)
        low, rng, cache, cache_size, pos = _encode(
            low, rng, cache, cache_size, out, pos, start, stop - start)
        if k == 0:
            low, rng, cache, cache_size, pos = _encode_eg(
                low, rng, cache, cache_size, out, pos, lo - 1 - v)
        elif k == nb - 1:
            low, rng, cache, cache_size, pos = _encode_eg(
                low, rng, cache, cache_size, out, pos, v - hi - 1)
    return _flush(low, cache, cache_size, out, pos)


@njit(cache=True)
def gaussian_decode_kernel(data, mu, sigma, symbols):
    code, rng, pos, status = _dec_init(data)
    if status != OK:
        return status
    for i in range(symbols.shape[0]):
        m = mu[i]
        s = sigma[i]
        lo, nb = gaussian_support(m, s)
        target, r = _dec_target(code, rng)
        if target >= TOTAL:
            return ERR_CORRUPT
        a = 0
        b = nb
        while b - a > 1:
            mid = (a + b) >> 1
            if gaussian_bound(mid, nb, lo, m, s) <= target:
                a = mid
            else:
                b = mid
        start = gaussian_bound(a, nb, lo, m, s)
        stop = gaussian_bound(a + 1, nb, lo, m, s)
        code, rng, pos, status = _dec_consume(code, rng, pos, status, data, r, start, stop - start)
        if status != OK:
            return status
        if a == 0:
            mag, code, rng, pos, status = _decode_eg(code, rng, pos, status, data)
            symbols[i] = lo - 1 - mag
        elif a == nb - 1:
            mag, code, rng, pos, status = _decode_eg(code, rng, pos, status, data)
            symbols[i] = lo + nb - 2 + mag
        else:
            symbols[i] = lo + a - 1
        if status != OK:
            return status
    if pos != data.shape[0]:
        return ERR_TRAILING
    return OK


# --------------------------------------------------------------------------
# explicit-table model
#
# cdfs[t, 0..nbins[t]] holds boundaries of table t; bin 0 and bin nbins-1 are
# escapes and offsets[t] is the value carried by bin 1.


@njit(cache=True)
def table_encode_kernel(symbols, indexes, cdfs, nbins, offsets, out):
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1
    pos = 0
    for i in range(symbols.shape[0]):
        t = indexes[i]
        nb = nbins[t]
        lo = offsets[t]
        hi = lo + nb - 3
        v = int(symbols[i])
        if v < lo:
            k = 0
        elif v > hi:
            k = nb - 1
        else:
            k = v - lo + 1
        start = int(cdfs[t, k])
        stop = int(cdfs[t, k + 1])
        low, rng, cache, cache_size, pos = _encode(
            low, rng, cache, cache_size, out, pos, start, stop - start)
        if k == 0:
            low, rng, cache, cache_size, pos = _encode_eg(
                low, rng, cache, cache_size, out, pos, lo - 1 - v)
        elif k == nb - 1:
            low, rng, cache, cache_size, pos = _encode_eg(
                low, rng, cache, cache_size, out, pos, v - hi - 1)
    return _flush(low, cache, cache_size, out, pos)


@njit(cache=True)
def table_decode_kernel(data, indexes, cdfs, nbins, offsets, symbols):
    code, rng, pos, status = _dec_init(data)
    if status != OK:
        return status
    for i in range(symbols.shape[0]):
        t = indexes[i]
        nb = nbins[t]
        lo = offsets[t]
        target, r = _dec_target(code, rng)
        if target >= TOTAL:
            return ERR_CORRUPT
        a = 0
        b = nb
        while b - a > 1:
            mid = (a + b) >> 1
            if cdfs[t, mid] <= target:
                a = mid
            else:
                b = mid
        start = int(cdfs[t, a])
        stop = int(cdfs[t, a + 1])
        code, rng, pos, status = _dec_consume(code, rng, pos, status, data, r, start, stop - start)
        if status != OK:
            return status
        if a == 0:
            mag, code, rng, pos, status = _decode_eg(code, rng, pos, status, data)
            symbols[i] = lo - 1 - mag
        elif a == nb - 1:
            mag, code, rng, pos, status = _decode_eg(code, rng, pos, status, data)
            symbols[i] = lo + nb - 2 + mag
        else:
            symbols[i] = lo + a - 1
        if status != OK:
            return status
    if pos != data.shape[0]:
        return ERR_TRAILING
    return OK


def quantize_cdf(cum_mass: np.ndarray) -> np.ndarray:
    """Map cumulative masses at interior bin boundaries to integer CDFs.

    ``cum_mass`` has ``nbins - 1`` non-decreasing entries in [0, 1]. Every bin
    receives at least one count, matching the Gaussian path's rule.
    """
    cum_mass = np.clip(np.maximum.accumulate(np.asarray(cum_mass, dtype=np.float64)), 0.0, 1.0)
    nbins = cum_mass.shape[0] + 1
    inner = np.floor(cum_mass * (TOTAL - nbins)).astype(np.int64) + np.arange(1, nbins)
    return np.concatenate([[0], inner, [TOTAL]]).astype(np.int32)
