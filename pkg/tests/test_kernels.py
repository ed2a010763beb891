import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lvc.kernels import JIT_ENABLED, texture_energy, warp_array
from lvc.kernels.texture import dct_matrix


def test_dct_is_orthonormal():
    d = dct_matrix(32)
    np.testing.assert_allclose(d @ d.T, np.eye(32), atol=1e-12)


def test_texture_energy_of_flat_plane_is_zero():
    e = texture_energy(np.full((64, 96), 77.0))
    assert e.shape == (2, 3)
    np.testing.assert_allclose(e, 0.0, atol=1e-10)


def test_texture_energy_matches_direct_definition():
    rng = np.random.default_rng(0)
    luma = rng.uniform(0, 255, (32, 64))
    d = dct_matrix(32)
    expected = []
    for bx in range(2):
        c = d @ luma[:, 32 * bx:32 * bx + 32] @ d.T
        expected.append((np.abs(c).sum() - abs(c[0, 0])) / (32 * 32 - 1))
    np.testing.assert_allclose(texture_energy(luma)[0], expected, rtol=1e-10)


def test_texture_energy_rejects_small_planes():
    with pytest.raises(ValueError):
        texture_energy(np.zeros((16, 64)))


@pytest.mark.skipif(not JIT_ENABLED, reason="JIT disabled")
def test_texture_paths_agree():
    luma = np.random.default_rng(1).uniform(0, 255, (96, 160))
    np.testing.assert_allclose(texture_energy(luma, use_jit=True), texture_energy(luma, use_jit=False),
                               rtol=1e-10)


def test_warp_zero_flow_is_identity():
    src = np.random.default_rng(2).uniform(size=(4, 9, 11))
    assert np.array_equal(warp_array(src, np.zeros((9, 11, 2))), src)


def test_warp_integer_shift_matches_index_oracle():
    src = np.random.default_rng(3).uniform(size=(2, 7, 10))
    flow = np.zeros((7, 10, 2))
    flow[..., 0] = 1.0
    out = warp_array(src, flow)
    oracle = np.concatenate([src[:, :, 1:], src[:, :, -1:]], axis=2)
    assert np.array_equal(out, oracle)


def test_warp_half_pixel_on_ramp():
    ramp = np.tile(np.arange(12, dtype=np.float64) ** 2, (5, 1))
    flow = np.zeros((5, 12, 2))
    flow[..., 0] = 0.5
    out = warp_array(ramp, flow)
    np.testing.assert_allclose(out[:, :-1], 0.5 * (ramp[:, :-1] + ramp[:, 1:]))


def test_warp_channels_last_and_errors():
    src = np.random.default_rng(4).uniform(size=(6, 8, 3))
    flow = np.random.default_rng(5).normal(size=(6, 8, 2))
    a = warp_array(src, flow, channels_last=True)
    b = warp_array(src.transpose(2, 0, 1), flow).transpose(1, 2, 0)
    np.testing.assert_allclose(a, b)
    bad = flow.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        warp_array(src, bad, channels_last=True)
    with pytest.raises(ValueError):
        warp_array(src, flow[:5], channels_last=True)


@pytest.mark.skipif(not JIT_ENABLED, reason="JIT disabled")
@given(st.integers(0, 2**31 - 1))
def test_warp_paths_agree(seed):
    rng = np.random.default_rng(seed)
    src = rng.uniform(size=(3, 12, 13))
    flow = rng.normal(scale=5, size=(12, 13, 2))
    np.testing.assert_allclose(warp_array(src, flow, use_jit=True), warp_array(src, flow, use_jit=False),
                               atol=1e-12)
