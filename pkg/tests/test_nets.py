import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from lvc.entropy import DecodeError
from lvc.kernels import warp_array
from lvc.nets import Correlation, FactorizedPrior, HyperCodec, PyramidFlow, Warp, warp


def test_warp_zero_flow_exact():
    src = torch.rand(2, 5, 9, 13)
    assert torch.equal(warp(src, torch.zeros(2, 2, 9, 13)), src)


def test_warp_integer_shift_matches_index_oracle():
    src = torch.rand(1, 3, 8, 10)
    flow = torch.zeros(1, 2, 8, 10)
    flow[:, 0] = 1.0
    oracle = torch.cat([src[..., 1:], src[..., -1:]], dim=-1)
    assert torch.equal(warp(src, flow), oracle)
    flow = torch.zeros(1, 2, 8, 10)
    flow[:, 1] = -2.0
    oracle = torch.cat([src[..., :1, :], src[..., :1, :], src[..., :-2, :]], dim=-2)
    assert torch.equal(warp(src, flow), oracle)


def test_warp_half_pixel_ramp():
    ramp = torch.arange(16, dtype=torch.float64).view(1, 1, 1, 16).expand(1, 1, 4, 16) ** 2
    flow = torch.zeros(1, 2, 4, 16, dtype=torch.float64)
    flow[:, 0] = 0.5
    out = warp(ramp, flow)
    torch.testing.assert_close(out[..., :-1], 0.5 * (ramp[..., :-1] + ramp[..., 1:]))


@given(st.integers(0, 2**31 - 1))
def test_warp_matches_array_reference(seed):
    g = torch.Generator().manual_seed(seed)
    src = torch.rand(1, 3, 11, 12, generator=g, dtype=torch.float64)
    flow = torch.randn(1, 2, 11, 12, generator=g, dtype=torch.float64) * 4
    ref = warp_array(src[0].numpy(), flow[0].permute(1, 2, 0).numpy())
    np.testing.assert_allclose(warp(src, flow)[0].numpy(), ref, atol=1e-12)


def test_warp_module_rejects_bad_flow():
    w = Warp()
    flow = torch.zeros(1, 2, 4, 4)
    flow[0, 0, 1, 1] = float("inf")
    with pytest.raises(ValueError):
        w(torch.rand(1, 3, 4, 4), flow)
    with pytest.raises(ValueError):
        w(torch.rand(1, 3, 4, 4), torch.zeros(1, 2, 4, 5))


def test_correlation_peaks_at_true_displacement():
    g = torch.Generator().manual_seed(0)
    b = torch.rand(1, 3, 16, 16, generator=g)
    a = torch.roll(b, shifts=(0, -1), dims=(2, 3))  # a(p) = b(p + (1, 0))
    cost = Correlation(1)(a, b)[..., 2:-2, 2:-2].mean(dim=(2, 3))[0]
    assert int(cost.argmax()) == 1 * 3 + 2  # dy = 0, dx = +1


def test_flow_net_untrained_is_zero():
    net = PyramidFlow(hidden=8)
    x, ref = torch.rand(1, 3, 64, 64), torch.rand(1, 3, 64, 64)
    flow = net(x, ref)
    assert flow.shape == (1, 2, 64, 64)
    assert not flow.any()


def test_flow_net_learns_global_shift():
    """A briefly trained toy estimator recovers a global integer shift within 0.5 px."""
    from lvc.data import textured_image

    torch.manual_seed(0)
    net = PyramidFlow(hidden=16)
    opt = torch.optim.Adam(net.parameters(), 1e-3)
    rng = np.random.default_rng(0)

    def pair(s):
        img = textured_image(rng, 96, 96)
        ref = img[16:80, 16:80]
        x = img[16 - s[1]:80 - s[1], 16 - s[0]:80 - s[0]]  # x(p) = ref(p - s)
        t = lambda a: torch.from_numpy(np.ascontiguousarray(a.transpose(2, 0, 1))).float()[None]  # noqa: E731
        return t(x), t(ref)

    for _ in range(600):
        xs, rs = zip(*(pair(rng.integers(-3, 4, 2)) for _ in range(2)))
        x, ref = torch.cat(xs), torch.cat(rs)
        loss = ((warp(ref, net(x, ref)) - x) ** 2).mean()
        opt.zero_grad()
        loss.backward()
        opt.step()
    with torch.no_grad():
        for s in [(2, 1), (-1, 2), (3, -2), (0, 0)]:
            x, ref = pair(np.array(s))
            mean_flow = net(x, ref)[0, :, 8:-8, 8:-8].mean(dim=(1, 2)).numpy()
            np.testing.assert_allclose(mean_flow, -np.array(s, dtype=float), atol=0.5)


def test_factorized_prior_is_a_distribution():
    torch.manual_seed(0)
    prior = FactorizedPrior(4)
    z = torch.arange(-200, 201, dtype=torch.float32).view(1, 1, -1, 1).expand(1, 4, -1, 1)
    total = prior.likelihood(z).sum(dim=2)
    # floored bins may each add up to 2**-16
    assert torch.all(total >= 1 - 1e-3)
    assert torch.all(total <= 1 + z.shape[2] * 2.0**-16)
    t = prior.cdf_tables()
    assert t.cdfs.shape[0] == 4 and np.all(np.diff(t.cdfs, axis=1)[:, : t.nbins[0]] >= 1)


@pytest.mark.parametrize("cond_ch", [0, 6])
def test_hyper_codec_round_trip(cond_ch):
    torch.manual_seed(1)
    codec = HyperCodec(3, 5, 8, 8, 4, cond_ch=cond_ch).eval()
    x = torch.rand(2, 3, 64, 64) - 0.5
    cond = torch.rand(2, cond_ch, 64, 64) if cond_ch else None
    with torch.no_grad():
        payload, y_hat, out = codec.compress(x, cond)
        y_dec, out_dec = codec.decompress(payload, (2, 64, 64), cond)
    assert out.shape == (2, 5, 64, 64)
    assert torch.equal(y_hat, y_dec)
    assert torch.equal(out, out_dec)
    with pytest.raises(DecodeError):
        codec.decompress(payload[:-3], (2, 64, 64), cond)


def test_hyper_codec_condition_contract():
    plain = HyperCodec(3, 3, 8, 8, 4)
    conditional = HyperCodec(3, 3, 8, 8, 4, cond_ch=4)
    x = torch.rand(1, 3, 64, 64)
    with pytest.raises(ValueError):
        plain.analysis(x, torch.rand(1, 4, 64, 64))
    with pytest.raises(ValueError):
        conditional.analysis(x)
    with pytest.raises(ValueError):
        conditional.analysis(x, torch.rand(1, 3, 64, 64))


def test_training_path_bits_are_positive_and_finite():
    torch.manual_seed(2)
    codec = HyperCodec(3, 3, 8, 8, 4)
    r = codec(torch.rand(1, 3, 64, 64), generator=torch.Generator().manual_seed(0))
    assert torch.isfinite(r["bits"]) and r["bits"] > 0
    assert torch.equal(r["y_hat"], torch.round(r["y_hat"]))
