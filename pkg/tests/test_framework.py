import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from lvc.framework import SPECS, Framework, compose_input, compose_reconstruction, condition_for, spec_for


def test_spec_flags():
    flags = {fw.name: (s.uses_condition, s.uses_pixel_prediction, s.uses_mask) for fw, s in SPECS.items()}
    assert flags == {"RC": (False, True, False), "CC": (True, False, False),
                     "CRC": (True, True, False), "MCR": (True, True, True)}


def test_enum_values_and_parse():
    assert [int(f) for f in Framework] == [0, 1, 2, 3]
    assert Framework.parse("crc") is Framework.CRC
    assert Framework.parse(3) is Framework.MCR
    with pytest.raises(ValueError):
        Framework.parse("XYZ")


def test_compose_input_examples():
    assert compose_input("RC", 0.6, 0.5) == pytest.approx(0.1)
    assert compose_input("CC", 0.6, None) == 0.6
    assert compose_input("MCR", 0.6, 0.5, 0.5) == pytest.approx(0.35)
    assert compose_input("CRC", 0.6, 0.5) == pytest.approx(0.1)


def test_compose_reconstruction_examples():
    assert compose_reconstruction("MCR", 0.35, 0.5, 0.5) == pytest.approx(0.6)
    assert compose_reconstruction("CC", 0.7) == 0.7
    assert compose_reconstruction("RC", 0.9, 0.5) == 1.0  # clamped
    assert compose_reconstruction("RC", 0.9, 0.5, clamp=False) == pytest.approx(1.4)


def test_missing_or_extra_inputs_rejected():
    with pytest.raises(ValueError):
        compose_input("RC", 0.6)
    with pytest.raises(ValueError):
        compose_input("MCR", 0.6, 0.5)
    with pytest.raises(ValueError):
        compose_input("CRC", 0.6, 0.5, 0.5)
    with pytest.raises(ValueError):
        compose_reconstruction("CRC", 0.6)


def test_condition_for():
    c = torch.ones(1, 4, 2, 2)
    assert condition_for("RC", c) is None
    assert condition_for("CC", c) is c
    assert condition_for("MCR", c) is c


# values on a 1/256 grid make the subtraction and addition exact in float64
grid = st.integers(0, 256).map(lambda k: k / 256.0)


@pytest.mark.parametrize("fw", list(Framework))
@given(x=hnp.arrays(np.float64, (3, 4, 4), elements=grid),
       pred=hnp.arrays(np.float64, (3, 4, 4), elements=grid),
       mask=hnp.arrays(np.float64, (1, 4, 4), elements=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])))
def test_reconstruction_inverts_input_exactly(fw, x, pred, mask):
    s = spec_for(fw)
    p = pred if s.uses_pixel_prediction else None
    m = mask if s.uses_mask else None
    out = compose_reconstruction(fw, compose_input(fw, x, p, m), p, m, clamp=False)
    assert np.array_equal(out, x)


@pytest.mark.parametrize("fw", list(Framework))
@given(seed=st.integers(0, 2**31 - 1))
def test_reconstruction_inverts_input_random(fw, seed):
    g = torch.Generator().manual_seed(seed)
    x, pred = torch.rand(2, 3, 8, 8, generator=g), torch.rand(2, 3, 8, 8, generator=g)
    mask = torch.rand(2, 1, 8, 8, generator=g)
    s = spec_for(fw)
    p = pred if s.uses_pixel_prediction else None
    m = mask if s.uses_mask else None
    out = compose_reconstruction(fw, compose_input(fw, x, p, m), p, m, clamp=False)
    torch.testing.assert_close(out, x, rtol=0, atol=1e-6)


def test_mask_degeneration_is_exact():
    g = torch.Generator().manual_seed(0)
    x, pred = torch.rand(1, 3, 16, 16, generator=g), torch.rand(1, 3, 16, 16, generator=g)
    ones, zeros = torch.ones(1, 1, 16, 16), torch.zeros(1, 1, 16, 16)
    assert torch.equal(compose_input("MCR", x, pred, ones), compose_input("CRC", x, pred))
    assert torch.equal(compose_input("MCR", x, pred, zeros), compose_input("CC", x))
    d = compose_input("CRC", x, pred)
    assert torch.equal(compose_reconstruction("MCR", d, pred, ones), compose_reconstruction("CRC", d, pred))
    assert torch.equal(compose_reconstruction("MCR", d, pred, zeros), compose_reconstruction("CC", d))
