import numpy as np
import pytest
import torch

from lvc.config import ModelConfig
from lvc.data import SyntheticClips
from lvc.training import (
    TrainConfig, TrainingDiverged, build_model, load_checkpoint, make_checkpoint, rd_loss, rollout_loss,
    save_checkpoint, smoothed, train, weight_hash,
)

SMALL = ModelConfig(framework="MCR", strategy="hybrid", ib=3, width=8)


def test_rd_loss_examples():
    x = torch.rand(1, 3, 8, 8)
    npix = 64
    assert float(rd_loss(x, x, 0.1 * npix, 2048, npix)) == pytest.approx(0.1)
    y = x + 0.001 ** 0.5
    assert float(rd_loss(x, y, 0.0, 256, npix)) == pytest.approx(0.256, rel=1e-5)
    assert float(rd_loss(x, x, 0.0, 1024, npix)) == 0.0
    with pytest.raises(ValueError):
        rd_loss(x, x[..., :4], 0.0, 1.0, npix)
    with pytest.raises(ValueError):
        rd_loss(x, x, -1.0, 1.0, npix)


def test_config_validation_and_schedule():
    with pytest.raises(ValueError):
        TrainConfig(lmbda=0)
    with pytest.raises(ValueError):
        TrainConfig(rollout=0)
    cfg = TrainConfig(steps=100)
    stages = [cfg.stage_at(s) for s in range(100)]
    assert stages.count(1) == 20 and stages.count(2) == 30 and stages.count(3) == 50
    assert stages == sorted(stages)
    assert cfg.lr_at(0) == pytest.approx(1e-3)
    assert cfg.lr_at(99) == pytest.approx(1e-4)
    lrs = [cfg.lr_at(s) for s in range(100)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))


def test_smoothed():
    assert np.allclose(smoothed([1, 2, 3, 4], 2), [1.5, 2.5, 3.5])
    assert np.allclose(smoothed([5.0], 50), [5.0])


def short_cfg(**kw):
    base = dict(steps=6, batch_size=1, patch_size=32, rollout=2, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def test_same_seed_same_checkpoint():
    data = SyntheticClips(count=4, frames=3, size=32, seed=0)
    a = train(build_model(SMALL, seed=1), short_cfg(), data)
    b = train(build_model(SMALL, seed=1), short_cfg(), data)
    assert [h["loss"] for h in a["history"]] == [h["loss"] for h in b["history"]]
    assert weight_hash(a["state_dict"]) == weight_hash(b["state_dict"])
    assert {h["stage"] for h in a["history"]} == {1, 2, 3}
    assert set(a["history"][0]) >= {"loss", "D", "R", "step", "stage"}


def test_checkpoint_round_trip(tmp_path):
    model = build_model(SMALL, seed=2)
    ckpt = make_checkpoint(model, short_cfg())
    save_checkpoint(ckpt, tmp_path / "m.pt")
    loaded, meta = load_checkpoint(tmp_path / "m.pt")
    assert loaded.cfg == model.cfg
    assert weight_hash(loaded) == weight_hash(model)
    assert meta["seed"] == 3 and meta["train_config"]["rollout"] == 2
    ckpt["version"] = "other/9"
    save_checkpoint(ckpt, tmp_path / "bad.pt")
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(tmp_path / "bad.pt")


def test_weight_hash_sensitivity():
    model = build_model(SMALL)
    h = weight_hash(model)
    with torch.no_grad():
        next(model.parameters()).view(-1)[0] += 1e-6
    assert weight_hash(model) != h


def test_divergence_is_reported():
    model = build_model(SMALL)
    with torch.no_grad():
        next(model.parameters()).fill_(float("nan"))
    with pytest.raises(TrainingDiverged, match="step 0"):
        train(model, short_cfg(), SyntheticClips(count=2, frames=3, size=32))


def test_training_replay_parity_holds():
    train(build_model(SMALL), short_cfg(parity_check=True, steps=4), SyntheticClips(count=2, frames=3, size=32))


def test_dataset_too_short():
    with pytest.raises(ValueError, match="frames"):
        train(build_model(SMALL), short_cfg(rollout=4), SyntheticClips(count=2, frames=3, size=32))


def test_rollout_loss_is_mean_of_frame_terms():
    model = build_model(SMALL)
    clip = torch.rand(3, 1, 3, 32, 32)
    g = torch.Generator().manual_seed(0)
    loss, stats = rollout_loss(model, clip, 512.0, 2, generator=g)
    assert stats["loss"] == pytest.approx(stats["rd"])
    assert stats["rd"] == pytest.approx(512.0 * stats["D"] + stats["R"], rel=1e-5)


def test_short_run_reduces_loss():
    data = SyntheticClips(count=16, frames=3, size=32, seed=0)
    cfg = TrainConfig(steps=120, batch_size=2, patch_size=32, rollout=2, stages=(0.0, 1.0), lr=3e-3)
    ckpt = train(build_model(SMALL), cfg, data)
    losses = [h["loss"] for h in ckpt["history"]]
    s = smoothed(losses, 20)
    assert s[-1] < s[0]
