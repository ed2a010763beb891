"""Rate-distortion training and checkpoints."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from lvc.buffering import TemporalBuffer, init_buffer
from lvc.codec import VideoCodec
from lvc.config import ModelConfig, set_deterministic

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = "lvc-checkpoint/1"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lmbda: float = 1024.0
    steps: int = 500
    batch_size: int = 2
    patch_size: int = 64
    lr: float = 1e-3
    lr_final: float = 1e-4
    seed: int = 0
    rollout: int = 4
    # fractions of ``steps`` spent on motion warm-up and single-frame RD;
    # the rest is multi-frame rollout
    stages: tuple = (0.2, 0.3)
    grad_clip: float = 1.0
    parity_check: bool = False

    def __post_init__(self):
        if self.lmbda <= 0:
            raise ValueError("lambda must be positive")
        if self.rollout < 1:
            raise ValueError("rollout length must be >= 1")
        self.stages = tuple(self.stages)

    def stage_at(self, step: int) -> int:
        warm = int(round(self.stages[0] * self.steps))
        single = int(round(sum(self.stages) * self.steps))
        return 1 if step < warm else 2 if step < single else 3

    def lr_at(self, step: int) -> float:
        # cosine decay from lr to lr_final
        t = step / max(self.steps - 1, 1)
        return self.lr_final + 0.5 * (self.lr - self.lr_final) * (1 + math.cos(math.pi * t))


def rd_loss(x, x_hat, bits, lmbda: float, num_pixels: int):
    """lambda * MSE + bits per pixel."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shapes differ: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    if float(bits) < 0:
        raise ValueError("bits must be non-negative")
    return lmbda * torch.mean((x - x_hat) ** 2) + bits / num_pixels


def build_model(cfg: ModelConfig, seed: int = 0) -> VideoCodec:
    torch.manual_seed(seed)
    return VideoCodec(cfg)


def _draw_batch(dataset, rng: np.random.Generator, batch: int, frames: int, size: int) -> torch.Tensor:
    clips = []
    for _ in range(batch):
        if hasattr(dataset, "sample"):
            clip = dataset.sample(rng)
        else:
            clip = dataset[int(rng.integers(len(dataset)))]
        if clip.shape[0] < frames:
            raise ValueError(f"clip has {clip.shape[0]} frames, need {frames}")
        y = int(rng.integers(clip.shape[1] - size + 1))
        x = int(rng.integers(clip.shape[2] - size + 1))
        clips.append(np.asarray(clip[:frames, y:y + size, x:x + size]))
    arr = np.stack(clips).astype(np.float32)  # B, T, H, W, 3
    return torch.from_numpy(arr).permute(1, 0, 4, 2, 3).contiguous()  # T, B, 3, H, W


def _detach_buffer(buf: TemporalBuffer) -> TemporalBuffer:
    return TemporalBuffer(buf.strategy,
                          None if buf.explicit_ref is None else buf.explicit_ref.detach(),
                          None if buf.implicit_ref is None else buf.implicit_ref.detach(),
                          buf.fresh)


def rollout_loss(model: VideoCodec, clip: torch.Tensor, lmbda: float, p_frames: int,
                 motion_warmup: bool = False, generator=None, parity_check: bool = False):
    """Code ``clip[0]`` as intra and ``p_frames`` P-frames; return (loss, stats).

    The loss is the mean per-frame lambda*D + R. Warm-up adds the distortion of
    the motion-compensated previous reconstruction.
    """
    x0 = clip[0]
    b, _, h, w = x0.shape
    npix = b * h * w
    intra = model.forward_intra(x0, generator)
    d0 = torch.mean((x0 - intra["x_hat"]) ** 2)
    r0 = intra["bits"] / npix
    terms = [lmbda * d0 + r0]
    dists = [d0.detach()]
    rates = [r0.detach()]
    aux = torch.zeros((), dtype=x0.dtype)
    buffer = init_buffer(model.cfg.strategy, intra["x_hat"])
    x_ref = intra["x_hat"]
    for t in range(1, p_frames + 1):
        x = clip[t]
        start = _detach_buffer(buffer) if parity_check else None
        out = model.forward_p(x, buffer, x_ref, generator)
        if parity_check:
            with torch.no_grad():
                replay, _, _ = model.decode_from_latents(out["y_motion"].detach(), out["y_inter"].detach(), start)
            if not torch.equal(replay, out["x_hat"].detach()):
                raise AssertionError(f"decoder replay of frame {t} differs from the training reconstruction")
        d = torch.mean((x - out["x_hat"]) ** 2)
        r = out["bits"] / npix
        terms.append(lmbda * d + r)
        dists.append(d.detach())
        rates.append(r.detach())
        if motion_warmup:
            aux = aux + lmbda * torch.mean((x - model.warper(x_ref, out["f_hat"])) ** 2)
        buffer = out["buffer"]
        x_ref = out["x_hat"]
    rd = torch.stack(terms).mean()
    loss = rd + aux / max(p_frames, 1)
    stats = {"loss": float(loss.detach()), "rd": float(rd.detach()), "D": float(torch.stack(dists).mean()),
             "R": float(torch.stack(rates).mean())}
    return loss, stats


def train(model: VideoCodec, cfg: TrainConfig, dataset, deterministic: bool = True,
          on_step=None) -> dict:
    """Train ``model`` in place on clips from ``dataset`` and return a checkpoint dict.

    Stages: motion warm-up (one P-frame, plus a motion-compensation term),
    single-frame RD, then multi-frame rollout of ``cfg.rollout`` P-frames.
    """
    set_deterministic(deterministic)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    gen = torch.Generator().manual_seed(cfg.seed)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    history = []
    for step in range(cfg.steps):
        stage = cfg.stage_at(step)
        p_frames = cfg.rollout if stage == 3 else 1
        for group in opt.param_groups:
            group["lr"] = cfg.lr_at(step)
        clip = _draw_batch(dataset, rng, cfg.batch_size, p_frames + 1, cfg.patch_size)
        try:
            loss, stats = rollout_loss(model, clip, cfg.lmbda, p_frames, motion_warmup=stage == 1,
                                       generator=gen, parity_check=cfg.parity_check)
        except ValueError as e:
            if "non-finite" not in str(e):
                raise
            raise TrainingDiverged(f"step {step} (stage {stage}): {e}") from e
        if not math.isfinite(stats["loss"]):
            raise TrainingDiverged(f"non-finite loss at step {step} (stage {stage}): {stats}")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        if cfg.grad_clip:
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        opt.step()
        stats.update(step=step, stage=stage)
        history.append(stats)
        if on_step is not None:
            on_step(stats)
        if step % 50 == 0:
            log.info("step %d stage %d loss %.4f D %.5f R %.4f", step, stage, stats["loss"],
                     stats["D"], stats["R"])
    model.eval()
    return make_checkpoint(model, cfg, history)


def smoothed(values, window: int = 50) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    window = max(1, min(window, v.size))
    return np.convolve(v, np.ones(window) / window, mode="valid")


# --------------------------------------------------------------------------
# checkpoints


def weight_hash(model_or_state) -> int:
    """64-bit digest of the weights (names, shapes and raw bytes)."""
    state = model_or_state.state_dict() if hasattr(model_or_state, "state_dict") else model_or_state
    h = hashlib.blake2b(digest_size=8)
    for name in sorted(state):
        t = state[name].detach().cpu().contiguous()
        h.update(name.encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.numpy().tobytes())
    return int.from_bytes(h.digest(), "little")


def make_checkpoint(model: VideoCodec, cfg: TrainConfig | None = None, history=None) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "model_config": model.cfg.to_dict(),
        "train_config": asdict(cfg) if cfg is not None else None,
        "seed": cfg.seed if cfg is not None else None,
        "state_dict": {k: v.detach().clone() for k, v in model.state_dict().items()},
        "history": history or [],
    }


def save_checkpoint(ckpt: dict, path) -> None:
    torch.save(ckpt, path)


def load_checkpoint(path) -> tuple[VideoCodec, dict]:
    ckpt = torch.load(path, map_location="cpu", weights_only=False)
    if ckpt.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {ckpt.get('version')!r}")
    model = VideoCodec(ModelConfig.from_dict(ckpt["model_config"]))
    model.load_state_dict(ckpt["state_dict"])
    model.eval()
    return model, ckpt
