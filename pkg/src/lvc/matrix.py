"""The framework x buffering experiment grid: training, RD evaluation, BD-rate tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from lvc.buffering import Strategy
from lvc.config import LAMBDAS, ModelConfig
from lvc.evaluation.complexity import temporal_complexity
from lvc.evaluation.io import load_sequence
from lvc.evaluation.metrics import BDError, RDCurve, bd_rate
from lvc.framework import Framework

log = logging.getLogger(__name__)

EXPLICIT_CHANNELS = 3


class MissingCheckpoints(FileNotFoundError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing checkpoints (rerun with --train): " + ", ".join(self.missing))


@dataclass(frozen=True, order=True)
class Cell:
    framework: Framework
    strategy: Strategy
    ib: int | None

    def __post_init__(self):
        if self.strategy is Strategy.EXPLICIT and self.ib:
            raise ValueError(f"{self.framework.name}: explicit buffering takes no IB (got {self.ib})")
        if self.strategy is not Strategy.EXPLICIT and not self.ib:
            raise ValueError(f"{self.framework.name}: {self.strategy.name.lower()} buffering needs IB >= 1")

    @classmethod
    def parse(cls, text: str) -> "Cell":
        """``FW-strategy[-IB]``, e.g. ``RC-explicit`` or ``MCR-hybrid-64``."""
        parts = text.strip().split("-")
        if len(parts) not in (2, 3):
            raise ValueError(f"bad cell {text!r}; expected FW-strategy[-IB]")
        ib = int(parts[2]) if len(parts) == 3 else None
        return cls(Framework.parse(parts[0]), Strategy.parse(parts[1]), ib)

    @property
    def key(self) -> str:
        base = f"{self.framework.name}-{self.strategy.name.lower()}"
        return base if self.ib is None else f"{base}-{self.ib}"

    @property
    def budget(self) -> int:
        explicit = 0 if self.strategy is Strategy.IMPLICIT else EXPLICIT_CHANNELS
        return explicit + (self.ib or 0)

    def model_config(self, lmbda: float, width: int) -> ModelConfig:
        return ModelConfig(self.framework, self.strategy, self.ib, float(lmbda), width)

    @property
    def label(self) -> str:
        return self.model_config(LAMBDAS[0], 4).label


@dataclass
class ExperimentMatrix:
    frameworks: list = field(default_factory=lambda: [f.name for f in Framework])
    strategies: list = field(default_factory=lambda: [s.name.lower() for s in Strategy])
    # total reference-channel budgets; implicit uses IB=B, hybrid IB=B-3
    budgets: list = field(default_factory=lambda: [67, 6])
    lambdas: list = field(default_factory=lambda: list(LAMBDAS))
    # dataset name -> list of sequence paths (.yuv, .npy or image folders)
    datasets: dict = field(default_factory=dict)
    output: str = "results"
    seed: int = 0
    anchor: str = "RC-explicit"
    width: int = 64
    cells: list | None = None
    train_steps: int = 500
    train_batch: int = 2
    train_patch: int = 64
    train_data: list = field(default_factory=list)
    num_frames: int = 96
    intra_period: int = 32
    workers: int = 1

    def __post_init__(self):
        if not self.frameworks or not self.strategies or not self.lambdas:
            raise ValueError("frameworks, strategies and lambdas must be non-empty")
        self.frameworks = [Framework.parse(f).name for f in self.frameworks]
        self.strategies = [Strategy.parse(s).name.lower() for s in self.strategies]
        if any(b <= EXPLICIT_CHANNELS for b in self.budgets) and "hybrid" in self.strategies:
            raise ValueError(f"hybrid buffering needs budgets above {EXPLICIT_CHANNELS}")
        if self.cells is not None:
            self.cells = [Cell.parse(c).key for c in self.cells]
        Cell.parse(self.anchor)
        if not isinstance(self.datasets, dict):
            self.datasets = {"default": list(self.datasets)}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentMatrix":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown matrix options: {', '.join(sorted(unknown))}")
        return cls(**d)

    def variants(self) -> list[Cell]:
        if self.cells is not None:
            return sorted({Cell.parse(c) for c in self.cells})
        out = set()
        for fw in self.frameworks:
            for st in map(Strategy.parse, self.strategies):
                if st is Strategy.EXPLICIT:
                    out.add(Cell(Framework[fw], st, None))
                    continue
                for b in self.budgets:
                    ib = b if st is Strategy.IMPLICIT else b - EXPLICIT_CHANNELS
                    out.add(Cell(Framework[fw], st, ib))
        return sorted(out)

    def checkpoint_path(self, cell: Cell, lmbda) -> Path:
        return Path(self.output) / "checkpoints" / f"{cell.key}-l{int(lmbda)}.pt"

    def cell_path(self, cell: Cell) -> Path:
        return Path(self.output) / "cells" / f"{cell.key}.json"


def _train_cell(cfg: ExperimentMatrix, cell: Cell, lmbda) -> None:
    from lvc.data import ClipFolder, SyntheticClips
    from lvc.training import TrainConfig, build_model, save_checkpoint, train

    tcfg = TrainConfig(lmbda=float(lmbda), steps=cfg.train_steps, batch_size=cfg.train_batch,
                       patch_size=cfg.train_patch, seed=cfg.seed)
    frames = tcfg.rollout + 1
    if cfg.train_data:
        data = ClipFolder([load_sequence(p) for p in cfg.train_data], frames, cfg.train_patch)
    else:
        data = SyntheticClips(256, frames, cfg.train_patch, seed=cfg.seed)
    model = build_model(cell.model_config(lmbda, cfg.width), cfg.seed)
    ckpt = train(model, tcfg, data)
    path = cfg.checkpoint_path(cell, lmbda)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(ckpt, path)


def _evaluate_cell(cfg: ExperimentMatrix, cell: Cell) -> dict:
    """RD points of every sequence for one cell (runs in a worker)."""
    import torch

    from lvc.evaluation.sequence import encode_sequence
    from lvc.training import load_checkpoint

    if cfg.workers > 1:
        torch.set_num_threads(1)
    points: dict = {}
    records = []
    for lmbda in cfg.lambdas:
        model, _ = load_checkpoint(cfg.checkpoint_path(cell, lmbda))
        for dataset, paths in sorted(cfg.datasets.items()):
            for path in paths:
                frames = load_sequence(path, cfg.num_frames)
                res = encode_sequence(frames, model, cfg.intra_period, cfg.num_frames)
                seq = f"{dataset}/{Path(path).stem}"
                points.setdefault(seq, []).append([res.bpp, res.psnr])
                records.append({"sequence": seq, "lambda": float(lmbda), "bpp": res.bpp, "psnr": res.psnr,
                                "frames": res.frames_coded, **res.totals()})
    return {"cell": cell.key, "label": cell.label, "records": records,
            "points": {k: sorted(v) for k, v in sorted(points.items())}}


def _bd(anchor_pts, test_pts) -> float | None:
    try:
        return bd_rate(RDCurve(anchor_pts), RDCurve(test_pts)).percent
    except BDError as exc:
        log.warning("BD-rate undefined: %s", exc)
        return None


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def run_matrix(cfg: ExperimentMatrix, train: bool = False) -> dict:
    """Train (optionally) and evaluate every cell, then write results.csv and results.json.

    Cells whose ``cells/<key>.json`` already exists are not re-evaluated.
    """
    out = Path(cfg.output)
    cells = cfg.variants()
    anchor = Cell.parse(cfg.anchor)
    if anchor not in cells:
        cells = sorted(set(cells) | {anchor})
    missing = [(c, lam) for c in cells for lam in cfg.lambdas if not cfg.checkpoint_path(c, lam).exists()]
    if missing and not train:
        raise MissingCheckpoints(cfg.checkpoint_path(c, lam).name for c, lam in missing)
    for cell, lam in missing:
        log.info("training %s at lambda %s", cell.key, lam)
        _train_cell(cfg, cell, lam)

    todo = [c for c in cells if not cfg.cell_path(c).exists()]
    (out / "cells").mkdir(parents=True, exist_ok=True)

    def write(result):  # single writer: only the parent process touches cell files
        cfg.cell_path(Cell.parse(result["cell"])).write_text(json.dumps(result, indent=1, sort_keys=True))

    if cfg.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for result in pool.map(_evaluate_cell, [cfg] * len(todo), todo):
                write(result)
    else:
        for cell in todo:
            write(_evaluate_cell(cfg, cell))

    cell_results = {c.key: json.loads(cfg.cell_path(c).read_text()) for c in cells}
    results = summarize(cfg, cells, anchor, cell_results)
    (out / "results.json").write_text(json.dumps(results, indent=1, sort_keys=True))
    (out / "results.csv").write_text(results_csv(results))
    (out / "rd_points.csv").write_text(points_csv(cells, cell_results))
    return results


def _complexities(cfg: ExperimentMatrix) -> dict:
    h = {}
    for dataset, paths in sorted(cfg.datasets.items()):
        for path in paths:
            frames = load_sequence(path, cfg.num_frames)
            h[f"{dataset}/{Path(path).stem}"] = temporal_complexity(frames) if len(frames) > 1 else 0.0
    return h


def summarize(cfg: ExperimentMatrix, cells, anchor: Cell, cell_results: dict) -> dict:
    anchor_pts = cell_results[anchor.key]["points"]
    rows = []
    for cell in cfg.variants():
        pts = cell_results[cell.key]["points"]
        per_seq = {s: _bd(anchor_pts[s], pts[s]) for s in sorted(pts)}
        row = {"variant": cell.label, "cell": cell.key, "framework": cell.framework.name,
               "strategy": cell.strategy.name.lower(), "ib": cell.ib or 0, "budget": cell.budget}
        for dataset in sorted(cfg.datasets):
            row[f"bd_{dataset}"] = _mean(v for s, v in per_seq.items() if s.split("/")[0] == dataset)
        row["bd_mean"] = _mean(row[f"bd_{d}"] for d in sorted(cfg.datasets))
        row["per_sequence"] = per_seq
        rows.append(row)

    # hybrid against implicit at equal budget, per sequence, for the complexity scatter
    h = _complexities(cfg)
    scatter: dict = {}
    for cell in cells:
        if cell.strategy is not Strategy.HYBRID:
            continue
        ref = Cell(cell.framework, Strategy.IMPLICIT, cell.budget)
        if ref.key not in cell_results:
            continue
        for seq, pts in sorted(cell_results[cell.key]["points"].items()):
            bd = _bd(cell_results[ref.key]["points"][seq], pts)
            scatter.setdefault(cell.framework.name, []).append(
                {"sequence": seq, "h": h.get(seq), "bd_rate": bd, "budget": cell.budget})

    rd: dict = {}
    for cell in cells:
        for seq, pts in cell_results[cell.key]["points"].items():
            dataset = seq.split("/")[0]
            by_lambda = rd.setdefault(dataset, {}).setdefault(cell.label, {})
            for i, p in enumerate(pts):
                by_lambda.setdefault(i, []).append(p)
    rd_curves = {d: {v: [np.mean(pl, axis=0).tolist() for _, pl in sorted(c.items())] for v, c in sorted(vs.items())}
                 for d, vs in sorted(rd.items())}
    return {"anchor": anchor.key, "datasets": sorted(cfg.datasets), "rows": rows, "scatter": scatter,
            "rd": rd_curves, "complexity": h, "config": asdict(cfg)}


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.4f}" if isinstance(v, float) else str(v)


def results_csv(results: dict) -> str:
    cols = ["variant", "cell", "framework", "strategy", "ib", "budget"]
    cols += [f"bd_{d}" for d in results["datasets"]] + ["bd_mean"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in results["rows"]:
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


POINT_COLUMNS = ["sequence", "framework", "strategy", "ib", "lambda", "frames", "bpp", "psnr",
                 "bits_motion", "bits_inter", "bits_intra"]


def points_csv(cells, cell_results: dict) -> str:
    """One row per (sequence, framework, strategy, IB, lambda)."""
    rows = []
    for cell in cells:
        for r in cell_results[cell.key].get("records", []):
            rows.append({**r, "framework": cell.framework.name, "strategy": cell.strategy.name.lower(),
                         "ib": cell.ib or 0})
    rows.sort(key=lambda r: (r["sequence"], r["framework"], r["strategy"], r["ib"], r["lambda"]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POINT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in POINT_COLUMNS])
    return buf.getvalue()
