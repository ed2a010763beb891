"""Figures: BD-rate against temporal complexity per framework, RD curves per dataset."""

from __future__ import annotations

import logging
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

log = logging.getLogger(__name__)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_").lower()


def scatter_points(results: dict) -> dict:
    """Framework -> list of (h, bd_rate, budget); entries lacking a metric are dropped."""
    out = {}
    for fw, entries in sorted(results.get("scatter", {}).items()):
        pts = []
        for e in entries:
            if e.get("h") is None or e.get("bd_rate") is None:
                log.warning("%s %s: missing metric, point skipped", fw, e.get("sequence"))
                continue
            pts.append((float(e["h"]), float(e["bd_rate"]), e.get("budget")))
        if pts:
            out[fw] = pts
        else:
            log.warning("%s: no complete points, scatter skipped", fw)
    return out


def emit_plots(results: dict, outdir) -> list[Path]:
    """Write ``scatter_<fw>.png`` and ``rd_<dataset>.png`` files; return their paths."""
    outdir = Path(outdir)
    written = []
    scatter = scatter_points(results)
    rd = {d: c for d, c in sorted(results.get("rd", {}).items()) if c}
    if not scatter and not rd:
        log.warning("nothing to plot")
        return written
    outdir.mkdir(parents=True, exist_ok=True)

    for fw, pts in scatter.items():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for budget in sorted({p[2] for p in pts}, key=lambda b: (b is None, b)):
            sel = [p for p in pts if p[2] == budget]
            ax.scatter([p[0] for p in sel], [p[1] for p in sel], s=18,
                       label=f"budget {budget}" if budget is not None else None)
        ax.axhline(0.0, color="grey", lw=0.8)
        ax.set_xlabel("temporal complexity h")
        ax.set_ylabel("BD-rate of hybrid vs implicit (%)")
        ax.set_title(fw)
        if any(p[2] is not None for p in pts):
            ax.legend(fontsize=7)
        fig.tight_layout()
        path = outdir / f"scatter_{_slug(fw)}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    for dataset, curves in rd.items():
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for variant, pts in sorted(curves.items()):
            pts = sorted(pts)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, lw=1, label=variant)
        ax.set_xlabel("bpp")
        ax.set_ylabel("PSNR-RGB (dB)")
        ax.set_title(dataset)
        ax.legend(fontsize=5, ncol=2)
        fig.tight_layout()
        path = outdir / f"rd_{_slug(dataset)}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
