"""Command-line entry point: ``lvc <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 decode-integrity failure.
Options may also come from a YAML file given with ``--config``; flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTEGRITY = 0, 1, 2, 3

log = logging.getLogger("lvc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _load_config(path) -> dict:
    if not path:
        return {}
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _resolve(args, defaults: dict) -> argparse.Namespace:
    """Merge: explicit flag > config file > built-in default."""
    cfg = _load_config(getattr(args, "config", None))
    args.given = {k for k in defaults if getattr(args, k, None) is not None or k in cfg}
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, cfg.get(key, default))
    return args


def _model_config(a, lmbda: float):
    from lvc.config import ModelConfig

    if str(a.strategy).lower() == "explicit" and "ib" in a.given and a.ib:
        raise UsageError(f"explicit buffering takes no IB (got {a.ib})")
    return ModelConfig(a.framework, a.strategy, a.ib, float(lmbda), int(a.width))


def _emit(obj, path=None):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# --------------------------------------------------------------------------
# subcommands


TRAIN_DEFAULTS = {"framework": "MCR", "strategy": "hybrid", "ib": 64, "lmbda": 1024.0, "width": 64,
                  "steps": 500, "batch_size": 2, "patch_size": 64, "seed": 0, "data": None,
                  "output": "checkpoint.pt", "lr": 1e-3, "lr_final": 1e-4, "rollout": 4}


def cmd_train(args) -> int:
    from lvc.data import ClipFolder, SyntheticClips
    from lvc.evaluation.io import load_sequence
    from lvc.training import TrainConfig, build_model, save_checkpoint, train

    a = _resolve(args, TRAIN_DEFAULTS)
    mcfg = _model_config(a, a.lmbda)
    tcfg = TrainConfig(lmbda=float(a.lmbda), steps=int(a.steps), batch_size=int(a.batch_size),
                       patch_size=int(a.patch_size), seed=int(a.seed), lr=float(a.lr),
                       lr_final=float(a.lr_final), rollout=int(a.rollout))
    frames = tcfg.rollout + 1
    if a.data:
        paths = a.data if isinstance(a.data, list) else [a.data]
        data = ClipFolder([load_sequence(p) for p in paths], frames, tcfg.patch_size)
    else:
        data = SyntheticClips(256, frames, tcfg.patch_size, seed=tcfg.seed)
    model = build_model(mcfg, tcfg.seed)
    ckpt = train(model, tcfg, data)
    save_checkpoint(ckpt, a.output)
    last = ckpt["history"][-1] if ckpt["history"] else {}
    _emit({"checkpoint": str(a.output), "variant": mcfg.label, "final": last})
    return EXIT_OK


def cmd_encode(args) -> int:
    from lvc.evaluation.io import load_sequence
    from lvc.evaluation.sequence import encode_sequence
    from lvc.training import load_checkpoint

    a = _resolve(args, {"frames": 96, "intra_period": 32, "report": None})
    model, _ = load_checkpoint(a.checkpoint)
    frames = load_sequence(a.input, int(a.frames))
    res = encode_sequence(frames, model, int(a.intra_period), int(a.frames))
    Path(a.output).write_bytes(res.bitstream)
    _emit({"bitstream": str(a.output), "bytes": len(res.bitstream), "frames": res.frames_coded,
           "bpp": res.bpp, "psnr": res.psnr, **res.totals(),
           "per_frame": [{"index": f.index, "type": f.frame_type, "bits": f.bits, "psnr": f.psnr}
                         for f in res.frames]}, a.report)
    return EXIT_OK


def cmd_decode(args) -> int:
    from lvc.evaluation.io import load_sequence
    from lvc.evaluation.metrics import psnr_rgb
    from lvc.evaluation.sequence import decode_sequence, to_array, to_tensor
    from lvc.training import load_checkpoint

    model, _ = load_checkpoint(args.checkpoint)
    decoded = decode_sequence(Path(args.input).read_bytes(), model)
    frames = np.stack([to_array(x) for x in decoded]).astype(np.float32)
    report = {"frames": len(decoded)}
    if args.output:
        np.save(args.output, frames)
        report["output"] = str(args.output)
    if args.reference:
        ref = load_sequence(args.reference, len(decoded))
        if len(ref) < len(decoded):
            raise ValueError(f"reference has {len(ref)} frames, bitstream {len(decoded)}")
        psnrs = [psnr_rgb(to_array(x), to_array(to_tensor(r))) for x, r in zip(decoded, ref)]
        report["psnr"] = float(np.mean(psnrs))
        report["per_frame_psnr"] = psnrs
    _emit(report, args.report)
    return EXIT_OK


def cmd_eval(args) -> int:
    from lvc.evaluation.complexity import temporal_complexity
    from lvc.evaluation.io import load_sequence
    from lvc.evaluation.sequence import encode_sequence
    from lvc.training import load_checkpoint

    a = _resolve(args, {"frames": 96, "intra_period": 32, "report": None})
    seqs = {p: load_sequence(p, int(a.frames)) for p in a.input}
    out = {"sequences": {}}
    for p, frames in seqs.items():
        pts = []
        for ck in a.checkpoint:
            model, _ = load_checkpoint(ck)
            res = encode_sequence(frames, model, int(a.intra_period), int(a.frames))
            pts.append({"checkpoint": ck, "lambda": model.cfg.lmbda, "bpp": res.bpp, "psnr": res.psnr})
        out["sequences"][p] = {"points": sorted(pts, key=lambda q: q["bpp"]),
                               "temporal_complexity": temporal_complexity(frames) if len(frames) > 1 else 0.0}
    _emit(out, a.report)
    return EXIT_OK


def _read_curve(path):
    """RD points from JSON ({"points": [[bpp, psnr], ...]} or a list) or 2-column CSV."""
    from lvc.evaluation.metrics import RDCurve

    p = Path(path)
    if p.suffix == ".json":
        data = json.loads(p.read_text())
        pts = data["points"] if isinstance(data, dict) else data
        pts = [(q["bpp"], q["psnr"]) if isinstance(q, dict) else tuple(q) for q in pts]
    else:
        rows = [r.split(",") for r in p.read_text().split() if r.strip()]
        pts = [(float(r[0]), float(r[1])) for r in rows if r[0].strip().replace(".", "", 1).isdigit()]
    return RDCurve(pts)


def cmd_bdrate(args) -> int:
    from lvc.evaluation.metrics import bd_rate

    res = bd_rate(_read_curve(args.anchor), _read_curve(args.test))
    _emit({"bd_rate": res.percent, "psnr_overlap": list(res.psnr_overlap)})
    return EXIT_OK


def cmd_profile(args) -> int:
    from lvc.codec import VideoCodec
    from lvc.config import ModelConfig
    from lvc.matrix import ExperimentMatrix
    from lvc.profiler import profile, reports_to_csv
    from lvc.training import load_checkpoint

    a = _resolve(args, {"framework": "MCR", "strategy": "hybrid", "ib": 64, "width": 64,
                        "height": 1080, "frame_width": 1920, "format": "json"})
    res = (int(a.height), int(a.frame_width))
    if a.checkpoint:
        models = [load_checkpoint(a.checkpoint)[0]]
    elif a.all:
        models = [VideoCodec(c.model_config(1024, int(a.width))) for c in ExperimentMatrix().variants()]
    else:
        models = [VideoCodec(_model_config(a, 1024.0))]
    reports = [profile(m, res) for m in models]
    if a.format == "csv":
        sys.stdout.write(reports_to_csv(reports))
    else:
        print("\n".join(r.to_json() for r in reports))
    return EXIT_OK


def cmd_matrix(args) -> int:
    from lvc.matrix import ExperimentMatrix, run_matrix

    cfg = _load_config(args.config)
    for key in ("frameworks", "strategies", "budgets", "lambdas", "cells"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    for key in ("output", "seed", "anchor", "width", "train_steps", "num_frames", "intra_period", "workers"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.dataset:
        datasets = {}
        for item in args.dataset:
            name, _, path = item.partition("=")
            if not path:
                raise UsageError(f"--dataset expects NAME=PATH, got {item!r}")
            datasets.setdefault(name, []).append(path)
        cfg["datasets"] = datasets
    try:
        matrix = ExperimentMatrix.from_dict(cfg)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if not matrix.datasets:
        raise UsageError("no datasets given (config 'datasets' or --dataset NAME=PATH)")
    results = run_matrix(matrix, train=args.train)
    print(f"{len(results['rows'])} rows written to {Path(matrix.output) / 'results.csv'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from lvc.plots import emit_plots

    results = json.loads(Path(args.results).read_text())
    paths = emit_plots(results, args.output)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    from lvc.data import synthetic_clip

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        rng = np.random.default_rng([args.seed, i])
        clip = synthetic_clip(rng, args.frames, args.height, args.width, max_speed=args.max_speed)
        np.save(out / f"clip_{i:03d}.npy", clip)
    print(f"{args.count} clips written to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lvc", description="Learned video codec experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def variant_flags(sp):
        sp.add_argument("--framework", choices=["RC", "CC", "CRC", "MCR"], type=str.upper)
        sp.add_argument("--strategy", choices=["explicit", "implicit", "hybrid"], type=str.lower)
        sp.add_argument("--ib", type=int)
        sp.add_argument("--width", type=int, help="network width")

    s = sub.add_parser("train", help="train one model")
    s.add_argument("--config")
    variant_flags(s)
    s.add_argument("--lmbda", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--patch-size", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--lr-final", type=float)
    s.add_argument("--rollout", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--data", nargs="+", help="training sequences (default: synthetic clips)")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("encode", help="encode a sequence into a container")
    s.add_argument("--config")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("-i", "--input", required=True)
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--frames", type=int)
    s.add_argument("--intra-period", type=int)
    s.add_argument("--report")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="decode a container")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("-i", "--input", required=True)
    s.add_argument("-o", "--output", help=".npy file for the decoded frames")
    s.add_argument("--reference", help="source sequence for per-frame PSNR")
    s.add_argument("--report")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("eval", help="RD points of checkpoints on sequences")
    s.add_argument("--config")
    s.add_argument("--checkpoint", nargs="+", required=True)
    s.add_argument("-i", "--input", nargs="+", required=True)
    s.add_argument("--frames", type=int)
    s.add_argument("--intra-period", type=int)
    s.add_argument("--report")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bdrate", help="BD-rate of two RD curves")
    s.add_argument("--anchor", required=True)
    s.add_argument("--test", required=True)
    s.set_defaults(func=cmd_bdrate)

    s = sub.add_parser("profile", help="kMACs/pixel and model size")
    s.add_argument("--config")
    variant_flags(s)
    s.add_argument("--checkpoint")
    s.add_argument("--all", action="store_true", help="profile all 20 grid variants")
    s.add_argument("--height", type=int)
    s.add_argument("--frame-width", type=int)
    s.add_argument("--format", choices=["json", "csv"])
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("matrix", help="run the framework x buffering grid")
    s.add_argument("--config")
    s.add_argument("--frameworks", nargs="+")
    s.add_argument("--strategies", nargs="+")
    s.add_argument("--budgets", nargs="+", type=int)
    s.add_argument("--lambdas", nargs="+", type=float)
    s.add_argument("--cells", nargs="+", help="explicit cells, e.g. RC-explicit MCR-hybrid-64")
    s.add_argument("--dataset", action="append", help="NAME=PATH, repeatable")
    s.add_argument("-o", "--output")
    s.add_argument("--seed", type=int)
    s.add_argument("--anchor")
    s.add_argument("--width", type=int)
    s.add_argument("--train-steps", type=int)
    s.add_argument("--num-frames", type=int)
    s.add_argument("--intra-period", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--train", action="store_true", help="train missing checkpoints")
    s.set_defaults(func=cmd_matrix)

    s = sub.add_parser("plot", help="figures from a matrix results.json")
    s.add_argument("--results", required=True)
    s.add_argument("-o", "--output", default="plots")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("gen-data", help="write synthetic clips as .npy")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--count", type=int, default=8)
    s.add_argument("--frames", type=int, default=96)
    s.add_argument("--height", type=int, default=128)
    s.add_argument("--width", type=int, default=128)
    s.add_argument("--max-speed", type=float, default=2.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gen_data)
    return p


def main(argv=None) -> int:
    from lvc.entropy import DecodeError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"lvc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DecodeError as exc:
        print(f"lvc: decode failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (ValueError, OSError, KeyError) as exc:
        print(f"lvc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
